#pragma once

// Run manifest: for every executed stage, the content hashes of its inputs,
// the files it wrote and how long it took. A stage whose recorded input
// hashes match and whose outputs still exist is not executed again.

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "osrlab/error.hpp"
#include "osrlab/nn/checkpoint.hpp"

namespace osrlab::pipeline {

namespace fs = std::filesystem;
using nn::ordered_json;

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(nn::read_text_file(path.string())); }

struct StageRecord {
  std::string status;  // "complete"
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;  // relative to the output directory
  double wall_time_s = 0.0;
};

class RunManifest {
 public:
  static constexpr const char* kFileName = "manifest.json";

  static RunManifest load(const fs::path& out_dir) {
    RunManifest m;
    const fs::path p = out_dir / kFileName;
    if (!fs::exists(p)) return m;
    try {
      const auto j = nn::parse_text(nn::read_text_file(p.string()));
      for (const auto& [key, r] : j.at("stages").items()) {
        StageRecord rec;
        rec.status = r.at("status").get<std::string>();
        rec.input_hashes = r.at("input_hashes").get<std::map<std::string, std::string>>();
        rec.outputs = r.at("outputs").get<std::vector<std::string>>();
        rec.wall_time_s = r.at("wall_time_s").get<double>();
        m.records_[key] = std::move(rec);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    return m;
  }

  void save(const fs::path& out_dir) const {
    ordered_json stages = ordered_json::object();
    for (const auto& [key, r] : records_) {
      ordered_json rj;
      rj["status"] = r.status;
      rj["input_hashes"] = r.input_hashes;
      rj["outputs"] = r.outputs;
      rj["wall_time_s"] = r.wall_time_s;
      stages[key] = std::move(rj);
    }
    ordered_json j;
    j["format_version"] = 1;
    j["stages"] = std::move(stages);
    nn::write_text_file((out_dir / kFileName).string(), j.dump(2) + "\n");
  }

  const StageRecord* find(const std::string& key) const {
    auto it = records_.find(key);
    return it == records_.end() ? nullptr : &it->second;
  }

  void put(const std::string& key, StageRecord r) { records_[key] = std::move(r); }
  void erase(const std::string& key) { records_.erase(key); }

  /// Complete and every recorded output still on disk.
  bool complete(const std::string& key, const fs::path& out_dir) const {
    const StageRecord* r = find(key);
    if (!r || r->status != "complete") return false;
    for (const auto& o : r->outputs) {
      if (!fs::exists(out_dir / o)) return false;
    }
    return true;
  }

  bool up_to_date(const std::string& key, const std::map<std::string, std::string>& hashes,
                  const fs::path& out_dir) const {
    return complete(key, out_dir) && find(key)->input_hashes == hashes;
  }

  const std::map<std::string, StageRecord>& records() const { return records_; }

 private:
  std::map<std::string, StageRecord> records_;
};

}  // namespace osrlab::pipeline
