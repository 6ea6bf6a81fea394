#pragma once

// Dataset manifests: a small JSON document naming the member files of a
// dataset, its declared class names, kind and sample shape.
//
//   {
//     "format_version": 1,
//     "kind": "vector" | "image",
//     "sample_shape": [d] | [C, H, W],
//     "class_names": ["...", ...],
//     "files": [
//       {"format": "csv", "path": "part.csv", "origin": "name"},
//       {"format": "idx", "images": "x-idx3-ubyte", "labels": "y-idx1-ubyte", "origin": "name"}
//     ]
//   }
//
// Relative paths resolve against the manifest's directory. Items keep file
// order; each file's items carry that file's origin tag.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "osrlab/data/csv.hpp"
#include "osrlab/data/dataset.hpp"
#include "osrlab/data/idx.hpp"
#include "osrlab/error.hpp"
#include "osrlab/nn/checkpoint.hpp"

namespace osrlab::data {

namespace fs = std::filesystem;

inline LabeledDataset load_manifest(const std::string& manifest_path) {
  using nlohmann::ordered_json;
  const ordered_json j = nn::parse_text(nn::read_text_file(manifest_path));
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  try {
    if (j.at("format_version") != 1) throw FormatError(manifest_path + ": unsupported format_version");
    const DataKind kind = data_kind_from_string(j.at("kind").get<std::string>());
    const Shape shape = j.at("sample_shape").get<Shape>();
    const auto names = j.at("class_names").get<std::vector<std::string>>();
    LabeledDataset ds(kind, shape, names);
    for (const auto& f : j.at("files")) {
      const std::string format = f.at("format").get<std::string>();
      const std::string origin = f.value("origin", std::string("unknown"));
      LabeledDataset part;
      if (format == "csv") {
        part = load_vectors_csv(resolve(f.at("path").get<std::string>()), names, origin, kind, shape);
      } else if (format == "idx") {
        part = load_idx(resolve(f.at("images").get<std::string>()), resolve(f.at("labels").get<std::string>()),
                        names, origin);
      } else {
        throw FormatError(manifest_path + ": unknown member format '" + format + "'");
      }
      if (part.sample_shape() != shape) throw FormatError(manifest_path + ": member sample shape mismatch");
      for (const auto& it : part.items()) ds.add(it.sample, it.class_id, it.origin);
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
}

/// Writes `<dir>/<stem>.json` plus one CSV per run of equal origin tags.
/// Returns every file written.
inline std::vector<std::string> save_manifest(const LabeledDataset& ds, const std::string& dir, const std::string& stem) {
  using nlohmann::ordered_json;
  std::vector<std::string> written;
  ordered_json files = ordered_json::array();
  std::size_t begin = 0;
  std::size_t part = 0;
  while (begin < ds.size() || (ds.empty() && part == 0)) {
    std::size_t end = begin;
    while (end < ds.size() && ds[end].origin == ds[begin].origin) ++end;
    const std::string name = stem + "." + std::to_string(part++) + ".csv";
    write_vectors_csv(ds, (fs::path(dir) / name).string(), begin, end);
    written.push_back((fs::path(dir) / name).string());
    files.push_back({{"format", "csv"}, {"path", name}, {"origin", ds.empty() ? "" : ds[begin].origin}});
    if (ds.empty()) break;
    begin = end;
  }
  ordered_json j;
  j["format_version"] = 1;
  j["kind"] = to_string(ds.kind());
  j["sample_shape"] = ds.sample_shape();
  j["class_names"] = ds.class_names();
  j["files"] = std::move(files);
  const std::string path = (fs::path(dir) / (stem + ".json")).string();
  nn::write_text_file(path, j.dump(2) + "\n");
  written.insert(written.begin(), path);
  return written;
}

}  // namespace osrlab::data
