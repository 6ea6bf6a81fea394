#pragma once

// Pipeline configuration. One JSON file holds every experiment parameter;
// command-line flags only pick paths and stages. Parsing collects every
// problem before failing, and unknown keys are errors so typos cannot
// silently fall back to defaults.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "osrlab/data/synth.hpp"
#include "osrlab/error.hpp"
#include "osrlab/nn/checkpoint.hpp"
#include "osrlab/nn/optim.hpp"
#include "osrlab/osrnet/delta.hpp"

namespace osrlab::pipeline {

using nn::ordered_json;
namespace fs = std::filesystem;

/// Every violation found in a configuration, in document order.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> errors) : Error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string s = "invalid configuration:";
    for (const auto& e : errors) s += "\n  " + e;
    return s;
  }
  std::vector<std::string> errors_;
};

struct DatasetSource {
  enum class Kind { synthetic, manifest } kind = Kind::synthetic;
  // synthetic
  std::vector<data::GaussianClass> classes;
  double scale = 1.0;
  std::size_t count_per_class = 0;
  std::uint64_t seed = 0;
  std::string origin;
  // manifest; relative paths resolve against the config file's directory
  std::string manifest;

  std::vector<std::string> class_names;  // declared names, filled for both kinds
};

struct SplitConfig {
  std::vector<std::string> kk_classes;
  std::vector<std::string> uu_classes;
  std::optional<std::size_t> n_kk;  // random class selection per seed instead of named lists
  double test_fraction = 0.2;
};

struct BackboneConfig {
  std::string architecture = "mlp";  // "mlp" | "cnn"
  std::vector<std::size_t> hidden;   // mlp hidden widths or cnn conv channels
  std::size_t fc1_width = 16;
  nn::SgdOptions sgd;
  bool augment = false;  // cnn only: random hflip and translation
};

struct ThresholdConfig {
  std::string policy = "sweep";  // "sweep" | "fixed"
  std::vector<double> candidates{0.6, 0.7, 0.8, 0.95};
  double value = 0.8;                            // fixed policy
  std::vector<std::size_t> sweep_hidden_widths;  // empty: the cs grid
};

struct CsConfig {
  std::vector<std::size_t> hidden_widths;  // empty: {d1/2, d1, 2 d1}
  std::size_t folds = 10;
  nn::GdxTrainOptions gdx;
};

struct DeltaConfig {
  double holdout_fraction = 0.2;
  osrnet::Costs costs;
};

struct EvaluateConfig {
  std::string mmd_kernel = "rbf";  // "rbf" | "linear"
  std::optional<double> mmd_bandwidth;
};

struct PipelineConfig {
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "osrlab-out";
  DatasetSource known;
  DatasetSource aux;
  SplitConfig split;
  BackboneConfig backbone;
  ThresholdConfig threshold;
  CsConfig cs;
  DeltaConfig delta;
  EvaluateConfig evaluate;
  fs::path base_dir;  // directory of the config file
};

namespace detail {

/// Walks a JSON object, remembering which keys were consumed and recording
/// type errors against a dotted path.
class Reader {
 public:
  Reader(const ordered_json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) error(path_.empty() ? "configuration must be a JSON object" : path_ + ": must be an object");
  }

  ~Reader() = default;
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool ok() const { return j_.is_object(); }
  bool has(const std::string& key) const { return ok() && j_.contains(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void error(const std::string& msg) { errors_.push_back(msg); }

  const ordered_json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const ordered_json* v = child(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!non_negative_integer(*v)) throw std::invalid_argument("non-negative integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      error(at(key) + ": expected " + describe<T>());
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    const std::size_t before = errors_.size();
    get(key, v);
    if (errors_.size() == before) out = v;
  }

  template <typename T>
  void get(const std::string& key, std::vector<T>& out) {
    const ordered_json* v = child(key);
    if (!v) return;
    if (!v->is_array()) {
      error(at(key) + ": expected an array of " + describe<T>());
      return;
    }
    out.clear();
    for (const auto& e : *v) {
      const bool good = std::is_same_v<T, double> ? e.is_number()
                        : std::is_same_v<T, std::string> ? e.is_string()
                                                          : non_negative_integer(e);
      if (!good) {
        error(at(key) + ": expected an array of " + describe<T>());
        out.clear();
        return;
      }
      out.push_back(e.get<T>());
    }
  }

  void require(const std::string& key, const std::string& msg) {
    if (ok() && !has(key)) error(at(key) + ": " + msg);
  }

  /// Call once every key of interest has been read.
  void reject_unknown() {
    if (!ok()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) error(at(k) + ": unknown key");
    }
  }

 private:
  // Programmatically built documents store small ints as signed.
  static bool non_negative_integer(const ordered_json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }

  template <typename T>
  static std::string describe() {
    if constexpr (std::is_same_v<T, double>) return "a number";
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    return "a non-negative integer";
  }

  const ordered_json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline std::vector<std::string> manifest_class_names(const fs::path& path, const std::string& where,
                                                     std::vector<std::string>& errors) {
  try {
    const auto j = nn::parse_text(nn::read_text_file(path.string()));
    return j.at("class_names").get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    errors.push_back(where + ": cannot read class names from '" + path.string() + "': " + e.what());
    return {};
  }
}

inline DatasetSource parse_source(const ordered_json* j, const std::string& path, const fs::path& base,
                                  const std::string& default_origin, std::vector<std::string>& errors) {
  DatasetSource src;
  if (!j) {
    errors.push_back(path + ": required");
    return src;
  }
  Reader r(*j, path, errors);
  const bool synth = r.has("synthetic");
  const bool manifest = r.has("manifest");
  if (r.ok() && synth == manifest) r.error(path + ": give exactly one of 'synthetic' or 'manifest'");
  if (manifest) {
    src.kind = DatasetSource::Kind::manifest;
    r.get("manifest", src.manifest);
    if (!src.manifest.empty()) {
      const fs::path p = fs::path(src.manifest).is_absolute() ? fs::path(src.manifest) : base / src.manifest;
      src.class_names = manifest_class_names(p, r.at("manifest"), errors);
    }
  }
  if (synth) {
    src.kind = DatasetSource::Kind::synthetic;
    src.origin = default_origin;
    Reader s(*r.child("synthetic"), r.at("synthetic"), errors);
    s.require("seed", "seed required");
    s.require("count_per_class", "required");
    s.get("seed", src.seed);
    s.get("count_per_class", src.count_per_class);
    s.get("scale", src.scale);
    s.get("origin", src.origin);
    if (!(src.scale > 0.0)) s.error(s.at("scale") + ": must be positive");
    if (src.origin.empty()) s.error(s.at("origin") + ": must be nonempty");
    if (const ordered_json* cl = s.child("classes"); cl && cl->is_array() && !cl->empty()) {
      std::size_t dim = 0;
      for (std::size_t i = 0; i < cl->size(); ++i) {
        Reader c((*cl)[i], s.at("classes") + "[" + std::to_string(i) + "]", errors);
        data::GaussianClass gc;
        c.require("name", "required");
        c.require("mean", "required");
        c.get("name", gc.name);
        c.get("mean", gc.mean);
        c.get("scale", gc.scale);
        c.reject_unknown();
        if (gc.scale && !(*gc.scale > 0.0)) c.error(c.at("scale") + ": must be positive");
        if (i == 0) dim = gc.mean.size();
        if (gc.mean.empty() || gc.mean.size() != dim) c.error(c.at("mean") + ": all means need the same nonzero length");
        if (std::find(src.class_names.begin(), src.class_names.end(), gc.name) != src.class_names.end()) {
          c.error(c.at("name") + ": duplicate class name '" + gc.name + "'");
        }
        src.class_names.push_back(gc.name);
        src.classes.push_back(std::move(gc));
      }
    } else {
      s.error(s.at("classes") + ": expected a nonempty array");
    }
    s.reject_unknown();
  }
  r.reject_unknown();
  return src;
}

inline ordered_json source_to_json(const DatasetSource& s) {
  ordered_json j;
  if (s.kind == DatasetSource::Kind::manifest) {
    j["manifest"] = s.manifest;
    return j;
  }
  ordered_json syn;
  syn["seed"] = s.seed;
  syn["count_per_class"] = s.count_per_class;
  syn["scale"] = s.scale;
  syn["origin"] = s.origin;
  ordered_json classes = ordered_json::array();
  for (const auto& c : s.classes) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["mean"] = c.mean;
    if (c.scale) cj["scale"] = *c.scale;
    classes.push_back(std::move(cj));
  }
  syn["classes"] = std::move(classes);
  j["synthetic"] = std::move(syn);
  return j;
}

}  // namespace detail

/// Parses and validates; throws ConfigError listing every problem found.
inline PipelineConfig parse_config(const ordered_json& j, const fs::path& base_dir = ".") {
  std::vector<std::string> errors;
  PipelineConfig c;
  c.base_dir = base_dir;
  detail::Reader root(j, "", errors);
  if (!root.ok()) throw ConfigError(errors);

  if (!root.has("seeds")) {
    errors.push_back("seeds: seed required");
  } else {
    root.get("seeds", c.seeds);
    if (c.seeds.empty()) errors.push_back("seeds: seed required (the list is empty)");
    std::set<std::uint64_t> uniq(c.seeds.begin(), c.seeds.end());
    if (uniq.size() != c.seeds.size()) errors.push_back("seeds: duplicate seed");
  }
  root.get("output_dir", c.output_dir);

  if (const ordered_json* ds = root.child("datasets")) {
    detail::Reader d(*ds, "datasets", errors);
    c.known = detail::parse_source(d.child("known"), "datasets.known", base_dir, "known", errors);
    c.aux = detail::parse_source(d.child("aux"), "datasets.aux", base_dir, "aux", errors);
    d.reject_unknown();
  } else {
    errors.push_back("datasets: required");
  }

  if (const ordered_json* sj = root.child("split")) {
    detail::Reader s(*sj, "split", errors);
    s.get("kk_classes", c.split.kk_classes);
    s.get("uu_classes", c.split.uu_classes);
    s.get("n_kk", c.split.n_kk);
    s.get("test_fraction", c.split.test_fraction);
    s.reject_unknown();
    if (!(c.split.test_fraction > 0.0 && c.split.test_fraction < 1.0)) errors.push_back("split.test_fraction: must lie in (0, 1)");
    const auto& names = c.known.class_names;
    if (c.split.n_kk) {
      if (!c.split.kk_classes.empty() || !c.split.uu_classes.empty()) {
        errors.push_back("split: give either n_kk or kk_classes/uu_classes, not both");
      }
      if (*c.split.n_kk == 0 || (!names.empty() && *c.split.n_kk >= names.size())) {
        errors.push_back("split.n_kk: must lie strictly between 0 and the number of classes");
      }
    } else {
      if (c.split.kk_classes.empty()) errors.push_back("split.kk_classes: at least one known class required");
      std::set<std::string> seen;
      for (const auto* list : {&c.split.kk_classes, &c.split.uu_classes}) {
        for (const auto& n : *list) {
          if (!names.empty() && std::find(names.begin(), names.end(), n) == names.end()) {
            errors.push_back("split: class '" + n + "' is not declared by datasets.known");
          }
          if (!seen.insert(n).second) errors.push_back("split: class '" + n + "' listed twice (known and unknown sets must be disjoint)");
        }
      }
    }
  } else {
    errors.push_back("split: required");
  }

  // Algorithm precondition: D_x shares no class with the known or unknown sets.
  for (const auto& n : c.aux.class_names) {
    if (std::find(c.known.class_names.begin(), c.known.class_names.end(), n) != c.known.class_names.end()) {
      errors.push_back("datasets.aux: class '" + n +
                       "' also appears in datasets.known; auxiliary classes must be disjoint from known and unknown classes");
    }
  }
  if (c.known.kind == DatasetSource::Kind::synthetic && c.aux.kind == DatasetSource::Kind::synthetic &&
      !c.known.origin.empty() && c.known.origin == c.aux.origin) {
    errors.push_back("datasets.aux.synthetic.origin: must differ from datasets.known origin");
  }
  if (c.known.kind == DatasetSource::Kind::synthetic && c.aux.kind == DatasetSource::Kind::synthetic &&
      !c.known.classes.empty() && !c.aux.classes.empty() &&
      c.known.classes.front().mean.size() != c.aux.classes.front().mean.size()) {
    errors.push_back("datasets: known and aux samples differ in dimension");
  }

  if (const ordered_json* bj = root.child("backbone")) {
    detail::Reader b(*bj, "backbone", errors);
    b.get("architecture", c.backbone.architecture);
    b.get("hidden", c.backbone.hidden);
    b.get("fc1_width", c.backbone.fc1_width);
    b.get("augment", c.backbone.augment);
    if (const ordered_json* sg = b.child("sgd")) {
      detail::Reader s(*sg, "backbone.sgd", errors);
      s.get("learning_rate", c.backbone.sgd.learning_rate);
      s.get("momentum", c.backbone.sgd.momentum);
      s.get("batch_size", c.backbone.sgd.batch_size);
      s.get("epochs", c.backbone.sgd.epochs);
      s.reject_unknown();
    }
    b.reject_unknown();
    if (c.backbone.architecture != "mlp" && c.backbone.architecture != "cnn") {
      errors.push_back("backbone.architecture: must be \"mlp\" or \"cnn\"");
    }
    if (c.backbone.fc1_width == 0) errors.push_back("backbone.fc1_width: must be positive");
    if (std::count(c.backbone.hidden.begin(), c.backbone.hidden.end(), 0u)) errors.push_back("backbone.hidden: widths must be positive");
    if (c.backbone.augment && c.backbone.architecture != "cnn") errors.push_back("backbone.augment: only images (cnn) can be augmented");
    if (!(c.backbone.sgd.learning_rate > 0.0)) errors.push_back("backbone.sgd.learning_rate: must be positive");
    if (c.backbone.sgd.momentum < 0.0 || c.backbone.sgd.momentum >= 1.0) errors.push_back("backbone.sgd.momentum: must lie in [0, 1)");
    if (c.backbone.sgd.batch_size == 0) errors.push_back("backbone.sgd.batch_size: must be positive");
  } else {
    errors.push_back("backbone: required");
  }

  if (const ordered_json* tj = root.child("threshold")) {
    detail::Reader t(*tj, "threshold", errors);
    t.get("policy", c.threshold.policy);
    t.get("candidates", c.threshold.candidates);
    t.get("value", c.threshold.value);
    t.get("sweep_hidden_widths", c.threshold.sweep_hidden_widths);
    t.reject_unknown();
    if (c.threshold.policy == "sweep") {
      std::set<double> distinct(c.threshold.candidates.begin(), c.threshold.candidates.end());
      if (distinct.size() < 4) errors.push_back("threshold.candidates: a cubic fit needs at least 4 distinct values");
      for (double v : c.threshold.candidates) {
        if (!(v >= 0.0 && v < 1.0)) errors.push_back("threshold.candidates: values must lie in [0, 1)");
      }
    } else if (c.threshold.policy == "fixed") {
      if (!(c.threshold.value >= 0.0 && c.threshold.value < 1.0)) errors.push_back("threshold.value: must lie in [0, 1)");
    } else {
      errors.push_back("threshold.policy: must be \"sweep\" or \"fixed\"");
    }
  } else {
    errors.push_back("threshold: required");
  }

  if (const ordered_json* cj = root.child("cs")) {
    detail::Reader s(*cj, "cs", errors);
    s.get("hidden_widths", c.cs.hidden_widths);
    s.get("folds", c.cs.folds);
    if (const ordered_json* gj = s.child("gdx")) {
      detail::Reader g(*gj, "cs.gdx", errors);
      g.get("learning_rate", c.cs.gdx.gdx.learning_rate);
      g.get("momentum", c.cs.gdx.gdx.momentum);
      g.get("lr_increase", c.cs.gdx.gdx.lr_increase);
      g.get("lr_decrease", c.cs.gdx.gdx.lr_decrease);
      g.get("max_loss_increase_ratio", c.cs.gdx.gdx.max_loss_increase_ratio);
      g.get("max_epochs", c.cs.gdx.max_epochs);
      g.get("loss_goal", c.cs.gdx.loss_goal);
      g.reject_unknown();
      try {
        nn::GdxState probe(c.cs.gdx.gdx);
      } catch (const InvalidArgument& e) {
        errors.push_back(std::string("cs.gdx: ") + e.what());
      }
    }
    s.reject_unknown();
    if (c.cs.folds < 2) errors.push_back("cs.folds: need at least 2");
    for (const auto* w : {&c.cs.hidden_widths, &c.threshold.sweep_hidden_widths}) {
      if (std::count(w->begin(), w->end(), 0u)) errors.push_back("cs: hidden widths must be positive");
    }
  } else {
    errors.push_back("cs: required");
  }

  if (const ordered_json* dj = root.child("delta")) {
    detail::Reader d(*dj, "delta", errors);
    d.get("holdout_fraction", c.delta.holdout_fraction);
    if (const ordered_json* cj = d.child("costs")) {
      detail::Reader k(*cj, "delta.costs", errors);
      k.get("c_pn", c.delta.costs.c_pn);
      k.get("c_np", c.delta.costs.c_np);
      k.get("c_nn", c.delta.costs.c_nn);
      k.get("c_pp", c.delta.costs.c_pp);
      k.reject_unknown();
    }
    d.reject_unknown();
    if (!(c.delta.holdout_fraction > 0.0 && c.delta.holdout_fraction < 1.0)) {
      errors.push_back("delta.holdout_fraction: must lie in (0, 1)");
    }
    try {
      (void)osrnet::optimal_slope(c.delta.costs, 1.0, 1.0);
    } catch (const InvalidArgument& e) {
      errors.push_back(std::string("delta.costs: ") + e.what());
    }
  }

  if (const ordered_json* ej = root.child("evaluate")) {
    detail::Reader e(*ej, "evaluate", errors);
    e.get("mmd_kernel", c.evaluate.mmd_kernel);
    e.get("mmd_bandwidth", c.evaluate.mmd_bandwidth);
    e.reject_unknown();
    if (c.evaluate.mmd_kernel != "rbf" && c.evaluate.mmd_kernel != "linear") {
      errors.push_back("evaluate.mmd_kernel: must be \"rbf\" or \"linear\"");
    }
    if (c.evaluate.mmd_bandwidth && !(*c.evaluate.mmd_bandwidth > 0.0)) errors.push_back("evaluate.mmd_bandwidth: must be positive");
  }

  root.reject_unknown();
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = nn::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError({e.what()});
  }
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse_config(j, fs::path(path).parent_path());
}

namespace section {

inline ordered_json datasets(const PipelineConfig& c) {
  return {{"known", detail::source_to_json(c.known)}, {"aux", detail::source_to_json(c.aux)}};
}

inline ordered_json split(const PipelineConfig& c) {
  ordered_json j;
  if (c.split.n_kk) {
    j["n_kk"] = *c.split.n_kk;
  } else {
    j["kk_classes"] = c.split.kk_classes;
    j["uu_classes"] = c.split.uu_classes;
  }
  j["test_fraction"] = c.split.test_fraction;
  return j;
}

inline ordered_json backbone(const PipelineConfig& c) {
  const auto& b = c.backbone;
  return {{"architecture", b.architecture},
          {"hidden", b.hidden},
          {"fc1_width", b.fc1_width},
          {"augment", b.augment},
          {"sgd",
           {{"learning_rate", b.sgd.learning_rate},
            {"momentum", b.sgd.momentum},
            {"batch_size", b.sgd.batch_size},
            {"epochs", b.sgd.epochs}}}};
}

inline ordered_json threshold(const PipelineConfig& c) {
  const auto& t = c.threshold;
  ordered_json j{{"policy", t.policy}};
  if (t.policy == "fixed") {
    j["value"] = t.value;
  } else {
    j["candidates"] = t.candidates;
    j["sweep_hidden_widths"] = t.sweep_hidden_widths;
  }
  return j;
}

inline ordered_json cs(const PipelineConfig& c) {
  const auto& g = c.cs.gdx;
  return {{"hidden_widths", c.cs.hidden_widths},
          {"folds", c.cs.folds},
          {"gdx",
           {{"learning_rate", g.gdx.learning_rate},
            {"momentum", g.gdx.momentum},
            {"lr_increase", g.gdx.lr_increase},
            {"lr_decrease", g.gdx.lr_decrease},
            {"max_loss_increase_ratio", g.gdx.max_loss_increase_ratio},
            {"max_epochs", g.max_epochs},
            {"loss_goal", g.loss_goal}}}};
}

inline ordered_json delta(const PipelineConfig& c) {
  const auto& k = c.delta.costs;
  return {{"holdout_fraction", c.delta.holdout_fraction},
          {"costs", {{"c_pn", k.c_pn}, {"c_np", k.c_np}, {"c_nn", k.c_nn}, {"c_pp", k.c_pp}}}};
}

inline ordered_json evaluate(const PipelineConfig& c) {
  ordered_json j{{"mmd_kernel", c.evaluate.mmd_kernel}};
  if (c.evaluate.mmd_bandwidth) j["mmd_bandwidth"] = *c.evaluate.mmd_bandwidth;
  return j;
}

}  // namespace section

/// Normalised form with every default spelled out. Parsing it yields the
/// same configuration.
inline ordered_json config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["datasets"] = section::datasets(c);
  j["split"] = section::split(c);
  j["backbone"] = section::backbone(c);
  j["threshold"] = section::threshold(c);
  j["cs"] = section::cs(c);
  j["delta"] = section::delta(c);
  j["evaluate"] = section::evaluate(c);
  return j;
}

}  // namespace osrlab::pipeline
