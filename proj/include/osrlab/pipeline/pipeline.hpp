#pragma once

// The nine pipeline stages and the runner that sequences, caches and records
// them. Per-seed stages write under <out>/seed-<s>/; `report` aggregates all
// seeds into <out>/metrics.csv, metrics.json, sweep.csv and summary.txt.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osrlab/data/augment.hpp"
#include "osrlab/data/csv.hpp"
#include "osrlab/data/manifest.hpp"
#include "osrlab/data/split.hpp"
#include "osrlab/data/synth.hpp"
#include "osrlab/eval/distances.hpp"
#include "osrlab/eval/metrics.hpp"
#include "osrlab/mining/kut.hpp"
#include "osrlab/mining/sweep.hpp"
#include "osrlab/mining/threshold_curve.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/nn/checkpoint.hpp"
#include "osrlab/nn/loss.hpp"
#include "osrlab/nn/optim.hpp"
#include "osrlab/osrnet/confidence.hpp"
#include "osrlab/osrnet/delta.hpp"
#include "osrlab/osrnet/osrnet.hpp"
#include "osrlab/pipeline/config.hpp"
#include "osrlab/pipeline/run_manifest.hpp"
#include "osrlab/random.hpp"

namespace osrlab::pipeline {

enum class Stage { split, train_backbone, score_aux, fit_threshold, mine, train_cs, assemble, evaluate, report };

inline constexpr std::array<Stage, 9> kStages{Stage::split,    Stage::train_backbone, Stage::score_aux,
                                              Stage::fit_threshold, Stage::mine,     Stage::train_cs,
                                              Stage::assemble, Stage::evaluate,       Stage::report};

inline std::string to_string(Stage s) {
  static constexpr std::array<const char*, 9> names{"split", "train-backbone", "score-aux", "fit-threshold", "mine",
                                                    "train-cs", "assemble", "evaluate", "report"};
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<Stage> stage_from_string(const std::string& name) {
  for (Stage s : kStages) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

/// A prerequisite stage has not completed, or its inputs changed since it did.
class DependencyError : public Error {
 public:
  DependencyError(Stage wanted, Stage missing, const std::string& why)
      : Error("cannot run '" + to_string(wanted) + "': prerequisite stage '" + to_string(missing) + "' " + why),
        missing_(missing) {}
  Stage missing() const { return missing_; }

 private:
  Stage missing_;
};

struct StageReport {
  Stage stage = Stage::split;
  std::optional<std::uint64_t> seed;  // absent for report
  bool cached = false;
  double wall_time_s = 0.0;
  std::vector<std::string> warnings;
};

inline std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

/// Loads a configured dataset source.
inline data::LabeledDataset load_source(const DatasetSource& src, const fs::path& base_dir) {
  if (src.kind == DatasetSource::Kind::manifest) {
    const fs::path p = fs::path(src.manifest).is_absolute() ? fs::path(src.manifest) : base_dir / src.manifest;
    return data::load_manifest(p.string());
  }
  data::GaussianSpec spec;
  spec.classes = src.classes;
  spec.scale = src.scale;
  spec.count_per_class = src.count_per_class;
  spec.seed = src.seed;
  spec.origin = src.origin;
  return data::synth_gaussians(spec);
}

namespace detail {

inline std::string num(double v) { return data::format_double(v); }

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline ordered_json read_json(const fs::path& p) { return nn::parse_text(nn::read_text_file(p.string())); }

inline void write_json(const fs::path& p, const ordered_json& j) { nn::write_text_file(p.string(), j.dump(2) + "\n"); }

/// Content fingerprint of a source: the config entry itself for synthetic
/// data, the manifest plus every member file otherwise.
inline std::string source_fingerprint(const DatasetSource& src, const fs::path& base_dir) {
  std::string text = detail::source_to_json(src).dump();
  if (src.kind == DatasetSource::Kind::manifest) {
    const fs::path p = fs::path(src.manifest).is_absolute() ? fs::path(src.manifest) : base_dir / src.manifest;
    text += sha256_file(p);
    const auto j = read_json(p);
    const fs::path dir = p.parent_path();
    for (const auto& f : j.at("files")) {
      for (const char* key : {"path", "images", "labels"}) {
        if (f.contains(key)) {
          const fs::path m = f.at(key).get<std::string>();
          text += sha256_file(m.is_absolute() ? m : dir / m);
        }
      }
    }
  }
  return sha256_hex(text);
}

inline void write_scores_csv(const mining::ScoredAux& scored, const fs::path& p) {
  std::string text = "index,class_id,max_prob,argmax,entropy_bits\n";
  for (const auto& it : scored.items) {
    text += std::to_string(it.index) + "," + std::to_string(scored.source[it.index].class_id) + "," + num(it.max_prob) +
            "," + std::to_string(it.argmax) + "," + num(it.entropy_bits) + "\n";
  }
  nn::write_text_file(p.string(), text);
}

inline mining::ScoredAux read_scores_csv(data::LabeledDataset source, const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  mining::ScoredAux scored{std::move(source), {}};
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto f = data::detail::split_fields(line);
    double v[5];
    if (f.size() != 5) throw FormatError(p.string() + ": malformed row");
    for (std::size_t k = 0; k < 5; ++k) {
      if (!data::parse_double(f[k], v[k])) throw FormatError(p.string() + ": malformed number");
    }
    const auto index = static_cast<std::size_t>(v[0]);
    if (index >= scored.source.size() || scored.source[index].class_id != static_cast<std::size_t>(v[1])) {
      throw FormatError(p.string() + ": scores do not match the auxiliary dataset");
    }
    scored.items.push_back({index, v[2], static_cast<std::size_t>(v[3]), v[4]});
  }
  if (scored.items.size() != scored.source.size()) throw FormatError(p.string() + ": scores do not match the auxiliary dataset");
  return scored;
}

inline std::string join(const std::vector<double>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : std::string()) + num(v[i]);
  return s;
}

}  // namespace detail

class Pipeline {
 public:
  using Logger = std::function<void(const std::string&)>;

  Pipeline(PipelineConfig config, fs::path out_dir, Logger log = {})
      : cfg_(std::move(config)), out_(std::move(out_dir)), log_(std::move(log)) {
    fs::create_directories(out_);
    manifest_ = RunManifest::load(out_);
  }

  const fs::path& out_dir() const { return out_; }
  const RunManifest& manifest() const { return manifest_; }
  const PipelineConfig& config() const { return cfg_; }

  /// Runs one stage for every seed (report runs once).
  std::vector<StageReport> run(Stage s) {
    std::vector<StageReport> out;
    if (s == Stage::report) {
      out.push_back(run_one(s, std::nullopt));
    } else {
      for (std::uint64_t seed : cfg_.seeds) out.push_back(run_one(s, seed));
    }
    return out;
  }

  /// The nine stages in order.
  std::vector<StageReport> run_all() {
    std::vector<StageReport> out;
    for (Stage s : kStages) {
      auto r = run(s);
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }

 private:
  struct Ctx {
    std::uint64_t seed = 0;
    fs::path dir;  // absolute seed directory
    std::string rel;  // seed directory relative to the output root
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    fs::path file(const std::string& name) {
      outputs.push_back(rel.empty() ? name : rel + "/" + name);
      return dir / name;
    }
    void add_written(const std::vector<std::string>& paths, const fs::path& root) {
      for (const auto& p : paths) outputs.push_back(fs::relative(p, root).generic_string());
    }
  };

  static std::string key(Stage s, std::optional<std::uint64_t> seed) {
    return seed ? seed_dir(*seed) + "/" + to_string(s) : to_string(s);
  }

  static std::vector<Stage> inputs_of(Stage s) {
    switch (s) {
      case Stage::split: return {};
      case Stage::train_backbone: return {Stage::split};
      case Stage::score_aux: return {Stage::split, Stage::train_backbone};
      case Stage::fit_threshold: return {Stage::split, Stage::train_backbone, Stage::score_aux};
      case Stage::mine: return {Stage::score_aux, Stage::fit_threshold};
      case Stage::train_cs: return {Stage::split, Stage::train_backbone, Stage::mine};
      case Stage::assemble: return {Stage::train_backbone, Stage::train_cs};
      case Stage::evaluate: return {Stage::split, Stage::mine, Stage::train_cs, Stage::assemble};
      case Stage::report: return {Stage::fit_threshold, Stage::evaluate};
    }
    return {};
  }

  ordered_json config_slice(Stage s, std::optional<std::uint64_t> seed) const {
    ordered_json j;
    if (seed) j["seed"] = *seed;
    switch (s) {
      case Stage::split:
        j["known"] = detail::source_fingerprint(cfg_.known, cfg_.base_dir);
        j["split"] = section::split(cfg_);
        break;
      case Stage::train_backbone: j["backbone"] = section::backbone(cfg_); break;
      case Stage::score_aux:
      case Stage::mine: j["aux"] = detail::source_fingerprint(cfg_.aux, cfg_.base_dir); break;
      case Stage::fit_threshold:
        j["aux"] = detail::source_fingerprint(cfg_.aux, cfg_.base_dir);
        j["threshold"] = section::threshold(cfg_);
        j["cs"] = section::cs(cfg_);
        break;
      case Stage::train_cs:
        j["cs"] = section::cs(cfg_);
        j["delta"] = section::delta(cfg_);
        break;
      case Stage::assemble: break;
      case Stage::evaluate: j["evaluate"] = section::evaluate(cfg_); break;
      case Stage::report:
        j["seeds"] = cfg_.seeds;
        j["threshold_policy"] = cfg_.threshold.policy;
        break;
    }
    return j;
  }

  std::map<std::string, std::string> input_hashes(Stage s, std::optional<std::uint64_t> seed) const {
    std::map<std::string, std::string> h;
    h["config"] = sha256_hex(config_slice(s, seed).dump());
    for (Stage dep : inputs_of(s)) {
      const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : cfg_.seeds;
      for (std::uint64_t sd : seeds) {
        for (const auto& o : manifest_.find(key(dep, sd))->outputs) h[o] = sha256_file(out_ / o);
      }
    }
    return h;
  }

  void check_prerequisites(Stage s, std::optional<std::uint64_t> seed) const {
    for (Stage before : kStages) {
      if (before == s) break;
      const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : cfg_.seeds;
      for (std::uint64_t sd : seeds) {
        if (!manifest_.complete(key(before, sd), out_)) {
          throw DependencyError(s, before, "has not completed for seed " + std::to_string(sd));
        }
        if (manifest_.find(key(before, sd))->input_hashes != input_hashes(before, sd)) {
          throw DependencyError(s, before, "is out of date for seed " + std::to_string(sd) + "; re-run it");
        }
      }
    }
  }

  StageReport run_one(Stage s, std::optional<std::uint64_t> seed) {
    check_prerequisites(s, seed);
    const std::string k = key(s, seed);
    StageReport report{s, seed, false, 0.0, {}};
    auto hashes = input_hashes(s, seed);
    if (manifest_.up_to_date(k, hashes, out_)) {
      report.cached = true;
      log(k + ": up to date");
      return report;
    }
    // Forget the previous result first, so a failure leaves no stale record.
    if (const StageRecord* old = manifest_.find(k)) {
      for (const auto& o : old->outputs) fs::remove(out_ / o);
      manifest_.erase(k);
      manifest_.save(out_);
    }
    Ctx ctx;
    ctx.seed = seed.value_or(0);
    ctx.rel = seed ? seed_dir(*seed) : std::string();
    ctx.dir = seed ? out_ / ctx.rel : out_;
    const auto t0 = std::chrono::steady_clock::now();
    log(k + ": running");
    switch (s) {
      case Stage::split: stage_split(ctx); break;
      case Stage::train_backbone: stage_train_backbone(ctx); break;
      case Stage::score_aux: stage_score_aux(ctx); break;
      case Stage::fit_threshold: stage_fit_threshold(ctx); break;
      case Stage::mine: stage_mine(ctx); break;
      case Stage::train_cs: stage_train_cs(ctx); break;
      case Stage::assemble: stage_assemble(ctx); break;
      case Stage::evaluate: stage_evaluate(ctx); break;
      case Stage::report: stage_report(ctx); break;
    }
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.warnings = ctx.warnings;
    for (const auto& w : ctx.warnings) log(k + ": warning: " + w);
    manifest_.put(k, StageRecord{"complete", std::move(hashes), ctx.outputs, report.wall_time_s});
    manifest_.save(out_);
    log(k + ": done in " + std::to_string(report.wall_time_s) + " s");
    return report;
  }

  void log(const std::string& msg) const {
    if (log_) log_(msg);
  }

  // ---- stage bodies ----------------------------------------------------

  data::LabeledDataset load_split(const Ctx& c, const std::string& stem) const {
    return data::load_manifest((c.dir / "split" / (stem + ".json")).string());
  }

  nn::BackboneNet load_backbone(const Ctx& c) const {
    return nn::backbone_from_text(nn::read_text_file((c.dir / "backbone" / "backbone.ckpt.json").string())).backbone;
  }

  mining::ScoredAux load_scores(const Ctx& c) const {
    return detail::read_scores_csv(load_source(cfg_.aux, cfg_.base_dir), c.dir / "aux" / "scores.csv");
  }

  void stage_split(Ctx& c) {
    const auto ds = load_source(cfg_.known, cfg_.base_dir);
    data::SplitSpec spec;
    if (cfg_.split.n_kk) {
      spec = data::random_split_spec(ds.class_names().size(), *cfg_.split.n_kk, derive_seed(c.seed, "class-selection"));
    } else {
      auto id_of = [&](const std::string& name) {
        const auto& names = ds.class_names();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw InvalidArgument("split: dataset has no class '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
      };
      for (const auto& n : cfg_.split.kk_classes) spec.kk_class_ids.insert(id_of(n));
      for (const auto& n : cfg_.split.uu_classes) spec.uu_class_ids.insert(id_of(n));
    }
    spec.seed = derive_seed(c.seed, "split");
    const auto sp = data::split_kk_uu(ds, spec, cfg_.split.test_fraction);
    fs::create_directories(c.dir / "split");
    c.add_written(data::save_manifest(sp.d_kk_train, (c.dir / "split").string(), "d_kk_train"), out_);
    c.add_written(data::save_manifest(sp.d_kk_test, (c.dir / "split").string(), "d_kk_test"), out_);
    c.add_written(data::save_manifest(sp.d_uu_test, (c.dir / "split").string(), "d_uu_test"), out_);
    const std::size_t n_kk = spec.kk_class_ids.size();
    ordered_json j;
    j["kk_classes"] = sp.d_kk_train.class_names();
    j["uu_classes"] = sp.d_uu_test.class_names();
    j["openness"] = data::openness(n_kk, n_kk + spec.uu_class_ids.size());
    j["d_kk_train"] = sp.d_kk_train.size();
    j["d_kk_test"] = sp.d_kk_test.size();
    j["d_uu_test"] = sp.d_uu_test.size();
    detail::write_json(c.file("split/split.json"), j);
    if (sp.d_uu_test.empty()) c.warnings.push_back("unknown test fold is empty; AUROC will be undefined");
  }

  void stage_train_backbone(Ctx& c) {
    const auto train = load_split(c, "d_kk_train");
    const auto test = load_split(c, "d_kk_test");
    if (train.empty()) throw InvalidArgument("train-backbone: known training fold is empty");
    const auto& b = cfg_.backbone;
    const std::size_t classes = train.class_names().size();
    const std::uint64_t init = derive_seed(c.seed, "backbone-init");
    nn::BackboneNet net;
    if (b.architecture == "cnn") {
      const auto& sh = train.sample_shape();
      if (sh.size() != 3) throw InvalidArgument("train-backbone: cnn needs [C x H x W] samples");
      net = nn::BackboneNet::cnn(sh[0], sh[1], sh[2], b.hidden, b.fc1_width, classes, init);
    } else {
      net = nn::BackboneNet::mlp(train.sample_dim(), b.hidden, b.fc1_width, classes, init);
    }
    const bool aug = b.augment;
    const double loss = nn::train_sgd(net.network(), train.stacked(), nn::one_hot(train.labels(), classes), b.sgd,
                                      derive_seed(c.seed, "backbone-sgd"), [aug](Tensor& batch, Rng& rng) {
                                        if (aug) data::augment_batch(batch, rng, true, data::kMaxShift);
                                      });
    double acc = 0.0;
    if (!test.empty()) {
      const Tensor probs = net.probabilities(test.stacked());
      std::size_t hit = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto row = probs.row(i);
        hit += static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) == test[i].class_id;
      }
      acc = static_cast<double>(hit) / static_cast<double>(test.size());
    }
    nn::BackboneCheckpoint ck{net, init, ordered_json::object()};
    ck.metadata["classes"] = train.class_names();
    ck.metadata["final_train_loss"] = loss;
    ck.metadata["kk_test_accuracy"] = acc;
    fs::create_directories(c.dir / "backbone");
    nn::write_text_file(c.file("backbone/backbone.ckpt.json").string(), nn::backbone_to_text(ck));
  }

  void stage_score_aux(Ctx& c) {
    const auto aux = load_source(cfg_.aux, cfg_.base_dir);
    const auto net = load_backbone(c);
    const auto kk_train = load_split(c, "d_kk_train");
    const auto kk_test = load_split(c, "d_kk_test");
    const auto uu_test = load_split(c, "d_uu_test");
    if (aux.sample_shape() != kk_train.sample_shape()) throw InvalidArgument("score-aux: auxiliary samples have the wrong shape");
    const auto scored = mining::score_aux(net, aux, {&kk_train, &kk_test, &uu_test});
    fs::create_directories(c.dir / "aux");
    detail::write_scores_csv(scored, c.file("aux/scores.csv"));
  }

  osrnet::CsTrainOptions cs_options(std::uint64_t seed, const std::vector<std::size_t>& widths) const {
    osrnet::CsTrainOptions o;
    o.hidden_widths = widths;
    o.folds = cfg_.cs.folds;
    o.gdx = cfg_.cs.gdx;
    o.seed = seed;
    return o;
  }

  void stage_fit_threshold(Ctx& c) {
    fs::create_directories(c.dir / "threshold");
    ordered_json j;
    j["policy"] = cfg_.threshold.policy;
    if (cfg_.threshold.policy == "fixed") {
      j["T"] = cfg_.threshold.value;
      detail::write_json(c.file("threshold/curve.json"), j);
      return;
    }
    const auto net = load_backbone(c);
    const auto scored = load_scores(c);
    const auto widths =
        cfg_.threshold.sweep_hidden_widths.empty() ? cfg_.cs.hidden_widths : cfg_.threshold.sweep_hidden_widths;
    const auto sweep = mining::sweep_thresholds(net, scored, load_split(c, "d_kk_train"), load_split(c, "d_kk_test"),
                                                load_split(c, "d_uu_test"), cfg_.threshold.candidates,
                                                cs_options(0, widths), derive_seed(c.seed, "sweep"));
    c.warnings.insert(c.warnings.end(), sweep.warnings.begin(), sweep.warnings.end());
    std::string csv = "T,kut_size,mean_entropy,auroc\n";
    std::vector<mining::CurvePoint> points;
    for (const auto& r : sweep.rows) {
      csv += detail::num(r.t) + "," + std::to_string(r.kut_size) + "," + detail::opt_num(r.mean_entropy) + "," +
             detail::opt_num(r.auroc) + "\n";
      // The curve is fitted in percent, the units the AUROC-vs-T table uses.
      if (r.auroc) points.push_back({100.0 * r.t, 100.0 * *r.auroc});
    }
    nn::write_text_file(c.file("threshold/sweep.csv").string(), csv);
    if (points.size() < 4) {
      throw Error("fit-threshold: only " + std::to_string(points.size()) +
                  " candidate thresholds admitted any auxiliary item; the cubic fit needs 4");
    }
    const auto curve = mining::fit_threshold_curve(points);
    j["units"] = "percent";
    j["coefficients"] = {{"a", curve.a}, {"b", curve.b}, {"c", curve.c}, {"d", curve.d}};
    ordered_json pts = ordered_json::array();
    for (const auto& p : curve.points) pts.push_back({p.t, p.auroc});
    j["points"] = std::move(pts);
    j["t_star"] = curve.t_star;
    j["interior"] = curve.interior;
    j["T"] = curve.t_star / 100.0;
    detail::write_json(c.file("threshold/curve.json"), j);
  }

  void stage_mine(Ctx& c) {
    const double T = detail::read_json(c.dir / "threshold" / "curve.json").at("T").get<double>();
    const auto scored = load_scores(c);
    const auto m = mining::mine_kut(scored, T);
    if (m.kut.empty()) throw Error("mine: KUT set empty at T = " + detail::num(T) + "; lower T");
    fs::create_directories(c.dir / "kut");
    c.add_written(data::save_manifest(m.kut, (c.dir / "kut").string(), "kut"), out_);
    std::map<std::string, std::size_t> by_class;
    std::string idx = "source_index\n";
    for (std::size_t i : m.source_index) {
      ++by_class[scored.source.class_names()[scored.source[i].class_id]];
      idx += std::to_string(i) + "\n";
    }
    nn::write_text_file(c.file("kut/source_index.csv").string(), idx);
    ordered_json j;
    j["T"] = T;
    j["kut_size"] = m.kut.size();
    j["mean_entropy"] = *m.mean_entropy;
    j["aux_size"] = scored.source.size();
    j["admitted_per_aux_class"] = by_class;
    detail::write_json(c.file("kut/kut_summary.json"), j);
  }

  void stage_train_cs(Ctx& c) {
    const auto net = load_backbone(c);
    const auto kk_train = load_split(c, "d_kk_train");
    const auto kut = data::load_manifest((c.dir / "kut" / "kut.json").string());
    const auto bank = osrnet::build_feature_bank(net, kk_train, kut);
    const auto parts = osrnet::split_bank(bank, cfg_.delta.holdout_fraction, derive_seed(c.seed, "delta-holdout"));
    const auto trained = osrnet::train_cs(parts.train, cs_options(derive_seed(c.seed, "cs"), cfg_.cs.hidden_widths));

    const auto roc = eval::roc_auroc(trained.cs.score(parts.holdout.features), parts.holdout.int_labels());
    const auto d = osrnet::estimate_delta(roc, cfg_.delta.costs);
    if (!d.warning.empty()) c.warnings.push_back("delta: " + d.warning);

    fs::create_directories(c.dir / "cs");
    osrnet::CsCheckpoint ck{trained.cs, derive_seed(c.seed, "cs"), ordered_json::object()};
    ck.metadata["chosen_hidden"] = trained.chosen_hidden;
    ck.metadata["final_loss"] = trained.final_fit.final_loss;
    ck.metadata["epochs"] = trained.final_fit.epochs;
    nn::write_text_file(c.file("cs/cs.ckpt.json").string(), osrnet::cs_to_text(ck));

    std::string sel = "hidden,mean_auroc,fold_auroc\n";
    for (const auto& cand : trained.candidates) {
      sel += std::to_string(cand.hidden) + "," + (cand.fold_auroc.empty() ? "" : detail::num(cand.mean_auroc)) + "," +
             detail::join(cand.fold_auroc, ';') + "\n";
    }
    nn::write_text_file(c.file("cs/selection.csv").string(), sel);

    ordered_json j;
    j["delta"] = d.delta;
    j["slope"] = d.slope;
    j["operating_point"] = {{"fpr", d.point.fpr}, {"tpr", d.point.tpr}, {"threshold", d.point.threshold}};
    j["holdout_auroc"] = roc.auroc;
    j["holdout_positives"] = roc.positives;
    j["holdout_negatives"] = roc.negatives;
    if (!d.warning.empty()) j["warning"] = d.warning;
    detail::write_json(c.file("cs/delta.json"), j);
  }

  void stage_assemble(Ctx& c) {
    const auto bb = nn::backbone_from_text(nn::read_text_file((c.dir / "backbone" / "backbone.ckpt.json").string()));
    const auto cs = osrnet::cs_from_text(nn::read_text_file((c.dir / "cs" / "cs.ckpt.json").string()));
    const double delta = detail::read_json(c.dir / "cs" / "delta.json").at("delta").get<double>();
    osrnet::OsrNetCheckpoint ck{osrnet::assemble(bb.backbone, cs.cs, delta), c.seed, ordered_json::object()};
    ck.metadata["classes"] = bb.metadata.value("classes", ordered_json::array());
    ck.metadata["cs_hidden"] = cs.cs.hidden_width();
    fs::create_directories(c.dir / "osrnet");
    nn::write_text_file(c.file("osrnet/osrnet.ckpt.json").string(), osrnet::osrnet_to_text(ck));
  }

  void stage_evaluate(Ctx& c) {
    const auto net = osrnet::osrnet_from_text(nn::read_text_file((c.dir / "osrnet" / "osrnet.ckpt.json").string())).net;
    const auto kk_train = load_split(c, "d_kk_train");
    const auto kk_test = load_split(c, "d_kk_test");
    const auto uu_test = load_split(c, "d_uu_test");
    const auto kut = data::load_manifest((c.dir / "kut" / "kut.json").string());
    const auto split_info = detail::read_json(c.dir / "split" / "split.json");
    const auto kut_info = detail::read_json(c.dir / "kut" / "kut_summary.json");
    if (kk_test.empty() || uu_test.empty()) throw Error("evaluate: both test folds must be nonempty");

    const auto inf_kk = osrnet::osrnet_infer(net, kk_test.stacked());
    const auto inf_uu = osrnet::osrnet_infer(net, uu_test.stacked());

    // Unknowns are the positive class for every detector score.
    std::vector<double> s_score, base_score;
    std::vector<int> labels;
    std::size_t hit = 0, changed = 0, kk_accepted = 0, uu_rejected = 0;
    const Tensor plain = net.backbone.probabilities(kk_test.stacked());
    for (std::size_t i = 0; i < inf_kk.verdicts.size(); ++i) {
      const auto& v = inf_kk.verdicts[i];
      s_score.push_back(v.s);
      base_score.push_back(1.0 - v.max_prob);
      labels.push_back(0);
      hit += v.class_id == kk_test[i].class_id;
      kk_accepted += v.known;
      const auto row = plain.row(i);
      changed += static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) != v.class_id;
    }
    for (const auto& v : inf_uu.verdicts) {
      s_score.push_back(v.s);
      base_score.push_back(1.0 - v.max_prob);
      labels.push_back(1);
      uu_rejected += !v.known;
    }
    const auto roc = eval::roc_auroc(s_score, labels);
    const auto base = eval::roc_auroc(base_score, labels);

    eval::Kernel kernel = cfg_.evaluate.mmd_kernel == "linear" ? eval::Kernel::linear()
                                                               : eval::Kernel::rbf(cfg_.evaluate.mmd_bandwidth);
    const auto dist = eval::compare_distribution_distances(net.backbone, kk_train, {{"kut", &kut}, {"uu", &uu_test}}, kernel);
    auto mmd_of = [&](const std::string& name) -> const eval::MmdResult& {
      for (const auto& e : dist) {
        if (e.name == name) return e.mmd;
      }
      throw Error("evaluate: missing distance entry");
    };
    for (const auto& e : dist) {
      if (!e.mmd.warning.empty()) c.warnings.push_back("mmd " + e.name + ": " + e.mmd.warning);
    }

    fs::create_directories(c.dir / "eval");
    std::string roc_csv = "fpr,tpr,threshold\n";
    for (const auto& p : roc.points) roc_csv += detail::num(p.fpr) + "," + detail::num(p.tpr) + "," + detail::num(p.threshold) + "\n";
    nn::write_text_file(c.file("eval/roc.csv").string(), roc_csv);
    osrnet::write_verdicts_csv(inf_kk.verdicts, c.file("eval/verdicts_kk.csv").string());
    osrnet::write_verdicts_csv(inf_uu.verdicts, c.file("eval/verdicts_uu.csv").string());

    const double n_kk = static_cast<double>(kk_test.size());
    ordered_json j;
    j["seed"] = c.seed;
    j["openness"] = split_info.at("openness");
    j["T"] = kut_info.at("T");
    j["kut_size"] = kut_info.at("kut_size");
    j["cs_H"] = net.cs.hidden_width();
    j["delta"] = net.delta;
    j["auroc"] = roc.auroc;
    j["kk_accuracy"] = static_cast<double>(hit) / n_kk;
    j["mean_entropy_kut"] = kut_info.at("mean_entropy");
    j["mmd_kk_kut"] = mmd_of("kut").distance;
    j["mmd_kk_uu"] = mmd_of("uu").distance;
    j["baseline_auroc"] = base.auroc;
    j["argmax_changes"] = changed;
    j["kk_accepted_fraction"] = static_cast<double>(kk_accepted) / n_kk;
    j["uu_rejected_fraction"] = static_cast<double>(uu_rejected) / static_cast<double>(uu_test.size());
    j["mmd_kernel"] = to_string(kernel);
    j["mmd_bandwidth_kut"] = mmd_of("kut").bandwidth;
    j["mmd_bandwidth_uu"] = mmd_of("uu").bandwidth;
    detail::write_json(c.file("eval/eval.json"), j);
  }

  void stage_report(Ctx& c) {
    static const std::vector<std::string> cols{"openness", "T",           "kut_size",         "cs_H",      "delta",
                                               "auroc",    "kk_accuracy", "mean_entropy_kut", "mmd_kk_kut"};
    static const std::vector<std::string> extra{"baseline_auroc", "mmd_kk_uu", "argmax_changes"};
    std::vector<ordered_json> evals;
    for (std::uint64_t s : cfg_.seeds) evals.push_back(detail::read_json(out_ / seed_dir(s) / "eval" / "eval.json"));
    const double n = static_cast<double>(evals.size());

    std::string csv = "seed";
    for (const auto& k : cols) csv += "," + k;
    csv += "\n";
    ordered_json mean = ordered_json::object();
    for (const auto& k : cols) mean[k] = 0.0;
    for (const auto& k : extra) mean[k] = 0.0;
    for (const auto& e : evals) {
      csv += std::to_string(e.at("seed").get<std::uint64_t>());
      for (const auto& k : cols) csv += "," + detail::num(e.at(k).get<double>());
      csv += "\n";
      for (auto& [k, v] : mean.items()) v = v.get<double>() + e.at(k).get<double>();
    }
    for (auto& [k, v] : mean.items()) v = v.get<double>() / n;
    csv += "mean";
    for (const auto& k : cols) csv += "," + detail::num(mean.at(k).get<double>());
    csv += "\n";
    nn::write_text_file(c.file("metrics.csv").string(), csv);

    ordered_json j;
    j["seeds"] = evals;
    j["mean"] = mean;

    std::string summary = "osrlab report over " + std::to_string(evals.size()) + " seed(s)\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %8s %6s %8s %5s %8s %8s %8s %8s\n", "seed", "T", "|KUT|", "delta", "H",
                  "AUROC", "base", "acc", "MMD kut/uu");
    summary += line;
    auto row = [&](const std::string& label, const ordered_json& e) {
      std::snprintf(line, sizeof line, "%-8s %8.4f %6.0f %8.4f %5.0f %8.4f %8.4f %8.4f %.4f/%.4f\n", label.c_str(),
                    e.at("T").get<double>(), e.at("kut_size").get<double>(), e.at("delta").get<double>(),
                    e.at("cs_H").get<double>(), e.at("auroc").get<double>(), e.at("baseline_auroc").get<double>(),
                    e.at("kk_accuracy").get<double>(), e.at("mmd_kk_kut").get<double>(), e.at("mmd_kk_uu").get<double>());
      summary += line;
    };
    for (const auto& e : evals) row(std::to_string(e.at("seed").get<std::uint64_t>()), e);
    row("mean", mean);

    if (cfg_.threshold.policy == "sweep") {
      // Per-T means over seeds; a T that admitted nothing for some seed has no mean AUROC.
      std::vector<std::vector<std::string>> tables;
      for (std::uint64_t s : cfg_.seeds) {
        std::ifstream in(out_ / seed_dir(s) / "threshold" / "sweep.csv");
        std::string l;
        std::getline(in, l);
        std::vector<std::string> rows;
        while (std::getline(in, l)) rows.push_back(l);
        tables.push_back(std::move(rows));
      }
      std::string sw = "T,mean_kut_size,mean_entropy,mean_auroc\n";
      summary += "\nthreshold sweep (mean over seeds)\n";
      for (std::size_t r = 0; r < tables.front().size(); ++r) {
        double t = 0, size = 0, h = 0, a = 0;
        bool have_h = true, have_a = true;
        for (const auto& tab : tables) {
          const auto f = data::detail::split_fields(tab.at(r));
          double v = 0;
          data::parse_double(f[0], t);
          data::parse_double(f[1], v);
          size += v / n;
          if (data::parse_double(f[2], v)) h += v / n; else have_h = false;
          if (data::parse_double(f[3], v)) a += v / n; else have_a = false;
        }
        sw += detail::num(t) + "," + detail::num(size) + "," + (have_h ? detail::num(h) : "") + "," +
              (have_a ? detail::num(a) : "") + "\n";
        std::snprintf(line, sizeof line, "  T %.3f  |KUT| %8.1f  entropy %s  AUROC %s\n", t, size,
                      have_h ? detail::num(h).substr(0, 6).c_str() : "-", have_a ? detail::num(a).substr(0, 6).c_str() : "-");
        summary += line;
      }
      nn::write_text_file(c.file("sweep.csv").string(), sw);
    }
    detail::write_json(c.file("metrics.json"), j);
    nn::write_text_file(c.file("summary.txt").string(), summary);
  }

  PipelineConfig cfg_;
  fs::path out_;
  Logger log_;
  RunManifest manifest_;
};

}  // namespace osrlab::pipeline
