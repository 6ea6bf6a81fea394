// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "osrlab/data/csv.hpp"
#include "osrlab/data/manifest.hpp"
#include "osrlab/data/split.hpp"
#include "osrlab/eval/metrics.hpp"
#include "osrlab/eval/mmd.hpp"
#include "osrlab/mining/kut.hpp"
#include "osrlab/mining/threshold_curve.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/nn/grad_check.hpp"
#include "osrlab/nn/loss.hpp"
#include "osrlab/osrnet/delta.hpp"
#include "osrlab/osrnet/osrnet.hpp"
#include "osrlab/pipeline/config.hpp"
#include "osrlab/pipeline/pipeline.hpp"

using namespace osrlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

Tensor random_targets(Rng& rng, std::size_t batch, std::size_t classes) {
  std::vector<int> labels(batch);
  for (int& l : labels) l = static_cast<int>(rng.below(classes));
  return nn::one_hot(labels, classes);
}

// Zero-initialized biases put a dead input exactly on every later ReLU kink,
// where the function has no derivative to check. Random biases avoid that.
nn::Network randomized(nn::Network net, Rng& rng) {
  for (auto* p : net.parameters()) {
    for (double& v : p->data()) v = 0.5 * rng.normal();
  }
  return net;
}

Outcome gradients() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  std::size_t dense = 0, conv = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t classes = 2 + rng.below(4);
    const std::size_t batch = 2 + rng.below(4);
    nn::GradCheckOptions opt;
    opt.seed = static_cast<std::uint64_t>(i);
    opt.sample_count = 200;
    nn::GradCheckReport r;
    if (i % 2 == 0) {
      const std::size_t in = 2 + rng.below(5);
      std::vector<std::size_t> hidden(1 + rng.below(2));
      for (auto& h : hidden) h = 3 + rng.below(6);
      const std::size_t fc1 = 3 + rng.below(5);
      const auto net = randomized(nn::BackboneNet::mlp(in, hidden, fc1, classes, 100 + i).network(), rng);
      const Tensor x = random_tensor(rng, {batch, in});
      const Tensor t = random_targets(rng, batch, classes);
      r = nn::grad_check(net, x, t, opt);
      ++dense;
    } else {
      const std::size_t ch = 1 + rng.below(2), h = 3 + rng.below(3), w = 3 + rng.below(3);
      const std::size_t filters = 2 + rng.below(3);
      const std::size_t fc1 = 3 + rng.below(4);
      const auto net = randomized(nn::BackboneNet::cnn(ch, h, w, {filters}, fc1, classes, 100 + i).network(), rng);
      const Tensor x = random_tensor(rng, {batch, ch, h, w});
      const Tensor t = random_targets(rng, batch, classes);
      r = nn::grad_check(net, x, t, opt);
      ++conv;
    }
    for (const auto& l : r.layers) worst = std::max(worst, l.max_relative_error);
    if (!r.passed) return {false, "net " + std::to_string(i) + " failed at " + r.failing_layers().front()};
  }
  const double secs = seconds_since(t0);
  const std::string d = std::to_string(dense) + " dense + " + std::to_string(conv) + " conv nets, max rel error " +
                        fmt("%.2e", worst) + ", " + fmt("%.2f s", secs);
  return {worst < 1e-6 && secs < 30.0, d};
}

Outcome auroc_oracle() {
  const auto t0 = Clock::now();
  Rng rng(7);
  std::vector<double> s;
  std::vector<int> l;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    oracle::random_instance(rng, 200, s, l);
    worst = std::max(worst, std::abs(eval::roc_auroc(s, l).auroc - oracle::pairwise_auroc(s, l)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0, "1000 instances, max |diff| " + fmt("%.2e", worst) + ", " + fmt("%.2f s", secs)};
}

Outcome formulas() {
  const double o1 = data::openness(6, 10), o2 = data::openness(4, 54);
  const double h = mining::entropy(std::vector<double>(10, 0.1));
  const double slope = osrnet::optimal_slope(osrnet::Costs{}, 100.0, 100.0);
  // 1 - sqrt(4/54) = 0.727834, so the quoted 0.727819 cannot be met by the
  // formula itself. Check the closed form and the reported 72.78% instead.
  const bool o2_ok = std::abs(o2 - (1.0 - std::sqrt(4.0 / 54.0))) < 1e-15 && std::round(o2 * 1e4) == 7278.0;
  const bool ok = std::abs(o1 - 0.225403) < 5e-7 && o2_ok && std::abs(h - std::log2(10.0)) < 1e-12 && slope == 1.0;
  return {ok, "openness(6,10) " + fmt("%.6f", o1) + ", openness(4,54) " + fmt("%.6f", o2) +
                  " (72.78%; quoted 0.727819 is off the closed form by " + fmt("%.1e", o2 - 0.727819) +
                  "), H(uniform10) " + fmt("%.12f", h) + ", S_op " + fmt("%g", slope)};
}

Outcome cubic_fit() {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-1, 1), c = rng.uniform(-0.05, 0.05),
                 d = rng.uniform(-5e-4, 5e-4);
    std::vector<mining::CurvePoint> pts;
    const std::size_t n = 4 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 40.0 + 7.0 * double(i) + rng.uniform(0, 3);
      pts.push_back({t, a + b * t + c * t * t + d * t * t * t});
    }
    const auto f = mining::fit_threshold_curve(pts);
    worst = std::max({worst, std::abs(f.a - a), std::abs(f.b - b), std::abs(f.c - c), std::abs(f.d - d)});
  }
  const auto grid = mining::fit_threshold_curve({{60, 75.60}, {70, 78.85}, {80, 89.25}, {90, 86.32}});
  const bool ok = worst <= 1e-9 && grid.interior && grid.t_star > 80.0 && grid.t_star < 90.0;
  return {ok, "500 cubics, max coefficient error " + fmt("%.2e", worst) + ", reference grid maximum at T = " +
                  fmt("%.3f", grid.t_star)};
}

Outcome mmd_oracle() {
  Rng rng(5);
  double worst = 0.0, self = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    const Tensor x = oracle::random_matrix(rng, 1 + rng.below(50), d);
    const Tensor y = oracle::random_matrix(rng, 1 + rng.below(50), d, rng.uniform(0, 2));
    const auto r = eval::mmd(x, y);
    worst = std::max(worst, std::abs(r.distance - oracle::brute_mmd(x, y, r.bandwidth)));
    self = std::max(self, eval::mmd(x, x).distance);
  }
  return {worst <= 1e-12 && self <= 1e-9,
          "100 instances, max |diff| " + fmt("%.2e", worst) + ", max mmd(X,X) " + fmt("%.2e", self)};
}

// One full run of the bundled synthetic world.
struct WorldRun {
  fs::path out;
  double seconds = 0.0;
  nn::ordered_json metrics;
  std::vector<std::vector<double>> sweep;  // T, mean_kut_size, mean_entropy, mean_auroc
};

WorldRun run_world(const pipeline::PipelineConfig& cfg, const fs::path& out) {
  fs::remove_all(out);
  WorldRun w;
  w.out = out;
  const auto t0 = Clock::now();
  pipeline::Pipeline(cfg, out).run_all();
  w.seconds = seconds_since(t0);
  w.metrics = nn::parse_text(nn::read_text_file((out / "metrics.json").string()));
  std::ifstream in(out / "sweep.csv");
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<double> v;
    for (auto f : data::detail::split_fields(line)) {
      double x = 0.0;
      if (!data::parse_double(f, x)) throw Error("sweep.csv: bad number in '" + line + "'");
      v.push_back(x);
    }
    w.sweep.push_back(v);
  }
  return w;
}

Outcome non_interference(const WorldRun& w, const std::vector<std::uint64_t>& seeds) {
  std::size_t items = 0, changes = 0;
  for (auto s : seeds) {
    const fs::path dir = w.out / pipeline::seed_dir(s);
    const auto backbone = nn::backbone_from_text(nn::read_text_file((dir / "backbone" / "backbone.ckpt.json").string()));
    const auto net = osrnet::osrnet_from_text(nn::read_text_file((dir / "osrnet" / "osrnet.ckpt.json").string()));
    const auto kk_test = data::load_manifest((dir / "split" / "d_kk_test.json").string());
    const Tensor x = kk_test.stacked();
    const Tensor bare = backbone.backbone.probabilities(x);
    const auto inf = osrnet::osrnet_infer(net.net, x);
    for (std::size_t i = 0; i < kk_test.size(); ++i) {
      const auto row = bare.row(i);
      const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (inf.verdicts[i].class_id != top) ++changes;
    }
    items += kk_test.size();
  }
  return {changes == 0, std::to_string(changes) + " argmax changes over " + std::to_string(items) +
                            " D^T_KK items across " + std::to_string(seeds.size()) + " seeds"};
}

Outcome end_to_end(const WorldRun& w) {
  const auto& mean = w.metrics.at("mean");
  const double auroc = mean.at("auroc").get<double>(), base = mean.at("baseline_auroc").get<double>();
  double worst_seed = 1.0;
  for (const auto& s : w.metrics.at("seeds")) worst_seed = std::min(worst_seed, s.at("auroc").get<double>());

  const std::size_t n = w.sweep.size();
  std::size_t peak = 0, low = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (w.sweep[i][3] > w.sweep[peak][3]) peak = i;
    if (w.sweep[i][2] < w.sweep[low][2]) low = i;
  }
  bool unimodal = n == 4;
  for (std::size_t i = 1; i < n; ++i) {
    unimodal = unimodal && (i <= peak ? w.sweep[i][3] > w.sweep[i - 1][3] : w.sweep[i][3] < w.sweep[i - 1][3]);
  }
  // Not part of the verdict: how many seeds peak at an interior T on their own.
  std::size_t interior = 0, seeds = 0;
  for (const auto& e : fs::directory_iterator(w.out)) {
    const fs::path sweep = e.path() / "threshold" / "sweep.csv";
    if (!fs::exists(sweep)) continue;
    ++seeds;
    std::ifstream in(sweep);
    std::string line;
    std::getline(in, line);
    std::vector<double> au;
    while (std::getline(in, line)) {
      double x = 0.0;
      data::parse_double(data::detail::split_fields(line).back(), x);
      au.push_back(x);
    }
    const auto top = std::max_element(au.begin(), au.end()) - au.begin();
    if (top > 0 && top + 1 < static_cast<std::ptrdiff_t>(au.size())) ++interior;
  }

  const bool a = auroc >= 0.90, b = auroc - base >= 0.03;
  const bool c = unimodal && peak != 0 && (low + 1 >= peak && low <= peak + 1);
  const bool fast = w.seconds < 300.0;

  std::string curve;
  for (const auto& r : w.sweep) {
    curve += (curve.empty() ? "" : " ") + fmt("T=%.2f:", r[0]) + fmt("%.4f", r[3]) + fmt("/H=%.3f", r[2]);
  }
  const std::string d = std::string("(a) ") + (a ? "ok" : "no") + " mean AUROC " + fmt("%.4f", auroc) + " (worst seed " +
                        fmt("%.4f", worst_seed) + "); (b) " + (b ? "ok" : "no") + " baseline " + fmt("%.4f", base) +
                        "; (c) " + (c ? "ok" : "no") + " sweep " + curve + ", peak T=" + fmt("%.2f", w.sweep[peak][0]) +
                        ", min entropy T=" + fmt("%.2f", w.sweep[low][0]) + ", interior peak in " + std::to_string(interior) + "/" +
                        std::to_string(seeds) + " seeds; " + fmt("%.1f s", w.seconds);
  return {a && b && c && fast, d};
}

Outcome distance_order(const WorldRun& w) {
  double worst_margin = 1e9;
  for (const auto& s : w.metrics.at("seeds")) {
    worst_margin = std::min(worst_margin, s.at("mmd_kk_uu").get<double>() - s.at("mmd_kk_kut").get<double>());
  }
  const auto& mean = w.metrics.at("mean");
  const double kut = mean.at("mmd_kk_kut").get<double>(), uu = mean.at("mmd_kk_uu").get<double>();
  return {kut + 0.01 <= uu, "mean MMD(KK,KUT) " + fmt("%.4f", kut) + " vs MMD(KK,UU) " + fmt("%.4f", uu) +
                                 ", smallest per-seed margin " + fmt("%.4f", worst_margin)};
}

Outcome determinism(const WorldRun& first, const WorldRun& second) {
  std::size_t compared = 0, ckpts = 0, csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(first.out)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), first.out);
    if (rel == pipeline::RunManifest::kFileName) continue;  // holds wall times
    const fs::path other = second.out / rel;
    if (!fs::exists(other)) return {false, rel.generic_string() + " missing from the second run"};
    if (nn::read_text_file(e.path().string()) != nn::read_text_file(other.string())) {
      return {false, rel.generic_string() + " differs between runs"};
    }
    ++compared;
    const std::string name = rel.filename().string();
    if (name.ends_with(".ckpt.json")) ++ckpts;
    if (name.ends_with(".csv")) ++csvs;
  }
  return {ckpts > 0 && csvs > 0, std::to_string(compared) + " files byte-identical (" + std::to_string(ckpts) +
                                     " checkpoints, " + std::to_string(csvs) + " CSVs)"};
}

}  // namespace

int main() {
  report(1, "gradient correctness", gradients);
  report(2, "AUROC oracle equivalence", auroc_oracle);
  report(3, "exact formulas", formulas);
  report(4, "cubic-fit recovery", cubic_fit);
  report(5, "MMD oracle equivalence", mmd_oracle);

  const fs::path root = fs::temp_directory_path() / "osrlab_acceptance";
  std::optional<WorldRun> first, second;
  std::vector<std::uint64_t> seeds;
  try {
    const auto cfg = pipeline::load_config((fs::path(OSRLAB_SOURCE_DIR) / "configs" / "synthetic.json").string());
    seeds = cfg.seeds;
    first = run_world(cfg, root / "run-a");
    second = run_world(cfg, root / "run-b");
  } catch (const std::exception& e) {
    std::printf("synthetic world run failed: %s\n", e.what());
  }
  auto need = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!first || !second) return {false, "synthetic world run did not complete"};
      return fn();
    };
  };
  report(6, "non-interference", need([&] { return non_interference(*first, seeds); }));
  report(7, "synthetic end-to-end OSR", need([&] { return end_to_end(*first); }));
  report(8, "distance ordering", need([&] { return distance_order(*first); }));
  report(9, "determinism", need([&] { return determinism(*first, *second); }));
  return failures == 0 ? 0 : 1;
}
