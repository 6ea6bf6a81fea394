#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "osrlab/pipeline/config.hpp"
#include "osrlab/pipeline/pipeline.hpp"

using namespace osrlab;
using namespace osrlab::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("osrlab_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json bundled() {
  return nn::parse_text(slurp(fs::path(OSRLAB_SOURCE_DIR) / "configs" / "synthetic.json"));
}

// The bundled world shrunk to run in about a second.
ordered_json tiny(std::vector<int> seeds = {1, 2}) {
  ordered_json j = bundled();
  j["seeds"] = seeds;
  j["datasets"]["known"]["synthetic"]["count_per_class"] = 60;
  j["datasets"]["aux"]["synthetic"]["count_per_class"] = 60;
  j["backbone"]["sgd"]["epochs"] = 30;
  j["cs"]["hidden_widths"] = {4, 8};
  j["cs"]["folds"] = 2;
  j["cs"]["gdx"]["max_epochs"] = 20;
  j["threshold"]["sweep_hidden_widths"] = {4};
  return j;
}

fs::path write_config(const fs::path& dir, const ordered_json& j) {
  const fs::path p = dir / "config.json";
  nn::write_text_file(p.string(), j.dump(2));
  return p;
}

struct CliResult {
  int code = 0;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(OSRLAB_CLI_PATH) + " " + args + " 2> \"" + err.string() + "\" > /dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::string> config_errors(const ordered_json& j) {
  try {
    (void)parse_config(j, fs::path(OSRLAB_SOURCE_DIR) / "configs");
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Config, BundledParsesAndRoundTrips) {
  const auto c = parse_config(bundled());
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.known.class_names.size(), 10u);
  EXPECT_EQ(c.aux.class_names.size(), 8u);
  const ordered_json once = config_to_json(c);
  const ordered_json twice = config_to_json(parse_config(once));
  EXPECT_EQ(once.dump(), twice.dump());
  EXPECT_EQ(c.threshold.candidates, (std::vector<double>{0.6, 0.7, 0.8, 0.95}));
}

TEST(Config, MissingSeedIsReported) {
  auto j = bundled();
  j.erase("seeds");
  EXPECT_TRUE(any_contains(config_errors(j), "seed required"));
  j = bundled();
  j["datasets"]["aux"]["synthetic"].erase("seed");
  EXPECT_TRUE(any_contains(config_errors(j), "datasets.aux.synthetic.seed: seed required"));
}

TEST(Config, OverlappingAuxClassCitesDisjointness) {
  auto j = bundled();
  j["datasets"]["aux"]["synthetic"]["classes"][0]["name"] = "uu1";
  const auto errors = config_errors(j);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_NE(errors[0].find("disjoint"), std::string::npos) << errors[0];
  EXPECT_NE(errors[0].find("uu1"), std::string::npos);
}

TEST(Config, UnknownKeysAndEveryErrorReportedTogether) {
  auto j = bundled();
  j["backbone"]["epochz"] = 3;
  j["cs"]["folds"] = 1;
  j["split"]["test_fraction"] = 1.5;
  j["threshold"]["candidates"] = {0.6, 0.7};
  j["surprise"] = true;
  const auto errors = config_errors(j);
  EXPECT_EQ(errors.size(), 5u);
  EXPECT_TRUE(any_contains(errors, "backbone.epochz: unknown key"));
  EXPECT_TRUE(any_contains(errors, "surprise: unknown key"));
  EXPECT_TRUE(any_contains(errors, "cs.folds"));
  EXPECT_TRUE(any_contains(errors, "split.test_fraction"));
  EXPECT_TRUE(any_contains(errors, "threshold.candidates"));
}

TEST(Config, TypeAndSplitErrors) {
  auto j = bundled();
  j["seeds"] = "one";
  j["split"]["uu_classes"] = {"kk0", "nope"};
  const auto errors = config_errors(j);
  EXPECT_TRUE(any_contains(errors, "seeds: expected"));
  EXPECT_TRUE(any_contains(errors, "'kk0' listed twice"));
  EXPECT_TRUE(any_contains(errors, "'nope' is not declared"));
}

TEST(Cli, ConfigErrorExitsBeforeAnyWork) {
  const auto dir = temp_dir("cli_config");
  auto j = tiny();
  j.erase("seeds");
  const auto cfg = write_config(dir, j);
  const auto r = cli("pipeline --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed required"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, EvaluateBeforeTrainCsNamesTrainCs) {
  const auto dir = temp_dir("cli_dep");
  const auto cfg = write_config(dir, tiny());
  const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string() + " -q";
  for (const char* stage : {"split", "train-backbone", "score-aux", "fit-threshold", "mine"}) {
    ASSERT_EQ(cli(std::string(stage) + common, dir).code, 0) << stage;
  }
  const auto r = cli("evaluate" + common, dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("'train-cs'"), std::string::npos) << r.err;
  EXPECT_EQ(cli("bogus-stage" + common, dir).code, 2);
}

TEST(Cli, SecondRunIsCacheHit) {
  const auto dir = temp_dir("cli_cache");
  const auto cfg = write_config(dir, tiny({4}));
  const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string();
  ASSERT_EQ(cli("split" + common, dir).code, 0);
  const std::string first = slurp(dir / "out" / "seed-4" / "split" / "d_kk_train.0.csv");
  const auto r = cli("split" + common, dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("seed-4/split: up to date"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("running"), std::string::npos) << r.err;
  EXPECT_EQ(slurp(dir / "out" / "seed-4" / "split" / "d_kk_train.0.csv"), first);
}

TEST(Pipeline, ReportRowsMeanAndOpenness) {
  const auto dir = temp_dir("report");
  Pipeline p(parse_config(tiny({1, 2})), dir / "out");
  p.run_all();
  std::ifstream in(dir / "out" / "metrics.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "seed,openness,T,kut_size,cs_H,delta,auroc,kk_accuracy,mean_entropy_kut,mmd_kk_kut");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    rows.push_back(f);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2][0], "mean");
  for (std::size_t col = 1; col < rows[0].size(); ++col) {
    const double mean = (std::stod(rows[0][col]) + std::stod(rows[1][col])) / 2.0;
    EXPECT_NEAR(std::stod(rows[2][col]), mean, 1e-12) << col;
  }
  EXPECT_NEAR(std::stod(rows[0][1]), 0.2254, 5e-5);
}

TEST(Pipeline, ComposedStagesEqualPipelineAndNoStrayFiles) {
  const auto dir = temp_dir("compose");
  const auto cfg = parse_config(tiny({3}));
  Pipeline whole(cfg, dir / "a");
  whole.run_all();
  Pipeline staged(cfg, dir / "b");
  for (Stage s : kStages) staged.run(s);

  std::set<std::string> listed;
  for (const auto& [key, rec] : staged.manifest().records()) listed.insert(rec.outputs.begin(), rec.outputs.end());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "b")) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir / "b").generic_string();
    if (rel == RunManifest::kFileName) continue;
    ++files;
    EXPECT_TRUE(listed.count(rel)) << "unlisted output " << rel;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "a" / rel)) << rel;
  }
  EXPECT_EQ(files, listed.size());
}

TEST(Pipeline, ThresholdChangeReusesBackbone) {
  const auto dir = temp_dir("reuse");
  auto j = tiny({5});
  Pipeline(parse_config(j), dir / "out").run_all();
  j["threshold"] = {{"policy", "fixed"}, {"value", 0.7}};
  Pipeline p(parse_config(j), dir / "out");
  std::map<Stage, bool> cached;
  for (const auto& r : p.run_all()) cached[r.stage] = r.cached;
  EXPECT_TRUE(cached[Stage::split]);
  EXPECT_TRUE(cached[Stage::train_backbone]);
  EXPECT_TRUE(cached[Stage::score_aux]);
  EXPECT_FALSE(cached[Stage::fit_threshold]);
  EXPECT_FALSE(cached[Stage::mine]);
  EXPECT_FALSE(cached[Stage::report]);
  EXPECT_FALSE(fs::exists(dir / "out" / "seed-5" / "threshold" / "sweep.csv"));
  const auto kut = nn::parse_text(slurp(dir / "out" / "seed-5" / "kut" / "kut_summary.json"));
  EXPECT_EQ(kut.at("T").get<double>(), 0.7);
}

TEST(Pipeline, StaleUpstreamIsADependencyError) {
  const auto dir = temp_dir("stale");
  auto j = tiny({6});
  {
    Pipeline p(parse_config(j), dir / "out");
    p.run(Stage::split);
    p.run(Stage::train_backbone);
  }
  j["backbone"]["fc1_width"] = 12;
  Pipeline p(parse_config(j), dir / "out");
  try {
    p.run(Stage::score_aux);
    FAIL() << "expected a dependency error";
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.missing(), Stage::train_backbone);
  }
}
