#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "atlas/csv.hpp"
#include "atlas/experiments.hpp"

using namespace atlas;
namespace fs = std::filesystem;

namespace {

Json small_config() {
  return Json::parse(R"({
    "world": {"V": 12, "C": 3, "K": 8, "G": 8, "T": 5},
    "partitions": ["demo_groups", "messy"],
    "feature_map": "poi_histogram",
    "fit_mode": "two_stage",
    "seeds": [1, 2],
    "phase1": {"source": "ground_truth"},
    "eval": {"n_per_group": 200},
    "downstream": {"n_train_per_group": 300, "n_test_per_group": 100},
    "timestamp": false
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("atlas_exp_" + name);
  fs::remove_all(p);
  return p;
}

struct ThreadEnv {
  explicit ThreadEnv(const char* n) { setenv("ATLAS_LAB_THREADS", n, 1); }
  ~ThreadEnv() { unsetenv("ATLAS_LAB_THREADS"); }
};

}  // namespace

TEST_CASE("config parsing: defaults and overrides") {
  const ExperimentConfig c = experiment_config_from_json(small_config(), "/base");
  CHECK(c.world.n_pois == 12);
  CHECK(c.partitions.size() == 2u);
  CHECK(c.partitions[1].name == "messy");
  CHECK(c.fit_modes == std::vector<FitMode>{FitMode::TwoStage});
  CHECK(c.phase1.source == Phase1Source::GroundTruth);
  CHECK(c.phase1.n_trajectories == 20000);
  CHECK(c.eval.n_per_group == 200);
  CHECK_FALSE(c.timestamp);
  CHECK(c.output_dir == fs::path("atlas_out"));  // only explicit paths are config-relative
  const ExperimentConfig again = experiment_config_from_json(to_json(c));
  CHECK(to_json(again) == to_json(c));
}

TEST_CASE("config errors") {
  auto bad = [](const char* key, Json value) {
    Json j = small_config();
    j[key] = std::move(value);
    return j;
  };
  CHECK_THROWS_AS(experiment_config_from_json(bad("seeds", Json::array())), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(bad("fit_mode", "newton")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(bad("feature_map", "trigram")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(bad("aggregate_source", "guess")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(bad("delta", 1.5)), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(bad("n_per_region", "many")), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json::array()), ConfigError);
  Json wrong_k = small_config();
  wrong_k["world"]["K"] = 4;
  wrong_k["world"]["G"] = 4;
  CHECK_THROWS_AS(run_rq1(experiment_config_from_json(wrong_k)), ConfigError);
}

TEST_CASE("rq1 on a small world: identifiable partition matches Strong") {
  ExperimentConfig c = experiment_config_from_json(small_config());
  c.output_dir = scratch("rq1");
  const SweepResult r = run_rq1(c);
  CHECK(r.all_converged);
  REQUIRE(r.seeds.size() == 2u);
  for (const auto& s : r.seeds) {
    REQUIRE(s.conditions.size() == 2u);
    const ConditionRun& demo = s.conditions[0];
    CHECK(demo.raw_recovery_error < 1e-10);
    CHECK(demo.setup("atlas_two_stage").recovery_error < 1e-6);
    CHECK(demo.setup("atlas_two_stage").exact_poi_jsd.maxCoeff() < 1e-8);
    CHECK(demo.setup("baseline").exact_poi_jsd.mean() > demo.setup("atlas_two_stage").exact_poi_jsd.mean());
    CHECK(s.conditions[1].diagnostics.rank == 4);
    CHECK(s.conditions[1].raw_recovery_error > demo.raw_recovery_error);
    CHECK_FALSE(demo.bound.has_value());
  }
  const auto files = write_reports(r, c);
  for (const auto& f : files) CHECK(fs::exists(f));
  const csv::Table summary = csv::read_file(c.output_dir / "rq1_summary.csv");
  CHECK(summary.header.front() == "condition");
  CHECK_FALSE(summary.rows.empty());
  fs::remove_all(c.output_dir);
}

TEST_CASE("reports are deterministic and independent of the worker count") {
  ExperimentConfig c = experiment_config_from_json(small_config());
  c.partitions = {{"rank_def", {}}};
  c.aggregate_source = AggregateSource::Sampled;
  c.n_per_region = 300;
  std::vector<std::string> texts;
  for (const char* threads : {"1", "3"}) {
    ThreadEnv env(threads);
    c.output_dir = scratch("det");
    const SweepResult r = run_rq1(c);
    REQUIRE(r.seeds[0].conditions[0].bound.has_value());
    CHECK(r.seeds[0].conditions[0].bound->n_min > 0);
    write_reports(r, c);
    texts.push_back(slurp(c.output_dir / "rq1_report.json") + slurp(c.output_dir / "rq1_group_metrics.csv"));
    fs::remove_all(c.output_dir);
  }
  CHECK(texts[0] == texts[1]);
  CHECK(texts[0].find("generated_at") == std::string::npos);
}

TEST_CASE("rq2 sweeps feature maps on the first partition") {
  Json j = small_config();
  j["feature_maps"] = {"poi_histogram", "category_histogram"};
  j["partitions"] = {"demo_groups"};
  j["seeds"] = {4};
  const ExperimentConfig c = experiment_config_from_json(j);
  const SweepResult r = run_rq2(c);
  REQUIRE(r.seeds[0].conditions.size() == 2u);
  CHECK(r.seeds[0].conditions[0].condition == "poi_histogram");
  CHECK(r.seeds[0].conditions[1].condition == "category_histogram");
  // Coarser supervision cannot beat exact POI-level supervision on POI occupancy.
  CHECK(r.seeds[0].conditions[1].setup("atlas_two_stage").exact_poi_jsd.mean() >=
        r.seeds[0].conditions[0].setup("atlas_two_stage").exact_poi_jsd.mean());
}

TEST_CASE("rq3 with oracle injection: ATLAS corpus behaves like the real one") {
  Json j = small_config();
  j["partitions"] = {"demo_groups"};
  j["seeds"] = {5};
  j["downstream"]["oracle_injection"] = true;
  j["downstream"]["n_train_per_group"] = 2000;
  ExperimentConfig c = experiment_config_from_json(j);
  c.output_dir = scratch("rq3");
  const Rq3Result r = run_rq3(c);
  REQUIRE(r.seeds.size() == 1u);
  const auto& real = r.seeds[0].setup("real").avg;
  const auto& atlas_setup = r.seeds[0].setup("atlas").avg;
  CHECK(std::abs(real.hr_at_k - atlas_setup.hr_at_k) < 0.03);
  CHECK(std::abs(real.accuracy - atlas_setup.accuracy) < 0.03);
  CHECK_THROWS_AS(r.seeds[0].setup("nothing"), DomainError);
  write_reports(r, c);
  CHECK(fs::exists(c.output_dir / "rq3_downstream.csv"));
  fs::remove_all(c.output_dir);

  c.feature_maps = {FeatureMapKind::CategoryHistogram};
  CHECK_THROWS_AS(run_rq3(c), ConfigError);
}
