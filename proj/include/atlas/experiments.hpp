#pragma once

// End-to-end pipelines: build world -> sample -> aggregate -> recover/fit ->
// evaluate -> report, one independent run per seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atlas/downstream.hpp"
#include "atlas/eval.hpp"
#include "atlas/features.hpp"
#include "atlas/io.hpp"
#include "atlas/partitions.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/tilt_fit.hpp"

namespace atlas {

enum class AggregateSource { Exact, Sampled };
enum class Phase1Source { GroundTruth, Mle };

struct PartitionSpec {
  std::string name;                    // demo_groups | full_rank | rank_def | messy | label for counts
  std::filesystem::path counts_file;   // used when non-empty

  CompositionMatrix resolve() const;
};

struct ExperimentConfig {
  WorldConfig world;
  std::vector<PartitionSpec> partitions{{"demo_groups", {}}};
  std::vector<FeatureMapKind> feature_maps{FeatureMapKind::PoiHistogram};
  int n_per_region = 2000;
  AggregateSource aggregate_source = AggregateSource::Exact;
  std::vector<FitMode> fit_modes{FitMode::TwoStage};
  std::vector<std::uint64_t> seeds{1};
  double delta = 0.1;  // confidence level of the reported sampling bound

  struct Phase1 {
    Phase1Source source = Phase1Source::Mle;
    int n_trajectories = 20000;
    double smoothing_eps = 1e-3;
  } phase1;

  struct Eval {
    int grid_rows = 40;
    int grid_cols = 40;
    std::vector<double> distance_edges_km;  // empty = 20 log-spaced edges, 0.1 .. 1000 km
    int n_per_group = 2000;
  } eval;

  struct Downstream {
    int n_train_per_group = 2000;
    int n_test_per_group = 1000;
    double smoothing_eps = 0.1;
    int k = 10;
    bool oracle_injection = false;  // ATLAS corpus from ground-truth tilts
  } downstream;

  AtlasOptions fit;
  std::filesystem::path output_dir = "atlas_out";
  bool timestamp = true;

  void validate() const;
  EvalSettings eval_settings() const;
};

ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const ExperimentConfig& c);

struct SetupResult {
  std::string setup;              // baseline | strong | atlas_two_stage | atlas_direct_l2 | ...
  GroupEvalReport eval;
  VectorXd exact_poi_jsd;         // per group, model vs truth average occupancy
  double recovery_error = 0.0;    // ||M_theta - M_star||_F in the supervision feature space
  std::optional<FitReport> report;
};

struct ConditionRun {
  std::string condition;          // partition name (rq1) or feature map (rq2)
  PartitionDiagnostics diagnostics;
  double raw_recovery_error = 0.0;   // ||P^+ V_hat - M_star||_F (before projection and fitting)
  std::optional<BoundReport> bound;  // sampled aggregates only
  std::vector<SetupResult> setups;

  const SetupResult& setup(const std::string& name) const;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<ConditionRun> conditions;
};

struct SweepResult {
  std::string experiment;  // rq1 | rq2
  std::vector<SeedRun> seeds;
  bool all_converged = true;
};

struct Rq3SeedRun {
  std::uint64_t seed = 0;
  std::string partition;
  std::vector<std::pair<std::string, DownstreamReport>> setups;  // real, baseline, atlas
  bool converged = true;

  const DownstreamReport& setup(const std::string& name) const;
};

struct Rq3Result {
  std::vector<Rq3SeedRun> seeds;
  bool all_converged = true;
};

SweepResult run_rq1(const ExperimentConfig& config);
SweepResult run_rq2(const ExperimentConfig& config);
Rq3Result run_rq3(const ExperimentConfig& config);

// Report files under config.output_dir; returns the paths written.
std::vector<std::filesystem::path> write_reports(const SweepResult& r, const ExperimentConfig& config);
std::vector<std::filesystem::path> write_reports(const Rq3Result& r, const ExperimentConfig& config);

}  // namespace atlas
