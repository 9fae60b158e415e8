// atlas-lab: command-line front end for world generation, fitting, evaluation
// and the three experiment pipelines.
//
// Exit codes: 0 success, 1 runtime failure (including non-converged fits
// unless --allow-nonconverged), 2 usage or configuration error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "atlas/csv.hpp"
#include "atlas/eval.hpp"
#include "atlas/experiments.hpp"
#include "atlas/features.hpp"
#include "atlas/io.hpp"
#include "atlas/partitions.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/recovery.hpp"
#include "atlas/tilt_fit.hpp"

namespace {

using namespace atlas;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool no_timestamp = false;
  bool allow_nonconverged = false;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("--config", a.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed-override", a.seed, "Run a single seed instead of the configured list");
  cmd->add_option("--output-dir", a.output_dir, "Override the configured output directory");
  cmd->add_flag("--no-timestamp", a.no_timestamp, "Omit the generation time so reports are byte-identical");
  cmd->add_flag("--allow-nonconverged", a.allow_nonconverged, "Exit 0 even if some fit did not converge");
}

ExperimentConfig load_experiment(const ExperimentArgs& a) {
  const std::filesystem::path path = a.config;
  ExperimentConfig c = experiment_config_from_json(read_json_file(path), path.parent_path());
  if (a.seed) c.seeds = {*a.seed};
  if (a.output_dir) c.output_dir = *a.output_dir;
  if (a.no_timestamp) c.timestamp = false;
  return c;
}

int finish(bool converged, bool allow, const std::vector<std::filesystem::path>& written) {
  for (const auto& p : written) std::cout << "wrote " << p.string() << '\n';
  if (!converged) {
    std::cerr << "warning: at least one fit did not converge\n";
    if (!allow) return kExitRuntime;
  }
  return 0;
}

CompositionMatrix load_partition(const std::string& kind, const std::string& counts, const std::string& csv_path) {
  const int given = !kind.empty() + !counts.empty() + !csv_path.empty();
  if (given != 1) throw ConfigError("give exactly one of --kind, --counts, --csv");
  if (!kind.empty()) return build_builtin_partition(builtin_partition_from_string(kind));
  if (!counts.empty()) return read_composition_csv(counts, true);
  return read_composition_csv(csv_path, false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atlas-lab: learning group mobility models from regional aggregates"};
  app.require_subcommand(1);

  // world-gen
  auto* world_gen = app.add_subcommand("world-gen", "Generate a synthetic POI world and ground-truth tilts");
  std::string wg_config, wg_out = "world.json";
  std::optional<std::uint64_t> wg_seed;
  world_gen->add_option("--config", wg_config, "World config (JSON object, or an experiment config with a 'world' key)");
  world_gen->add_option("--seed", wg_seed, "Override the world seed");
  world_gen->add_option("-o,--out", wg_out, "Output world document");

  // diagnose-partition
  auto* diag = app.add_subcommand("diagnose-partition", "Singular values, rank and conditioning of a composition");
  std::string dp_kind, dp_counts, dp_csv;
  double dp_tol = kDefaultRankTol;
  diag->add_option("--kind", dp_kind, "demo_groups | full_rank | rank_def | messy");
  diag->add_option("--counts", dp_counts, "CSV of per-region group counts")->check(CLI::ExistingFile);
  diag->add_option("--csv", dp_csv, "CSV of per-region group shares")->check(CLI::ExistingFile);
  diag->add_option("--rank-tol", dp_tol, "Relative singular value cutoff for the rank");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit per-group tilts from regional aggregates");
  std::string f_world, f_kind = "demo_groups", f_counts, f_csv, f_map = "poi_histogram", f_mode = "two_stage",
                       f_source = "exact", f_out = "tilts.json", f_aggregates, f_phase1 = "mle";
  int f_n_per_region = 2000, f_phase1_n = 20000;
  std::uint64_t f_seed = 1;
  bool f_allow = false;
  fit->add_option("--world", f_world, "World document")->required()->check(CLI::ExistingFile);
  fit->add_option("--kind", f_kind, "Built-in partition");
  fit->add_option("--counts", f_counts, "Partition from a counts CSV")->check(CLI::ExistingFile);
  fit->add_option("--csv", f_csv, "Partition from a shares CSV")->check(CLI::ExistingFile);
  fit->add_option("--feature-map", f_map, "poi_histogram | category_histogram | category_transition");
  fit->add_option("--mode", f_mode, "two_stage | direct_l2");
  fit->add_option("--aggregate-source", f_source, "exact | sampled");
  fit->add_option("--aggregates", f_aggregates, "Read regional aggregates from this CSV instead")
      ->check(CLI::ExistingFile);
  fit->add_option("--n-per-region", f_n_per_region, "Trajectories per region for sampled aggregates");
  fit->add_option("--phase1", f_phase1, "Base chain: mle | ground_truth");
  fit->add_option("--phase1-n", f_phase1_n, "Unlabeled trajectories for the base-chain fit");
  fit->add_option("--seed", f_seed, "Sampling seed");
  fit->add_option("-o,--out", f_out, "Output tilt document");
  fit->add_flag("--allow-nonconverged", f_allow, "Exit 0 even if the fit did not converge");

  // eval
  auto* eval = app.add_subcommand("eval", "Compare synthetic trajectories from fitted tilts against the ground truth");
  std::string e_world, e_tilts, e_out;
  int e_n = 2000;
  std::uint64_t e_seed = 1;
  eval->add_option("--world", e_world, "World document")->required()->check(CLI::ExistingFile);
  eval->add_option("--tilts", e_tilts, "Tilt document")->required()->check(CLI::ExistingFile);
  eval->add_option("--n-per-group", e_n, "Trajectories per group on each side");
  eval->add_option("--seed", e_seed, "Sampling seed");
  eval->add_option("-o,--out", e_out, "Write the metric table to this CSV (default: stdout)");

  ExperimentArgs rq1_args, rq2_args, rq3_args;
  auto* rq1 = app.add_subcommand("rq1", "Partition sweep: Baseline / Strong / ATLAS per partition");
  add_experiment_options(rq1, rq1_args);
  auto* rq2 = app.add_subcommand("rq2", "Feature-map sweep on one partition");
  add_experiment_options(rq2, rq2_args);
  auto* rq3 = app.add_subcommand("rq3", "Next-POI prediction trained on Real / ATLAS / Baseline corpora");
  add_experiment_options(rq3, rq3_args);

  // bounds-report
  auto* bounds = app.add_subcommand("bounds-report", "Finite-sample recovery bound for a partition");
  std::string b_kind, b_counts, b_csv;
  int b_m = 0;
  long b_n_min = 0;
  double b_delta = 0.1, b_eps_opt = 0.0, b_b = 1.0;
  bounds->add_option("--kind", b_kind, "Built-in partition");
  bounds->add_option("--counts", b_counts, "Partition from a counts CSV")->check(CLI::ExistingFile);
  bounds->add_option("--csv", b_csv, "Partition from a shares CSV")->check(CLI::ExistingFile);
  bounds->add_option("--m", b_m, "Feature dimension")->required();
  bounds->add_option("--n-min", b_n_min, "Smallest per-region sample count")->required();
  bounds->add_option("--delta", b_delta, "Failure probability");
  bounds->add_option("--eps-opt", b_eps_opt, "Optimization error ||V_theta - V_hat||_F");
  bounds->add_option("--B", b_b, "Feature norm bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*world_gen) {
      WorldConfig c;
      if (!wg_config.empty()) {
        const Json j = read_json_file(wg_config);
        c = world_config_from_json(j.contains("world") ? j.at("world") : j);
      }
      if (wg_seed) c.seed = *wg_seed;
      const World w = build_world(c);
      write_json_file(to_json(w), wg_out);
      std::cout << "wrote " << wg_out << " (V=" << c.n_pois << ", K=" << c.n_groups << ", T=" << c.horizon << ")\n";
      return 0;
    }

    if (*diag) {
      const CompositionMatrix p = load_partition(dp_kind, dp_counts, dp_csv);
      const PartitionDiagnostics d = diagnostics(p, dp_tol);
      Json j = to_json(d);
      j["provenance"] = std::string(to_string(p.provenance()));
      j["G"] = p.n_regions();
      j["K"] = p.n_groups();
      j["full_column_rank"] = d.rank == p.n_groups();
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*fit) {
      const World w = world_from_json(read_json_file(f_world));
      const CompositionMatrix p =
          f_counts.empty() && f_csv.empty() ? load_partition(f_kind, "", "") : load_partition("", f_counts, f_csv);
      const FeatureMap map(feature_map_from_string(f_map), w.catalog);
      map.check_horizon(w.model.horizon());
      if (p.n_groups() != w.model.n_groups()) throw ConfigError("partition and world group counts differ");

      BaseChain base = w.model.base;
      if (f_phase1 == "mle") {
        GroupSamplers gs(w.model);
        Rng rng = make_rng(f_seed, 1);
        std::vector<Trajectory> pool;
        for (int i = 0; i < f_phase1_n; ++i) pool.push_back({gs.sample(i % w.model.n_groups(), rng).tokens, {}, {}});
        base = fit_base_chain(pool, w.model.vocab(), 1e-3);
      } else if (f_phase1 != "ground_truth") {
        throw ConfigError("--phase1 must be 'mle' or 'ground_truth'");
      }

      AggregateMatrix v_hat;
      if (!f_aggregates.empty()) {
        v_hat = read_aggregate_csv(f_aggregates);
      } else if (f_source == "exact") {
        v_hat = exact_regional_aggregates(p, exact_group_means(map, w.model));
      } else if (f_source == "sampled") {
        Rng rng = make_rng(f_seed, 2);
        const std::vector<int> n(p.n_regions(), f_n_per_region);
        v_hat = empirical_regional_aggregates(map, sample_population(w.model, p, n, rng), p.n_regions());
      } else {
        throw ConfigError("--aggregate-source must be 'exact' or 'sampled'");
      }

      AtlasOptions opts;
      opts.mode = fit_mode_from_string(f_mode);
      const AtlasFit r = atlas_fit(base, map, p, v_hat, opts);
      write_json_file(to_json(r.tilts), f_out);
      Json summary = to_json(r.report);
      summary["diagnostics"] = to_json(diagnostics(p));
      std::cout << summary.dump(2) << '\n' << "wrote " << f_out << '\n';
      if (!r.report.converged) {
        std::cerr << "warning: fit did not converge\n";
        if (!f_allow) return kExitRuntime;
      }
      return 0;
    }

    if (*eval) {
      const World w = world_from_json(read_json_file(e_world));
      const TiltParams t = tilts_from_json(read_json_file(e_tilts));
      if (t.n_groups() != w.model.n_groups() || t.base.vocab() != w.model.vocab())
        throw ConfigError("tilts do not match the world");
      std::vector<std::vector<Trajectory>> real(t.n_groups()), synth(t.n_groups());
      const GroupSamplers truth(w.model);
      for (int d = 0; d < t.n_groups(); ++d) {
        Rng rr = make_rng(e_seed, 100 + d);
        Rng rs = make_rng(e_seed, 1000 + d);
        const TrajectorySampler s(t.group_marginals(d));
        for (int i = 0; i < e_n; ++i) {
          real[d].push_back(truth.sample(d, rr));
          synth[d].push_back({s.sample(rs), d, std::nullopt});
        }
      }
      EvalSettings settings;
      settings.grid.bbox = w.config.grid;
      const GroupEvalReport r = evaluate_groups(settings, w.catalog, real, synth);
      if (e_out.empty()) std::cout << group_eval_csv(r);
      else {
        write_group_eval_csv(r, e_out);
        std::cout << "wrote " << e_out << '\n';
      }
      return 0;
    }

    if (*rq1) {
      const ExperimentConfig c = load_experiment(rq1_args);
      const SweepResult r = run_rq1(c);
      return finish(r.all_converged, rq1_args.allow_nonconverged, write_reports(r, c));
    }
    if (*rq2) {
      const ExperimentConfig c = load_experiment(rq2_args);
      const SweepResult r = run_rq2(c);
      return finish(r.all_converged, rq2_args.allow_nonconverged, write_reports(r, c));
    }
    if (*rq3) {
      const ExperimentConfig c = load_experiment(rq3_args);
      const Rq3Result r = run_rq3(c);
      return finish(r.all_converged, rq3_args.allow_nonconverged, write_reports(r, c));
    }

    if (*bounds) {
      const CompositionMatrix p = load_partition(b_kind, b_counts, b_csv);
      const PartitionDiagnostics d = diagnostics(p);
      const BoundReport r = make_bound_report(b_eps_opt, b_b, b_m, p.n_regions(), b_n_min, b_delta, d.sigma_min);
      std::cout << to_json(r).dump(2) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
