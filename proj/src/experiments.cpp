#include "atlas/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "atlas/csv.hpp"
#include "atlas/divergence.hpp"
#include "atlas/parallel.hpp"
#include "atlas/recovery.hpp"

namespace atlas {

namespace {

// RNG stream ids; the world itself uses stream 0.
constexpr std::uint64_t kStreamPhase1 = 1;
constexpr std::uint64_t kStreamAggregates = 2;
constexpr std::uint64_t kStreamRealEval = 100;    // + group
constexpr std::uint64_t kStreamSynthEval = 1000;  // + group, shared by every setup
constexpr std::uint64_t kStreamTrain = 2000;      // + group, shared by every corpus
constexpr std::uint64_t kStreamTest = 3000;       // + group

std::string_view to_string(AggregateSource s) { return s == AggregateSource::Exact ? "exact" : "sampled"; }
std::string_view to_string(Phase1Source s) { return s == Phase1Source::Mle ? "mle" : "ground_truth"; }

AggregateSource aggregate_source_from_string(const std::string& s) {
  if (s == "exact") return AggregateSource::Exact;
  if (s == "sampled") return AggregateSource::Sampled;
  throw ConfigError("aggregate_source must be 'exact' or 'sampled'");
}

Phase1Source phase1_source_from_string(const std::string& s) {
  if (s == "mle") return Phase1Source::Mle;
  if (s == "ground_truth") return Phase1Source::GroundTruth;
  throw ConfigError("phase1.source must be 'mle' or 'ground_truth'");
}

std::string_view to_string(DualMethod m) { return m == DualMethod::Newton ? "newton" : "gradient_descent"; }
std::string_view to_string(DirectMethod m) {
  return m == DirectMethod::GaussNewton ? "gauss_newton" : "gradient_descent";
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string setup_name(FitMode m) { return "atlas_" + std::string(to_string(m)); }

using GroupSets = std::vector<std::vector<Trajectory>>;

// Draws `count` trajectories per group. Stream base + d is reused across
// setups so that differences between setups are not sampling noise.
GroupSets draw_sets(const std::vector<TrajectorySampler>& samplers, std::uint64_t seed, std::uint64_t stream_base,
                    int count) {
  GroupSets out(samplers.size());
  for (std::size_t d = 0; d < samplers.size(); ++d) {
    Rng rng = make_rng(seed, stream_base + d);
    out[d].reserve(count);
    for (int i = 0; i < count; ++i) out[d].push_back({samplers[d].sample(rng), static_cast<int>(d), std::nullopt});
  }
  return out;
}

std::vector<TrajectorySampler> samplers_for(const TiltParams& t) {
  std::vector<TrajectorySampler> s;
  for (int d = 0; d < t.n_groups(); ++d) s.emplace_back(t.group_marginals(d));
  return s;
}

std::vector<TrajectorySampler> samplers_for(const GroundTruthModel& m) {
  std::vector<TrajectorySampler> s;
  for (int d = 0; d < m.n_groups(); ++d) s.emplace_back(m.group_marginals(d));
  return s;
}

MatrixXd model_means(const TiltParams& t) {
  MatrixXd m(t.n_groups(), t.map.dim());
  for (int d = 0; d < t.n_groups(); ++d) m.row(d) = t.map.expected(t.group_marginals(d)).transpose();
  return m;
}

// Shared state of one seed: the world, its phase-1 base and the real evaluation sets.
struct SeedContext {
  std::uint64_t seed;
  World world;
  BaseChain base;
  FeatureMap poi_map;
  MatrixXd true_poi_means;  // K x V
  GroupSets real_eval;

  SeedContext(const ExperimentConfig& cfg, std::uint64_t s)
      : seed(s), world(make_world(cfg, s)), poi_map(FeatureMapKind::PoiHistogram, world.catalog) {
    const auto& model = world.model;
    const int k = model.n_groups();
    if (cfg.phase1.source == Phase1Source::GroundTruth) {
      base = model.base;
    } else {
      // Unlabeled pool with equal group shares; labels are dropped before fitting.
      GroupSamplers gs(model);
      Rng rng = make_rng(seed, kStreamPhase1);
      std::vector<Trajectory> pool;
      pool.reserve(cfg.phase1.n_trajectories);
      for (int i = 0; i < cfg.phase1.n_trajectories; ++i) pool.push_back({gs.sample(i % k, rng).tokens, {}, {}});
      base = fit_base_chain(pool, model.vocab(), cfg.phase1.smoothing_eps);
    }
    true_poi_means = exact_group_means(poi_map, model).values;
    real_eval = draw_sets(samplers_for(model), seed, kStreamRealEval, cfg.eval.n_per_group);
  }

  static World make_world(const ExperimentConfig& cfg, std::uint64_t s) {
    WorldConfig wc = cfg.world;
    wc.seed = s;
    return build_world(wc);
  }
};

SetupResult evaluate_setup(const ExperimentConfig& cfg, const SeedContext& ctx, std::string name,
                           const TiltParams& tilts, const MatrixXd& true_means) {
  SetupResult r;
  r.setup = std::move(name);
  const GroupSets synth = draw_sets(samplers_for(tilts), ctx.seed, kStreamSynthEval, cfg.eval.n_per_group);
  r.eval = evaluate_groups(cfg.eval_settings(), ctx.world.catalog, ctx.real_eval, synth);
  const int k = tilts.n_groups();
  r.exact_poi_jsd.resize(k);
  for (int d = 0; d < k; ++d) {
    const VectorXd mu = ctx.poi_map.expected(tilts.group_marginals(d));
    r.exact_poi_jsd(d) = js_divergence(mu, ctx.true_poi_means.row(d).transpose());
  }
  r.recovery_error = (model_means(tilts) - true_means).norm();
  return r;
}

// Strong reference: dual fit on each group's exact POI histogram mean.
std::pair<TiltParams, FitReport> strong_fit(const ExperimentConfig& cfg, const SeedContext& ctx) {
  const int k = ctx.world.model.n_groups();
  TiltParams t{ctx.base, ctx.poi_map, {}, FitMethod::Dual};
  FitReport agg;
  agg.converged = true;
  for (int d = 0; d < k; ++d) {
    DualResult r = fit_tilt_dual(ctx.base, ctx.poi_map, ctx.true_poi_means.row(d).transpose(), cfg.fit.dual);
    t.params.push_back(std::move(r.eta));
    agg.converged = agg.converged && r.report.converged;
    agg.iterations = std::max(agg.iterations, r.report.iterations);
    agg.grad_norm = std::max(agg.grad_norm, r.report.grad_norm);
    agg.target_clipped = agg.target_clipped || r.report.target_clipped;
  }
  return {std::move(t), agg};
}

AggregateMatrix make_aggregates(const ExperimentConfig& cfg, const SeedContext& ctx, const FeatureMap& map,
                                const CompositionMatrix& p, const AggregateMatrix& true_means) {
  if (cfg.aggregate_source == AggregateSource::Exact) return exact_regional_aggregates(p, true_means);
  Rng rng = make_rng(ctx.seed, kStreamAggregates);
  const std::vector<int> n(p.n_regions(), cfg.n_per_region);
  const auto pop = sample_population(ctx.world.model, p, n, rng);
  return empirical_regional_aggregates(map, pop, p.n_regions());
}

// One (partition, feature map) condition: ATLAS fits in every configured mode,
// plus the baseline and strong references.
ConditionRun run_condition(const ExperimentConfig& cfg, const SeedContext& ctx, std::string label,
                           const CompositionMatrix& p, FeatureMapKind kind, bool& converged) {
  const int k = ctx.world.model.n_groups();
  if (p.n_groups() != k)
    throw ConfigError("partition '" + label + "' has " + std::to_string(p.n_groups()) + " groups but the world has " +
                      std::to_string(k));
  const FeatureMap map(kind, ctx.world.catalog);
  map.check_horizon(ctx.world.model.horizon());
  const AggregateMatrix true_means = exact_group_means(map, ctx.world.model);
  const AggregateMatrix v_hat = make_aggregates(cfg, ctx, map, p, true_means);

  ConditionRun run;
  run.condition = std::move(label);
  run.diagnostics = diagnostics(p);
  run.raw_recovery_error = (recover_group_means(p, v_hat.values, cfg.fit.rcond).m_hat - true_means.values).norm();

  const TiltParams baseline = TiltParams::baseline(ctx.base, ctx.poi_map, k);
  run.setups.push_back(evaluate_setup(cfg, ctx, "baseline", baseline, ctx.true_poi_means));

  auto [strong, strong_report] = strong_fit(cfg, ctx);
  converged = converged && strong_report.converged;
  SetupResult s = evaluate_setup(cfg, ctx, "strong", strong, ctx.true_poi_means);
  s.report = strong_report;
  run.setups.push_back(std::move(s));

  for (FitMode mode : cfg.fit_modes) {
    AtlasOptions opts = cfg.fit;
    opts.mode = mode;
    AtlasFit fit = atlas_fit(ctx.base, map, p, v_hat, opts);
    converged = converged && fit.report.converged;
    SetupResult a = evaluate_setup(cfg, ctx, setup_name(mode), fit.tilts, true_means.values);
    a.report = fit.report;
    if (cfg.aggregate_source == AggregateSource::Sampled && !run.bound) {
      run.bound = make_bound_report(fit.report.eps_opt, 1.0, map.dim(), p.n_regions(), v_hat.min_count(), cfg.delta,
                                    run.diagnostics.sigma_min);
    }
    run.setups.push_back(std::move(a));
  }
  return run;
}

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double population_std(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

Json report_header(const ExperimentConfig& cfg, const std::string& experiment) {
  Json j = {{"experiment", experiment}, {"config", to_json(cfg)}};
  if (cfg.timestamp) j["generated_at"] = utc_timestamp();
  return j;
}

Json eval_json(const GroupEvalReport& r) {
  Json j = Json::object();
  for (int m = 0; m < 4; ++m) {
    j[kEvalMetricNames[m]] = {{"per_group", to_json(VectorXd(r.per_group.col(m)))}, {"avg", r.avg(m)}, {"std", r.std(m)}};
  }
  return j;
}

Json metrics_json(const DownstreamMetrics& m) {
  return {{"accuracy", m.accuracy}, {"hr_at_k", m.hr_at_k}, {"ndcg_at_k", m.ndcg_at_k},
          {"geo_error_km", m.geo_error_km}, {"events", m.events}};
}

}  // namespace

CompositionMatrix PartitionSpec::resolve() const {
  if (!counts_file.empty()) return read_composition_csv(counts_file, true);
  return build_builtin_partition(builtin_partition_from_string(name));
}

void ExperimentConfig::validate() const {
  world.validate();
  if (partitions.empty()) throw ConfigError("at least one partition is required");
  if (feature_maps.empty()) throw ConfigError("at least one feature map is required");
  if (fit_modes.empty()) throw ConfigError("at least one fit mode is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (n_per_region < 1) throw ConfigError("n_per_region must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
  if (phase1.n_trajectories < 1) throw ConfigError("phase1.n_trajectories must be >= 1");
  if (!(phase1.smoothing_eps >= 0.0)) throw ConfigError("phase1.smoothing_eps must be >= 0");
  if (eval.n_per_group < 1) throw ConfigError("eval.n_per_group must be >= 1");
  if (downstream.n_train_per_group < 1 || downstream.n_test_per_group < 1)
    throw ConfigError("downstream corpus sizes must be >= 1");
  if (downstream.k < 1) throw ConfigError("downstream.k must be >= 1");
  if (!(fit.rcond > 0.0)) throw ConfigError("fit.rcond must be > 0");
  if (!(fit.dual.tol > 0.0) || fit.dual.max_iterations < 1) throw ConfigError("invalid dual options");
  eval_settings();
}

EvalSettings ExperimentConfig::eval_settings() const {
  EvalSettings s;
  s.grid = EvalGrid{world.grid, eval.grid_rows, eval.grid_cols};
  s.grid.validate();
  if (!eval.distance_edges_km.empty()) s.bins = DistanceBins{eval.distance_edges_km};
  s.bins.validate();
  return s;
}

ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be an object");
  ExperimentConfig c;
  try {
    if (j.contains("world")) c.world = world_config_from_json(j.at("world"));

    auto partition_from = [&](const Json& p) {
      if (p.is_string()) return PartitionSpec{p.get<std::string>(), {}};
      PartitionSpec s{get_or<std::string>(p, "name", "from_counts"), {}};
      if (p.contains("counts_file")) {
        std::filesystem::path f = p.at("counts_file").get<std::string>();
        s.counts_file = f.is_relative() && !base_dir.empty() ? base_dir / f : f;
      }
      return s;
    };
    if (j.contains("partitions")) {
      c.partitions.clear();
      for (const auto& p : j.at("partitions")) c.partitions.push_back(partition_from(p));
    } else if (j.contains("partition")) {
      c.partitions = {partition_from(j.at("partition"))};
    }

    if (j.contains("feature_maps")) {
      c.feature_maps.clear();
      for (const auto& f : j.at("feature_maps")) c.feature_maps.push_back(feature_map_from_string(f.get<std::string>()));
    } else if (j.contains("feature_map")) {
      c.feature_maps = {feature_map_from_string(j.at("feature_map").get<std::string>())};
    }

    if (j.contains("fit_modes")) {
      c.fit_modes.clear();
      for (const auto& f : j.at("fit_modes")) c.fit_modes.push_back(fit_mode_from_string(f.get<std::string>()));
    } else if (j.contains("fit_mode")) {
      c.fit_modes = {fit_mode_from_string(j.at("fit_mode").get<std::string>())};
    }

    c.n_per_region = get_or(j, "n_per_region", c.n_per_region);
    if (j.contains("aggregate_source"))
      c.aggregate_source = aggregate_source_from_string(j.at("aggregate_source").get<std::string>());
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.delta = get_or(j, "delta", c.delta);

    if (j.contains("phase1")) {
      const auto& p = j.at("phase1");
      if (p.contains("source")) c.phase1.source = phase1_source_from_string(p.at("source").get<std::string>());
      c.phase1.n_trajectories = get_or(p, "n_trajectories", c.phase1.n_trajectories);
      c.phase1.smoothing_eps = get_or(p, "smoothing_eps", c.phase1.smoothing_eps);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      c.eval.grid_rows = get_or(e, "grid_rows", c.eval.grid_rows);
      c.eval.grid_cols = get_or(e, "grid_cols", c.eval.grid_cols);
      c.eval.distance_edges_km = get_or(e, "distance_edges_km", c.eval.distance_edges_km);
      c.eval.n_per_group = get_or(e, "n_per_group", c.eval.n_per_group);
    }
    if (j.contains("downstream")) {
      const auto& d = j.at("downstream");
      c.downstream.n_train_per_group = get_or(d, "n_train_per_group", c.downstream.n_train_per_group);
      c.downstream.n_test_per_group = get_or(d, "n_test_per_group", c.downstream.n_test_per_group);
      c.downstream.smoothing_eps = get_or(d, "smoothing_eps", c.downstream.smoothing_eps);
      c.downstream.k = get_or(d, "k", c.downstream.k);
      c.downstream.oracle_injection = get_or(d, "oracle_injection", c.downstream.oracle_injection);
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      c.fit.rcond = get_or(f, "rcond", c.fit.rcond);
      c.fit.dual.tol = get_or(f, "tol", c.fit.dual.tol);
      c.fit.dual.max_iterations = get_or(f, "max_iterations", c.fit.dual.max_iterations);
      c.fit.dual.armijo_c = get_or(f, "armijo_c", c.fit.dual.armijo_c);
      c.fit.dual.shrink = get_or(f, "shrink", c.fit.dual.shrink);
      c.fit.dual.initial_step = get_or(f, "initial_step", c.fit.dual.initial_step);
      c.fit.dual.clip_floor = get_or(f, "clip_floor", c.fit.dual.clip_floor);
      if (f.contains("dual_method")) {
        const auto m = f.at("dual_method").get<std::string>();
        if (m == "newton") c.fit.dual.method = DualMethod::Newton;
        else if (m == "gradient_descent") c.fit.dual.method = DualMethod::GradientDescent;
        else throw ConfigError("fit.dual_method must be 'newton' or 'gradient_descent'");
      }
      if (f.contains("direct_method")) {
        const auto m = f.at("direct_method").get<std::string>();
        if (m == "gauss_newton") c.fit.direct_method = DirectMethod::GaussNewton;
        else if (m == "gradient_descent") c.fit.direct_method = DirectMethod::GradientDescent;
        else throw ConfigError("fit.direct_method must be 'gauss_newton' or 'gradient_descent'");
      }
      c.fit.direct_max_iterations = get_or(f, "direct_max_iterations", c.fit.direct_max_iterations);
      c.fit.direct_tol = get_or(f, "direct_tol", c.fit.direct_tol);
    }
    if (j.contains("output_dir")) {
      std::filesystem::path o = j.at("output_dir").get<std::string>();
      c.output_dir = (o.is_relative() && !base_dir.empty() ? base_dir / o : o).lexically_normal();
    }
    c.timestamp = get_or(j, "timestamp", c.timestamp);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json parts = Json::array();
  for (const auto& p : c.partitions) {
    if (p.counts_file.empty()) parts.push_back(p.name);
    else parts.push_back({{"name", p.name}, {"counts_file", p.counts_file.string()}});
  }
  Json maps = Json::array();
  for (auto k : c.feature_maps) maps.push_back(std::string(to_string(k)));
  Json modes = Json::array();
  for (auto m : c.fit_modes) modes.push_back(std::string(to_string(m)));
  return {{"world", to_json(c.world)},
          {"partitions", parts},
          {"feature_maps", maps},
          {"fit_modes", modes},
          {"n_per_region", c.n_per_region},
          {"aggregate_source", std::string(to_string(c.aggregate_source))},
          {"seeds", c.seeds},
          {"delta", c.delta},
          {"phase1",
           {{"source", std::string(to_string(c.phase1.source))},
            {"n_trajectories", c.phase1.n_trajectories},
            {"smoothing_eps", c.phase1.smoothing_eps}}},
          {"eval",
           {{"grid_rows", c.eval.grid_rows},
            {"grid_cols", c.eval.grid_cols},
            {"distance_edges_km", c.eval_settings().bins.edges},
            {"n_per_group", c.eval.n_per_group}}},
          {"downstream",
           {{"n_train_per_group", c.downstream.n_train_per_group},
            {"n_test_per_group", c.downstream.n_test_per_group},
            {"smoothing_eps", c.downstream.smoothing_eps},
            {"k", c.downstream.k},
            {"oracle_injection", c.downstream.oracle_injection}}},
          {"fit",
           {{"rcond", c.fit.rcond},
            {"tol", c.fit.dual.tol},
            {"max_iterations", c.fit.dual.max_iterations},
            {"armijo_c", c.fit.dual.armijo_c},
            {"shrink", c.fit.dual.shrink},
            {"initial_step", c.fit.dual.initial_step},
            {"clip_floor", c.fit.dual.clip_floor},
            {"dual_method", std::string(to_string(c.fit.dual.method))},
            {"direct_method", std::string(to_string(c.fit.direct_method))},
            {"direct_max_iterations", c.fit.direct_max_iterations},
            {"direct_tol", c.fit.direct_tol}}},
          {"output_dir", c.output_dir.string()},
          {"timestamp", c.timestamp}};
}

const SetupResult& ConditionRun::setup(const std::string& name) const {
  for (const auto& s : setups)
    if (s.setup == name) return s;
  throw DomainError("no setup '" + name + "' in condition '" + condition + "'");
}

const DownstreamReport& Rq3SeedRun::setup(const std::string& name) const {
  for (const auto& [n, r] : setups)
    if (n == name) return r;
  throw DomainError("no setup '" + name + "'");
}

SweepResult run_rq1(const ExperimentConfig& config) {
  config.validate();
  std::vector<CompositionMatrix> parts;
  for (const auto& p : config.partitions) parts.push_back(p.resolve());
  const FeatureMapKind kind = config.feature_maps.front();
  std::vector<char> ok(config.seeds.size(), 1);
  SweepResult out;
  out.experiment = "rq1";
  out.seeds = parallel_map<SeedRun>(static_cast<int>(config.seeds.size()), [&](int i) {
    SeedContext ctx(config, config.seeds[i]);
    SeedRun run{ctx.seed, {}};
    bool conv = true;
    for (std::size_t p = 0; p < parts.size(); ++p)
      run.conditions.push_back(run_condition(config, ctx, config.partitions[p].name, parts[p], kind, conv));
    ok[i] = conv;
    return run;
  });
  for (char c : ok) out.all_converged = out.all_converged && c;
  return out;
}

SweepResult run_rq2(const ExperimentConfig& config) {
  config.validate();
  const CompositionMatrix p = config.partitions.front().resolve();
  std::vector<char> ok(config.seeds.size(), 1);
  SweepResult out;
  out.experiment = "rq2";
  out.seeds = parallel_map<SeedRun>(static_cast<int>(config.seeds.size()), [&](int i) {
    SeedContext ctx(config, config.seeds[i]);
    SeedRun run{ctx.seed, {}};
    bool conv = true;
    for (FeatureMapKind k : config.feature_maps)
      run.conditions.push_back(run_condition(config, ctx, std::string(to_string(k)), p, k, conv));
    ok[i] = conv;
    return run;
  });
  for (char c : ok) out.all_converged = out.all_converged && c;
  return out;
}

Rq3Result run_rq3(const ExperimentConfig& config) {
  config.validate();
  const CompositionMatrix p = config.partitions.front().resolve();
  const FeatureMapKind kind = config.feature_maps.front();
  const auto& ds = config.downstream;
  Rq3Result out;
  out.seeds = parallel_map<Rq3SeedRun>(static_cast<int>(config.seeds.size()), [&](int i) {
    const std::uint64_t seed = config.seeds[i];
    // Phase 1 and the aggregates mirror the rq1 pipeline; eval sets are not needed here.
    ExperimentConfig no_eval = config;
    no_eval.eval.n_per_group = 1;
    const SeedContext ctx(no_eval, seed);
    const World& world = ctx.world;
    const auto& model = world.model;
    const int k = model.n_groups();
    if (p.n_groups() != k) throw ConfigError("partition group count differs from the world's");

    Rq3SeedRun run;
    run.seed = seed;
    run.partition = config.partitions.front().name;

    const FeatureMap map(kind, world.catalog);
    const AggregateMatrix true_means = exact_group_means(map, model);
    const AggregateMatrix v_hat = make_aggregates(config, ctx, map, p, true_means);

    TiltParams atlas = TiltParams::baseline(ctx.base, map, k);
    if (ds.oracle_injection) {
      if (model.target != TiltTarget::Unigram || kind != FeatureMapKind::PoiHistogram)
        throw ConfigError("oracle injection needs a unigram world and the poi_histogram feature map");
      atlas = TiltParams{model.base, map, model.tilts, FitMethod::GroundTruth};
    } else {
      AtlasOptions opts = config.fit;
      opts.mode = config.fit_modes.front();
      AtlasFit fit = atlas_fit(ctx.base, map, p, v_hat, opts);
      run.converged = fit.report.converged;
      atlas = std::move(fit.tilts);
    }
    const TiltParams baseline = TiltParams::baseline(ctx.base, ctx.poi_map, k);

    const GroupSets test = draw_sets(samplers_for(model), seed, kStreamTest, ds.n_test_per_group);
    auto score = [&](const GroupSets& train) {
      std::vector<DownstreamMetrics> per_group;
      for (int d = 0; d < k; ++d) {
        const NextPoiModel m = train_next_poi(train[d], model.vocab(), ds.smoothing_eps, d);
        per_group.push_back(evaluate_next_poi(m, world.catalog, test[d], ds.k));
      }
      return summarize(std::move(per_group));
    };
    run.setups.emplace_back("real", score(draw_sets(samplers_for(model), seed, kStreamTrain, ds.n_train_per_group)));
    run.setups.emplace_back("baseline",
                            score(draw_sets(samplers_for(baseline), seed, kStreamTrain, ds.n_train_per_group)));
    run.setups.emplace_back("atlas", score(draw_sets(samplers_for(atlas), seed, kStreamTrain, ds.n_train_per_group)));
    return run;
  });
  for (const auto& s : out.seeds) out.all_converged = out.all_converged && s.converged;
  return out;
}

std::vector<std::filesystem::path> write_reports(const SweepResult& r, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  const std::string& ex = r.experiment;
  std::vector<std::filesystem::path> written;
  const int k = cfg.world.n_groups;
  const auto labels = group_labels(k);
  using csv::format_double;

  // Per-seed, per-group metric table.
  {
    std::vector<std::string> header{"seed", "condition", "setup", "metric"};
    header.insert(header.end(), labels.begin(), labels.end());
    header.push_back("Avg");
    header.push_back("Std");
    std::string text = join(header) + '\n';
    for (const auto& s : r.seeds)
      for (const auto& c : s.conditions)
        for (const auto& su : c.setups)
          for (int m = 0; m < 4; ++m) {
            std::vector<std::string> row{std::to_string(s.seed), c.condition, su.setup, kEvalMetricNames[m]};
            for (int d = 0; d < k; ++d) row.push_back(format_double(su.eval.per_group(d, m)));
            row.push_back(format_double(su.eval.avg(m)));
            row.push_back(format_double(su.eval.std(m)));
            text += join(row) + '\n';
          }
    written.push_back(cfg.output_dir / (ex + "_group_metrics.csv"));
    write_text(written.back(), text);
  }

  // Seed-averaged summary with gap closed for every ATLAS setup.
  Json conditions = Json::array();
  {
    std::string text = "condition,setup,metric,mean,std_over_seeds,gap_closed\n";
    const auto& first = r.seeds.front();
    for (std::size_t ci = 0; ci < first.conditions.size(); ++ci) {
      Json cj = {{"condition", first.conditions[ci].condition}};
      for (const auto& su0 : first.conditions[ci].setups) {
        Json sj = Json::object();
        for (int m = 0; m < 4; ++m) {
          auto collect = [&](const std::string& setup) {
            std::vector<double> v;
            for (const auto& s : r.seeds) v.push_back(s.conditions[ci].setup(setup).eval.avg(m));
            return v;
          };
          const auto vals = collect(su0.setup);
          std::string gap;
          std::optional<double> g;
          if (su0.setup.rfind("atlas_", 0) == 0) {
            g = gap_closed(mean(collect("baseline")), mean(collect("strong")), mean(vals));
            if (g) gap = format_double(*g);
          }
          text += join({first.conditions[ci].condition, su0.setup, kEvalMetricNames[m], format_double(mean(vals)),
                        format_double(population_std(vals)), gap}) +
                  '\n';
          sj[kEvalMetricNames[m]] = {{"mean", mean(vals)}, {"std_over_seeds", population_std(vals)}};
          if (g) sj[kEvalMetricNames[m]]["gap_closed"] = *g;
        }
        std::vector<double> exact;
        for (const auto& s : r.seeds) exact.push_back(s.conditions[ci].setup(su0.setup).exact_poi_jsd.mean());
        sj["exact_poi_jsd_mean"] = mean(exact);
        cj["setups"][su0.setup] = sj;
      }
      conditions.push_back(cj);
    }
    written.push_back(cfg.output_dir / (ex + "_summary.csv"));
    write_text(written.back(), text);
  }

  // Recovery diagnostics per seed and condition.
  {
    std::string text = "seed,condition,setup,sigma_min,rank,condition_number,raw_recovery_error,model_recovery_error,eps_opt,converged,iterations,total_bound\n";
    for (const auto& s : r.seeds)
      for (const auto& c : s.conditions)
        for (const auto& su : c.setups) {
          if (!su.report) continue;
          const bool atlas = su.setup.rfind("atlas_", 0) == 0;
          text += join({std::to_string(s.seed), c.condition, su.setup, format_double(c.diagnostics.sigma_min),
                        std::to_string(c.diagnostics.rank), format_double(c.diagnostics.condition_number),
                        format_double(c.raw_recovery_error), format_double(su.recovery_error),
                        atlas ? format_double(su.report->eps_opt) : "", su.report->converged ? "true" : "false",
                        std::to_string(su.report->iterations),
                        atlas && c.bound ? format_double(c.bound->total_bound) : ""}) +
                  '\n';
        }
    written.push_back(cfg.output_dir / (ex + "_recovery.csv"));
    write_text(written.back(), text);
  }

  Json j = report_header(cfg, ex);
  j["all_converged"] = r.all_converged;
  j["summary"] = conditions;
  Json seeds = Json::array();
  for (const auto& s : r.seeds) {
    Json sj = {{"seed", s.seed}};
    for (const auto& c : s.conditions) {
      Json cj = {{"condition", c.condition},
                 {"diagnostics", to_json(c.diagnostics)},
                 {"raw_recovery_error", c.raw_recovery_error}};
      if (c.bound) cj["bound"] = to_json(*c.bound);
      for (const auto& su : c.setups) {
        Json x = {{"eval", eval_json(su.eval)},
                  {"exact_poi_jsd", to_json(su.exact_poi_jsd)},
                  {"model_recovery_error", su.recovery_error}};
        if (su.report) x["fit"] = to_json(*su.report);
        cj["setups"][su.setup] = x;
      }
      sj["conditions"].push_back(cj);
    }
    seeds.push_back(sj);
  }
  j["seeds"] = seeds;
  written.push_back(cfg.output_dir / (ex + "_report.json"));
  write_json_file(j, written.back());
  return written;
}

std::vector<std::filesystem::path> write_reports(const Rq3Result& r, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::filesystem::path> written;
  const int k = cfg.world.n_groups;
  const auto labels = group_labels(k);
  using csv::format_double;
  static const std::vector<std::string> kSetups{"real", "atlas", "baseline"};
  static const std::vector<std::string> kMetrics{"accuracy", "hr_at_k", "ndcg_at_k", "geo_error_km"};
  auto pick = [](const DownstreamMetrics& m, std::size_t i) {
    return i == 0 ? m.accuracy : i == 1 ? m.hr_at_k : i == 2 ? m.ndcg_at_k : m.geo_error_km;
  };

  // Seed-averaged table: one row per (metric, setup), one column per group.
  std::string text = "metric,setup";
  for (const auto& l : labels) text += "," + l;
  text += ",Avg\n";
  const double n = static_cast<double>(r.seeds.size());
  for (std::size_t mi = 0; mi < kMetrics.size(); ++mi)
    for (const auto& setup : kSetups) {
      std::vector<std::string> row{kMetrics[mi], setup};
      for (int d = 0; d < k; ++d) {
        double s = 0.0;
        for (const auto& sr : r.seeds) s += pick(sr.setup(setup).per_group[d], mi);
        row.push_back(format_double(s / n));
      }
      double s = 0.0;
      for (const auto& sr : r.seeds) s += pick(sr.setup(setup).avg, mi);
      row.push_back(format_double(s / n));
      text += join(row) + '\n';
    }
  written.push_back(cfg.output_dir / "rq3_downstream.csv");
  write_text(written.back(), text);

  Json j = report_header(cfg, "rq3");
  j["all_converged"] = r.all_converged;
  Json seeds = Json::array();
  for (const auto& sr : r.seeds) {
    Json sj = {{"seed", sr.seed}, {"partition", sr.partition}, {"converged", sr.converged}};
    for (const auto& [name, rep] : sr.setups) {
      Json pg = Json::array();
      for (const auto& m : rep.per_group) pg.push_back(metrics_json(m));
      sj["setups"][name] = {{"avg", metrics_json(rep.avg)}, {"per_group", pg}};
    }
    seeds.push_back(sj);
  }
  j["seeds"] = seeds;
  written.push_back(cfg.output_dir / "rq3_report.json");
  write_json_file(j, written.back());
  return written;
}

}  // namespace atlas
