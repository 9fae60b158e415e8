#include "atlas/poi_world.hpp"

#include <cmath>
#include <string>

#include "atlas/partitions.hpp"

namespace atlas {

namespace {

constexpr double kRowFloor = 1e-6;

VectorXd random_simplex_row(int n, Rng& rng) {
  std::exponential_distribution<double> draw(1.0);
  VectorXd row(n);
  for (int i = 0; i < n; ++i) row(i) = std::max(draw(rng), kRowFloor);
  return row / row.sum();
}

}  // namespace

std::vector<int> PoiCatalog::categories() const {
  std::vector<int> out;
  out.reserve(pois.size());
  for (const auto& p : pois) out.push_back(p.category);
  return out;
}

void PoiCatalog::validate() const {
  if (pois.empty()) throw ConfigError("catalog has no POIs");
  if (n_categories < 1) throw ConfigError("catalog needs at least one category");
  std::vector<int> seen(n_categories, 0);
  for (std::size_t i = 0; i < pois.size(); ++i) {
    const Poi& p = pois[i];
    if (p.id != static_cast<PoiId>(i)) throw ConfigError("POI ids must be 0..V-1 in order");
    if (p.category < 0 || p.category >= n_categories) throw ConfigError("POI category out of range");
    if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
      throw ConfigError("POI coordinates out of range");
    ++seen[p.category];
  }
  for (int c = 0; c < n_categories; ++c)
    if (seen[c] == 0) throw ConfigError("category " + std::to_string(c) + " has no POI");
}

void WorldConfig::validate() const {
  if (n_pois < 1 || n_categories < 1 || n_groups < 1 || n_regions < 1 || horizon < 1)
    throw ConfigError("world sizes (V, C, K, G, T) must all be >= 1");
  if (n_categories > n_pois) throw ConfigError("need C <= V so every category holds a POI");
  if (!(tilt_scale >= 0.0) || !std::isfinite(tilt_scale)) throw ConfigError("tilt_scale must be finite and >= 0");
  if (!(grid.lat_min < grid.lat_max) || !(grid.lon_min < grid.lon_max) || grid.lat_min < -90 ||
      grid.lat_max > 90 || grid.lon_min < -180 || grid.lon_max > 180)
    throw ConfigError("grid extent must be a non-degenerate box inside lat/lon bounds");
}

WeightedChain GroundTruthModel::group_chain(int group) const {
  if (group < 0 || group >= n_groups()) throw DomainError("group index out of range");
  if (target == TiltTarget::Transition) {
    BaseChain b{base.initial, group_transitions[group], base.horizon};
    return WeightedChain::from_base(b);
  }
  return WeightedChain::tilted(base, tilts[group]);
}

ChainMarginals GroundTruthModel::group_marginals(int group) const {
  return chain_marginals(group_chain(group));
}

World build_world(const WorldConfig& config) {
  config.validate();
  const int v = config.n_pois;
  Rng rng = make_rng(config.seed, 0);

  World w;
  w.config = config;
  w.catalog.n_categories = config.n_categories;
  w.catalog.pois.reserve(v);
  std::uniform_real_distribution<double> lat(config.grid.lat_min, config.grid.lat_max);
  std::uniform_real_distribution<double> lon(config.grid.lon_min, config.grid.lon_max);
  for (int i = 0; i < v; ++i) {
    const double la = lat(rng);
    const double lo = lon(rng);
    w.catalog.pois.push_back({static_cast<PoiId>(i), la, lo, i % config.n_categories});
  }

  GroundTruthModel& m = w.model;
  m.base.horizon = config.horizon;
  m.base.initial = random_simplex_row(v, rng);
  m.base.transition.resize(v, v);
  for (int u = 0; u < v; ++u) m.base.transition.row(u) = random_simplex_row(v, rng).transpose();
  m.target = config.tilt_target;

  std::normal_distribution<double> gauss(0.0, 1.0);
  const int k = config.n_groups;
  m.tilts.assign(k, VectorXd::Zero(v));
  if (config.tilt_target == TiltTarget::Unigram) {
    for (int d = 0; d < k; ++d) {
      VectorXd lam(v);
      for (int i = 0; i < v; ++i) lam(i) = config.tilt_scale * gauss(rng);
      lam.array() -= lam.mean();
      m.tilts[d] = lam;
    }
  } else {
    m.group_transitions.reserve(k);
    for (int d = 0; d < k; ++d) {
      MatrixXd t(v, v);
      for (int u = 0; u < v; ++u) {
        for (int x = 0; x < v; ++x) t(u, x) = m.base.transition(u, x) * std::exp(config.tilt_scale * gauss(rng));
        t.row(u) /= t.row(u).sum();
      }
      m.group_transitions.push_back(std::move(t));
    }
  }
  return w;
}

Trajectory sample_trajectory(const GroundTruthModel& model, int group, Rng& rng) {
  if (group < 0 || group >= model.n_groups()) throw DomainError("group index out of range");
  TrajectorySampler sampler(model.group_marginals(group));
  return {sampler.sample(rng), group, std::nullopt};
}

GroupSamplers::GroupSamplers(const GroundTruthModel& model) {
  samplers_.reserve(model.n_groups());
  for (int d = 0; d < model.n_groups(); ++d) samplers_.emplace_back(model.group_marginals(d));
}

Trajectory GroupSamplers::sample(int group, Rng& rng) const {
  if (group < 0 || group >= n_groups()) throw DomainError("group index out of range");
  return {samplers_[group].sample(rng), group, std::nullopt};
}

std::vector<Trajectory> sample_group(const GroupSamplers& samplers, int group, int count, Rng& rng) {
  if (count < 0) throw DomainError("sample count must be >= 0");
  std::vector<Trajectory> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(samplers.sample(group, rng));
  return out;
}

std::vector<Trajectory> sample_population(const GroundTruthModel& model, const CompositionMatrix& composition,
                                          std::span<const int> n_per_region, Rng& rng) {
  const int g_count = composition.n_regions();
  if (composition.n_groups() != model.n_groups())
    throw DimensionError("composition columns must equal the model's group count");
  if (static_cast<int>(n_per_region.size()) != g_count)
    throw DimensionError("n_per_region must have one entry per region");
  long total = 0;
  for (int n : n_per_region) {
    if (n < 0) throw DomainError("negative per-region sample count");
    total += n;
  }
  std::vector<Trajectory> out;
  if (total == 0) return out;
  out.reserve(total);

  GroupSamplers samplers(model);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const MatrixXd& p = composition.matrix();
  for (int g = 0; g < g_count; ++g) {
    for (int i = 0; i < n_per_region[g]; ++i) {
      const double u = unif(rng) * p.row(g).sum();
      int d = 0;
      double acc = p(g, 0);
      while (d + 1 < composition.n_groups() && (u >= acc || p(g, d) == 0.0)) acc += p(g, ++d);
      Trajectory tr = samplers.sample(d, rng);
      tr.region_id = g;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

}  // namespace atlas
