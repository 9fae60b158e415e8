#include "atlas/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "atlas/csv.hpp"
#include "atlas/divergence.hpp"
#include "atlas/partitions.hpp"

namespace atlas {

namespace {

void require_nonempty(std::span<const Trajectory> a, std::span<const Trajectory> b) {
  if (a.empty() || b.empty()) throw DomainError("evaluation needs non-empty real and synthetic sets");
}

const Poi& poi_at(const PoiCatalog& catalog, PoiId id) {
  if (id < 0 || id >= catalog.vocab()) throw DomainError("token outside catalog");
  return catalog.pois[id];
}

template <class F>
double set_jsd(int n_bins, std::span<const Trajectory> real, std::span<const Trajectory> synth, F&& fill) {
  require_nonempty(real, synth);
  VectorXd p = VectorXd::Zero(n_bins);
  VectorXd q = VectorXd::Zero(n_bins);
  for (const auto& t : real) fill(t, p);
  for (const auto& t : synth) fill(t, q);
  return js_divergence(p, q);
}

}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double trajectory_distance_km(const PoiCatalog& catalog, std::span<const PoiId> tokens) {
  double d = 0.0;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const Poi& a = poi_at(catalog, tokens[i - 1]);
    const Poi& b = poi_at(catalog, tokens[i]);
    d += haversine_km(a.lat, a.lon, b.lat, b.lon);
  }
  return d;
}

void EvalGrid::validate() const {
  if (n_rows < 1 || n_cols < 1) throw ConfigError("grid needs at least one row and column");
  if (!(bbox.lat_min < bbox.lat_max) || !(bbox.lon_min < bbox.lon_max)) throw ConfigError("degenerate grid box");
}

int EvalGrid::cell_of(double lat, double lon) const {
  const double fr = (lat - bbox.lat_min) / (bbox.lat_max - bbox.lat_min);
  const double fc = (lon - bbox.lon_min) / (bbox.lon_max - bbox.lon_min);
  const int r = std::clamp(static_cast<int>(std::floor(fr * n_rows)), 0, n_rows - 1);
  const int c = std::clamp(static_cast<int>(std::floor(fc * n_cols)), 0, n_cols - 1);
  return r * n_cols + c;
}

DistanceBins DistanceBins::log_spaced(double lo_km, double hi_km, int n_edges) {
  if (!(lo_km > 0.0) || !(hi_km > lo_km) || n_edges < 2) throw ConfigError("invalid log-spaced bin request");
  DistanceBins b;
  const double step = std::log(hi_km / lo_km) / (n_edges - 1);
  for (int i = 0; i < n_edges; ++i) b.edges.push_back(lo_km * std::exp(step * i));
  b.edges.back() = hi_km;
  return b;
}

void DistanceBins::validate() const {
  if (edges.empty()) throw ConfigError("distance bins need at least one edge");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("distance bin edges must be strictly increasing");
}

int DistanceBins::bin_of(double km) const {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), km) - edges.begin());
}

double spatial_jsd(const EvalGrid& grid, const PoiCatalog& catalog, std::span<const Trajectory> real,
                   std::span<const Trajectory> synth) {
  grid.validate();
  return set_jsd(grid.n_cells(), real, synth, [&](const Trajectory& t, VectorXd& h) {
    for (PoiId x : t.tokens) {
      const Poi& p = poi_at(catalog, x);
      h(grid.cell_of(p.lat, p.lon)) += 1.0;
    }
  });
}

double travel_distance_jsd(const DistanceBins& bins, const PoiCatalog& catalog, std::span<const Trajectory> real,
                           std::span<const Trajectory> synth) {
  bins.validate();
  return set_jsd(bins.n_bins(), real, synth, [&](const Trajectory& t, VectorXd& h) {
    h(bins.bin_of(trajectory_distance_km(catalog, t.tokens))) += 1.0;
  });
}

double trip_jsd(const EvalGrid& grid, const PoiCatalog& catalog, std::span<const Trajectory> real,
                std::span<const Trajectory> synth) {
  grid.validate();
  const int cells = grid.n_cells();
  // Sparse: only occupied origin-destination pairs matter for the divergence.
  std::vector<long> keys;
  auto key_of = [&](const Trajectory& t) -> long {
    if (t.tokens.empty()) throw DomainError("trip metric needs non-empty trajectories");
    const Poi& o = poi_at(catalog, t.tokens.front());
    const Poi& d = poi_at(catalog, t.tokens.back());
    return static_cast<long>(grid.cell_of(o.lat, o.lon)) * cells + grid.cell_of(d.lat, d.lon);
  };
  require_nonempty(real, synth);
  for (const auto& t : real) keys.push_back(key_of(t));
  for (const auto& t : synth) keys.push_back(key_of(t));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return set_jsd(static_cast<int>(keys.size()), real, synth, [&](const Trajectory& t, VectorXd& h) {
    h(std::lower_bound(keys.begin(), keys.end(), key_of(t)) - keys.begin()) += 1.0;
  });
}

double poi_frequency_jsd(int vocab, std::span<const Trajectory> real, std::span<const Trajectory> synth) {
  if (vocab < 1) throw ConfigError("vocabulary must be non-empty");
  return set_jsd(vocab, real, synth, [&](const Trajectory& t, VectorXd& h) {
    for (PoiId x : t.tokens) {
      if (x < 0 || x >= vocab) throw DomainError("token outside vocabulary");
      h(x) += 1.0;
    }
  });
}

std::optional<double> gap_closed(double metric_baseline, double metric_strong, double metric_atlas) {
  const double denom = metric_baseline - metric_strong;
  if (denom == 0.0 || !std::isfinite(denom)) return std::nullopt;
  return 1.0 - (metric_atlas - metric_strong) / denom;
}

GroupEvalReport evaluate_groups(const EvalSettings& s, const PoiCatalog& catalog,
                                const std::vector<std::vector<Trajectory>>& real,
                                const std::vector<std::vector<Trajectory>>& synth) {
  if (real.size() != synth.size() || real.empty()) throw DimensionError("need matching non-empty group lists");
  const int k = static_cast<int>(real.size());
  GroupEvalReport r;
  r.per_group.resize(k, 4);
  for (int d = 0; d < k; ++d) {
    r.per_group(d, 0) = spatial_jsd(s.grid, catalog, real[d], synth[d]);
    r.per_group(d, 1) = travel_distance_jsd(s.bins, catalog, real[d], synth[d]);
    r.per_group(d, 2) = trip_jsd(s.grid, catalog, real[d], synth[d]);
    r.per_group(d, 3) = poi_frequency_jsd(catalog.vocab(), real[d], synth[d]);
  }
  r.avg = r.per_group.colwise().mean().transpose();
  r.std.resize(4);
  for (int j = 0; j < 4; ++j) r.std(j) = std::sqrt((r.per_group.col(j).array() - r.avg(j)).square().mean());
  return r;
}

std::string group_eval_csv(const GroupEvalReport& r) {
  std::ostringstream os;
  os << "metric";
  for (const auto& l : group_labels(static_cast<int>(r.per_group.rows()))) os << ',' << l;
  os << ",Avg,Std\n";
  for (int j = 0; j < 4; ++j) {
    os << kEvalMetricNames[j];
    for (Eigen::Index d = 0; d < r.per_group.rows(); ++d) os << ',' << csv::format_double(r.per_group(d, j));
    os << ',' << csv::format_double(r.avg(j)) << ',' << csv::format_double(r.std(j)) << '\n';
  }
  return os.str();
}

void write_group_eval_csv(const GroupEvalReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << group_eval_csv(r);
}

}  // namespace atlas
