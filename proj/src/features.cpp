#include "atlas/features.hpp"

#include <fstream>
#include <string>

#include "atlas/csv.hpp"
#include "atlas/partitions.hpp"

namespace atlas {

std::string_view to_string(FeatureMapKind k) {
  switch (k) {
    case FeatureMapKind::PoiHistogram: return "poi_histogram";
    case FeatureMapKind::CategoryHistogram: return "category_histogram";
    case FeatureMapKind::CategoryTransition: return "category_transition";
  }
  return "poi_histogram";
}

FeatureMapKind feature_map_from_string(std::string_view s) {
  if (s == "poi_histogram" || s == "PoiHistogram" || s == "poi") return FeatureMapKind::PoiHistogram;
  if (s == "category_histogram" || s == "CategoryHistogram" || s == "category")
    return FeatureMapKind::CategoryHistogram;
  if (s == "category_transition" || s == "CategoryTransition" || s == "bigram")
    return FeatureMapKind::CategoryTransition;
  throw ConfigError("unknown feature map '" + std::string(s) + "'");
}

FeatureMap::FeatureMap(FeatureMapKind kind, const PoiCatalog& catalog)
    : FeatureMap(kind, catalog.categories(), catalog.n_categories) {}

FeatureMap::FeatureMap(FeatureMapKind kind, std::vector<int> categories, int n_categories)
    : kind_(kind), categories_(std::move(categories)), n_categories_(n_categories) {
  if (categories_.empty()) throw ConfigError("feature map needs a non-empty vocabulary");
  if (n_categories_ < 1) throw ConfigError("feature map needs at least one category");
  for (int c : categories_)
    if (c < 0 || c >= n_categories_) throw ConfigError("category id out of range");
  switch (kind_) {
    case FeatureMapKind::PoiHistogram: dim_ = vocab(); break;
    case FeatureMapKind::CategoryHistogram: dim_ = n_categories_; break;
    case FeatureMapKind::CategoryTransition: dim_ = n_categories_ * n_categories_; break;
  }
}

int FeatureMap::count_scale(int horizon) const {
  check_horizon(horizon);
  return is_bigram() ? horizon - 1 : horizon;
}

void FeatureMap::check_horizon(int horizon) const {
  if (horizon < 1) throw DomainError("trajectory must be non-empty");
  if (is_bigram() && horizon < 2) throw DomainError("category_transition features need T >= 2");
}

VectorXd FeatureMap::apply(std::span<const PoiId> tokens) const {
  const int n = static_cast<int>(tokens.size());
  check_horizon(n);
  for (PoiId t : tokens)
    if (t < 0 || t >= vocab()) throw DomainError("token " + std::to_string(t) + " outside vocabulary");
  VectorXd f = VectorXd::Zero(dim_);
  switch (kind_) {
    case FeatureMapKind::PoiHistogram:
      for (PoiId t : tokens) f(t) += 1.0;
      break;
    case FeatureMapKind::CategoryHistogram:
      for (PoiId t : tokens) f(categories_[t]) += 1.0;
      break;
    case FeatureMapKind::CategoryTransition:
      for (int i = 0; i + 1 < n; ++i) f(categories_[tokens[i]] * n_categories_ + categories_[tokens[i + 1]]) += 1.0;
      break;
  }
  return f / static_cast<double>(count_scale(n));
}

VectorXd FeatureMap::expected(const ChainMarginals& m) const {
  if (m.vocab() != vocab()) throw DimensionError("marginals vocabulary does not match feature map");
  const int horizon = m.horizon();
  check_horizon(horizon);
  VectorXd f = VectorXd::Zero(dim_);
  switch (kind_) {
    case FeatureMapKind::PoiHistogram:
      f = m.expected_counts();
      break;
    case FeatureMapKind::CategoryHistogram: {
      const VectorXd c = m.expected_counts();
      for (int v = 0; v < vocab(); ++v) f(categories_[v]) += c(v);
      break;
    }
    case FeatureMapKind::CategoryTransition: {
      const MatrixXd n = m.expected_transition_counts();
      for (int u = 0; u < vocab(); ++u)
        for (int v = 0; v < vocab(); ++v) f(categories_[u] * n_categories_ + categories_[v]) += n(u, v);
      break;
    }
  }
  return f / static_cast<double>(count_scale(horizon));
}

PathStatistic FeatureMap::statistic(const VectorXd& r) const {
  if (r.size() != dim_) throw DimensionError("statistic weights must have the feature dimension");
  const int n = vocab();
  PathStatistic s{VectorXd::Zero(n), MatrixXd()};
  switch (kind_) {
    case FeatureMapKind::PoiHistogram:
      s.node = r;
      break;
    case FeatureMapKind::CategoryHistogram:
      for (int v = 0; v < n; ++v) s.node(v) = r(categories_[v]);
      break;
    case FeatureMapKind::CategoryTransition:
      s.edge.resize(n, n);
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) s.edge(u, v) = r(categories_[u] * n_categories_ + categories_[v]);
      break;
  }
  return s;
}

WeightedChain FeatureMap::tilt(const BaseChain& base, const VectorXd& eta) const {
  if (base.vocab() != vocab()) throw DimensionError("base chain vocabulary does not match feature map");
  check_horizon(base.horizon);
  const PathStatistic s = statistic(eta);
  WeightedChain c = WeightedChain::from_base(base);
  c.node = s.node;
  if (s.edge.size() > 0) c.log_step += s.edge;
  return c;
}

VectorXd FeatureMap::reduce(const VectorXd& node_cov, const MatrixXd& edge_cov) const {
  VectorXd out = VectorXd::Zero(dim_);
  const int n = vocab();
  switch (kind_) {
    case FeatureMapKind::PoiHistogram:
      out = node_cov;
      break;
    case FeatureMapKind::CategoryHistogram:
      for (int v = 0; v < n; ++v) out(categories_[v]) += node_cov(v);
      break;
    case FeatureMapKind::CategoryTransition:
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) out(categories_[u] * n_categories_ + categories_[v]) += edge_cov(u, v);
      break;
  }
  return out;
}

VectorXd FeatureMap::count_covariance_times(const ChainMarginals& m, const VectorXd& r) const {
  const StatisticCovariance c = covariance_with(m, statistic(r));
  return reduce(c.node, c.edge);
}

MatrixXd FeatureMap::count_covariance(const ChainMarginals& m) const {
  MatrixXd cov(dim_, dim_);
  VectorXd e = VectorXd::Zero(dim_);
  for (int j = 0; j < dim_; ++j) {
    e.setZero();
    e(j) = 1.0;
    cov.col(j) = count_covariance_times(m, e);
  }
  return 0.5 * (cov + cov.transpose());
}

long AggregateMatrix::min_count() const {
  long n = sample_counts.empty() ? 0 : sample_counts.front();
  for (long c : sample_counts) n = std::min(n, c);
  return n;
}

VectorXd pairwise_mean(std::span<const VectorXd> rows, int dim) {
  if (rows.empty()) return VectorXd::Zero(dim);
  auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> VectorXd {
    if (hi - lo == 1) return rows[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return rec(rec, 0, rows.size()) / static_cast<double>(rows.size());
}

AggregateMatrix empirical_regional_aggregates(const FeatureMap& map, std::span<const Trajectory> trajectories,
                                              int n_regions, bool allow_empty) {
  if (n_regions < 1) throw DimensionError("need at least one region");
  std::vector<std::vector<VectorXd>> per_region(n_regions);
  for (const auto& t : trajectories) {
    if (!t.region_id) throw DomainError("trajectory without region_id");
    const int g = *t.region_id;
    if (g < 0 || g >= n_regions) throw DomainError("region_id out of range");
    per_region[g].push_back(map.apply(t));
  }
  AggregateMatrix out;
  out.values = MatrixXd::Zero(n_regions, map.dim());
  out.sample_counts.assign(n_regions, 0);
  for (int g = 0; g < n_regions; ++g) {
    if (per_region[g].empty()) {
      if (!allow_empty) throw DomainError("region " + std::to_string(g) + " has no trajectories");
      continue;
    }
    out.values.row(g) = pairwise_mean(per_region[g], map.dim()).transpose();
    out.sample_counts[g] = static_cast<long>(per_region[g].size());
  }
  return out;
}

AggregateMatrix exact_group_means(const FeatureMap& map, const GroundTruthModel& model) {
  if (map.vocab() != model.vocab()) throw DimensionError("feature map vocabulary does not match model");
  map.check_horizon(model.horizon());
  AggregateMatrix out;
  out.rows_are_regions = false;
  out.values.resize(model.n_groups(), map.dim());
  out.sample_counts.assign(model.n_groups(), 0);
  for (int d = 0; d < model.n_groups(); ++d) out.values.row(d) = map.expected(model.group_marginals(d)).transpose();
  return out;
}

AggregateMatrix exact_regional_aggregates(const CompositionMatrix& composition, const AggregateMatrix& group_means) {
  if (composition.n_groups() != group_means.rows())
    throw DimensionError("composition has " + std::to_string(composition.n_groups()) + " groups but means have " +
                         std::to_string(group_means.rows()) + " rows");
  AggregateMatrix out;
  out.values = composition.matrix() * group_means.values;
  out.sample_counts.assign(composition.n_regions(), 0);
  return out;
}

void write_aggregate_csv(const AggregateMatrix& a, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << (a.rows_are_regions ? "region" : "group") << ",n";
  for (int j = 0; j < a.cols(); ++j) os << ',' << j;
  os << '\n';
  for (int r = 0; r < a.rows(); ++r) {
    os << r << ',' << (r < static_cast<int>(a.sample_counts.size()) ? a.sample_counts[r] : 0);
    for (int j = 0; j < a.cols(); ++j) os << ',' << csv::format_double(a.values(r, j));
    os << '\n';
  }
}

AggregateMatrix read_aggregate_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 3 || (t.header[0] != "region" && t.header[0] != "group") || t.header[1] != "n")
    throw ConfigError(path.string() + ": expected header 'region|group,n,0,1,...'");
  const int m = static_cast<int>(t.header.size()) - 2;
  AggregateMatrix a;
  a.rows_are_regions = t.header[0] == "region";
  a.values.resize(static_cast<Eigen::Index>(t.rows.size()), m);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (static_cast<int>(t.rows[r].size()) != m + 2) throw ConfigError(path.string() + ": ragged row");
    a.sample_counts.push_back(csv::parse_long(t.rows[r][1]));
    for (int j = 0; j < m; ++j) a.values(static_cast<Eigen::Index>(r), j) = csv::parse_double(t.rows[r][j + 2]);
  }
  return a;
}

}  // namespace atlas
