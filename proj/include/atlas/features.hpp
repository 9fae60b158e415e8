#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "atlas/chain.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/types.hpp"

namespace atlas {

class CompositionMatrix;

enum class FeatureMapKind { PoiHistogram, CategoryHistogram, CategoryTransition };

std::string_view to_string(FeatureMapKind k);
FeatureMapKind feature_map_from_string(std::string_view s);

// Normalized-histogram feature map phi over trajectories. Every output is a
// probability vector, so ||phi(x)||_2 <= 1 for all x.
class FeatureMap {
 public:
  FeatureMap(FeatureMapKind kind, const PoiCatalog& catalog);
  FeatureMap(FeatureMapKind kind, std::vector<int> categories, int n_categories);

  FeatureMapKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int vocab() const { return static_cast<int>(categories_.size()); }
  int n_categories() const { return n_categories_; }
  const std::vector<int>& categories() const { return categories_; }
  bool is_bigram() const { return kind_ == FeatureMapKind::CategoryTransition; }

  // Number of counted events in a length-T path: T, or T-1 for bigrams.
  int count_scale(int horizon) const;
  void check_horizon(int horizon) const;

  VectorXd apply(std::span<const PoiId> tokens) const;
  VectorXd apply(const Trajectory& t) const { return apply(t.tokens); }

  // E[phi(X)] under the chain with these marginals.
  VectorXd expected(const ChainMarginals& m) const;

  // Unnormalized feature counts F(x) as an additive path statistic weighted by r:
  // S(x) = <r, F(x)>.
  PathStatistic statistic(const VectorXd& r) const;

  // Base chain reweighted by exp(<eta, F(x)>).
  WeightedChain tilt(const BaseChain& base, const VectorXd& eta) const;

  // Cov(F) r, and the full Cov(F) (dim x dim).
  VectorXd count_covariance_times(const ChainMarginals& m, const VectorXd& r) const;
  MatrixXd count_covariance(const ChainMarginals& m) const;

 private:
  FeatureMapKind kind_;
  std::vector<int> categories_;
  int n_categories_;
  int dim_;

  VectorXd reduce(const VectorXd& node_cov, const MatrixXd& edge_cov) const;
};

// Rows are regions (G x m) or groups (K x m). sample_counts is 0 for exact rows.
struct AggregateMatrix {
  MatrixXd values;
  std::vector<long> sample_counts;
  bool rows_are_regions = true;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  long min_count() const;
};

// Row g is the mean of phi over trajectories with region_id == g.
AggregateMatrix empirical_regional_aggregates(const FeatureMap& map, std::span<const Trajectory> trajectories,
                                              int n_regions, bool allow_empty = false);

AggregateMatrix exact_group_means(const FeatureMap& map, const GroundTruthModel& model);

// P * M (G x K times K x m).
AggregateMatrix exact_regional_aggregates(const CompositionMatrix& composition, const AggregateMatrix& group_means);

// Pairwise (cascade) summation of rows; the reduction tree depends only on n.
VectorXd pairwise_mean(std::span<const VectorXd> rows, int dim);

void write_aggregate_csv(const AggregateMatrix& a, const std::filesystem::path& path);
AggregateMatrix read_aggregate_csv(const std::filesystem::path& path);

}  // namespace atlas
