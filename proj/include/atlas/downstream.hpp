#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "atlas/poi_world.hpp"
#include "atlas/types.hpp"

namespace atlas {

// Smoothed bigram next-POI predictor:
//   score(v | u) = (bigram[u, v] + eps) / (unigram[u] + V eps)
struct NextPoiModel {
  MatrixXd bigram_counts;
  VectorXd unigram_counts;  // transitions leaving each POI
  double smoothing_eps = 0.1;
  int group = -1;

  int vocab() const { return static_cast<int>(unigram_counts.size()); }
  VectorXd scores(PoiId prev) const;
};

NextPoiModel train_next_poi(std::span<const Trajectory> trajectories, int vocab, double eps = 0.1, int group = -1);

struct DownstreamMetrics {
  double accuracy = 0.0;
  double hr_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double geo_error_km = 0.0;
  long events = 0;
};

// 1-based rank of `truth` when candidates are sorted by descending score,
// ties broken by ascending POI id.
int rank_of(const VectorXd& scores, PoiId truth);

DownstreamMetrics evaluate_next_poi(const NextPoiModel& model, const PoiCatalog& catalog,
                                    std::span<const Trajectory> test, int k = 10);

struct DownstreamReport {
  std::vector<DownstreamMetrics> per_group;
  DownstreamMetrics avg;  // unweighted mean over groups
};

DownstreamReport summarize(std::vector<DownstreamMetrics> per_group);

}  // namespace atlas
