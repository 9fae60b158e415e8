#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atlas/chain.hpp"
#include "atlas/types.hpp"

namespace atlas {

class CompositionMatrix;

struct Poi {
  PoiId id = 0;
  double lat = 0.0;
  double lon = 0.0;
  int category = 0;

  friend bool operator==(const Poi&, const Poi&) = default;
};

struct PoiCatalog {
  std::vector<Poi> pois;
  int n_categories = 1;

  int vocab() const { return static_cast<int>(pois.size()); }
  std::vector<int> categories() const;
  void validate() const;

  friend bool operator==(const PoiCatalog&, const PoiCatalog&) = default;
};

struct GridExtent {
  double lat_min = 38.80;
  double lat_max = 39.10;
  double lon_min = -77.25;
  double lon_max = -76.90;

  friend bool operator==(const GridExtent&, const GridExtent&) = default;
};

// How group heterogeneity enters the ground truth. Unigram tilts are
// identifiable from POI histograms; transition perturbations are not.
enum class TiltTarget { Unigram, Transition };

struct WorldConfig {
  int n_pois = 20;        // V
  int n_categories = 4;   // C
  int n_groups = 4;       // K
  int n_regions = 4;      // G
  int horizon = 8;        // T
  std::uint64_t seed = 0;
  double tilt_scale = 1.0;
  GridExtent grid;
  TiltTarget tilt_target = TiltTarget::Unigram;

  void validate() const;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

// Base chain plus K group-conditioned reweightings.
//   Unigram:    Q_d(x) ∝ base(x) · exp(Σ_t tilts[d][x_t])
//   Transition: group d is the Markov chain (base.initial, group_transitions[d])
struct GroundTruthModel {
  BaseChain base;
  TiltTarget target = TiltTarget::Unigram;
  std::vector<VectorXd> tilts;               // K vectors in R^V (zero in Transition mode)
  std::vector<MatrixXd> group_transitions;   // K matrices, Transition mode only

  int n_groups() const { return static_cast<int>(tilts.size()); }
  int vocab() const { return base.vocab(); }
  int horizon() const { return base.horizon; }

  WeightedChain group_chain(int group) const;
  ChainMarginals group_marginals(int group) const;
};

struct World {
  WorldConfig config;
  PoiCatalog catalog;
  GroundTruthModel model;
};

World build_world(const WorldConfig& config);

Trajectory sample_trajectory(const GroundTruthModel& model, int group, Rng& rng);

// Group samplers are built once; use this for repeated draws.
class GroupSamplers {
 public:
  explicit GroupSamplers(const GroundTruthModel& model);
  Trajectory sample(int group, Rng& rng) const;
  int n_groups() const { return static_cast<int>(samplers_.size()); }

 private:
  std::vector<TrajectorySampler> samplers_;
};

// For each region g: draw d ~ composition row g, then x ~ group d. Region and
// group labels are attached; regions are emitted in order.
std::vector<Trajectory> sample_population(const GroundTruthModel& model, const CompositionMatrix& composition,
                                          std::span<const int> n_per_region, Rng& rng);

std::vector<Trajectory> sample_group(const GroupSamplers& samplers, int group, int count, Rng& rng);

}  // namespace atlas
