#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atlas/poi_world.hpp"
#include "atlas/types.hpp"

namespace atlas {

inline constexpr double kEarthRadiusKm = 6371.0088;

double haversine_km(double lat1, double lon1, double lat2, double lon2);

// Sum of consecutive-leg haversine distances along the trajectory.
double trajectory_distance_km(const PoiCatalog& catalog, std::span<const PoiId> tokens);

struct EvalGrid {
  GridExtent bbox;
  int n_rows = 40;
  int n_cols = 40;

  void validate() const;
  int n_cells() const { return n_rows * n_cols; }
  // Points outside the box clamp to the border cells.
  int cell_of(double lat, double lon) const;
};

// Edges in km; bin 0 is underflow (< edges[0]), bin i covers [edges[i-1], edges[i]),
// and the last bin is overflow (>= edges.back()).
struct DistanceBins {
  std::vector<double> edges;

  static DistanceBins log_spaced(double lo_km = 0.1, double hi_km = 1000.0, int n_edges = 20);
  void validate() const;
  int n_bins() const { return static_cast<int>(edges.size()) + 1; }
  int bin_of(double km) const;
};

double spatial_jsd(const EvalGrid& grid, const PoiCatalog& catalog, std::span<const Trajectory> real,
                   std::span<const Trajectory> synth);
double travel_distance_jsd(const DistanceBins& bins, const PoiCatalog& catalog, std::span<const Trajectory> real,
                           std::span<const Trajectory> synth);
double trip_jsd(const EvalGrid& grid, const PoiCatalog& catalog, std::span<const Trajectory> real,
                std::span<const Trajectory> synth);
double poi_frequency_jsd(int vocab, std::span<const Trajectory> real, std::span<const Trajectory> synth);

// 1 - (atlas - strong) / (baseline - strong); nullopt when baseline == strong.
std::optional<double> gap_closed(double metric_baseline, double metric_strong, double metric_atlas);

enum class EvalMetric { Spatial = 0, Travel = 1, Trip = 2, PoiFrequency = 3 };
inline constexpr std::array<const char*, 4> kEvalMetricNames{"spatial_jsd", "travel_jsd", "trip_jsd",
                                                            "poi_freq_jsd"};

struct GroupEvalReport {
  MatrixXd per_group;  // K x 4, columns in EvalMetric order
  VectorXd avg;        // 4
  VectorXd std;        // 4, population std over groups

  double average(EvalMetric m) const { return avg(static_cast<int>(m)); }
};

struct EvalSettings {
  EvalGrid grid;
  DistanceBins bins = DistanceBins::log_spaced();
};

// real[d] and synth[d] hold group-d trajectory sets.
GroupEvalReport evaluate_groups(const EvalSettings& settings, const PoiCatalog& catalog,
                                const std::vector<std::vector<Trajectory>>& real,
                                const std::vector<std::vector<Trajectory>>& synth);

// Layout: one row per metric, one column per group, then Avg and Std.
void write_group_eval_csv(const GroupEvalReport& r, const std::filesystem::path& path);
std::string group_eval_csv(const GroupEvalReport& r);

}  // namespace atlas
