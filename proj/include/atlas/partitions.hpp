#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/types.hpp"

namespace atlas {

enum class Provenance { DemoGroups, FullRank, RankDef, Messy, FromCounts, Custom };

std::string_view to_string(Provenance p);
// Accepts demo_groups / full_rank / rank_def / messy (also the CamelCase names).
Provenance builtin_partition_from_string(std::string_view s);

// G x K row-stochastic matrix of regional demographic shares p(d | g).
class CompositionMatrix {
 public:
  // Validates the simplex invariant at `tol`; rows are not renormalized.
  CompositionMatrix(MatrixXd p, Provenance provenance, double tol = 1e-12);

  const MatrixXd& matrix() const { return p_; }
  int n_regions() const { return static_cast<int>(p_.rows()); }
  int n_groups() const { return static_cast<int>(p_.cols()); }
  Provenance provenance() const { return provenance_; }
  double operator()(int g, int d) const { return p_(g, d); }

 private:
  MatrixXd p_;
  Provenance provenance_;
};

struct PartitionDiagnostics {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  int rank = 0;
  double condition_number = std::numeric_limits<double>::infinity();
  VectorXd singular_values;
};

inline constexpr double kDefaultRankTol = 1e-8;

// The four K = 8 regimes (DemoGroups, FullRank, RankDef, Messy) from the
// reference 6-decimal fixtures, rows renormalized.
CompositionMatrix build_builtin_partition(Provenance kind);

CompositionMatrix build_from_counts(const Eigen::MatrixXi& counts);

// Rows drawn from a flat Dirichlet; for tests and custom experiments.
CompositionMatrix random_composition(int n_regions, int n_groups, Rng& rng);

PartitionDiagnostics diagnostics(const CompositionMatrix& p, double rank_tol = kDefaultRankTol);

// Column labels for K = 8 in age x gender order; d0..d{K-1} otherwise.
std::vector<std::string> group_labels(int n_groups);

void write_composition_csv(const CompositionMatrix& p, const std::filesystem::path& path);
// Reads the header + G rows written by write_composition_csv. When `counts` is
// set, the body is parsed as integers and row-normalized.
CompositionMatrix read_composition_csv(const std::filesystem::path& path, bool counts = false);

}  // namespace atlas
