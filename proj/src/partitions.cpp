#include "atlas/partitions.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "atlas/csv.hpp"

namespace atlas {

namespace {

using Row8 = std::array<double, 8>;

// Published row-normalized proportions, columns (a0g0, a0g1, a1g0, a1g1, a2g0, a2g1, a3g0, a3g1).
constexpr std::array<Row8, 8> kFullRank{{
    {0.000000, 0.000000, 0.000000, 0.500101, 0.499899, 0.000000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.500101, 0.000000, 0.000000, 0.000000, 0.000000, 0.499899},
    {0.000000, 0.500101, 0.000000, 0.000000, 0.000000, 0.000000, 0.499899, 0.000000},
    {0.500101, 0.000000, 0.000000, 0.000000, 0.000000, 0.499899, 0.000000, 0.000000},
    {0.500101, 0.000000, 0.000000, 0.499899, 0.000000, 0.000000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.500101, 0.000000, 0.000000, 0.499899, 0.000000, 0.000000},
    {0.000000, 0.500101, 0.000000, 0.000000, 0.499899, 0.000000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.500101, 0.499899},
}};

constexpr std::array<Row8, 8> kRankDef{{
    {0.500000, 0.000000, 0.000000, 0.500000, 0.000000, 0.000000, 0.000000, 0.000000},
    {0.000000, 0.500000, 0.000000, 0.000000, 0.500000, 0.000000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.500000, 0.000000, 0.000000, 0.000000, 0.000000, 0.500000},
    {0.000000, 0.000000, 0.000000, 0.000000, 0.000000, 0.500000, 0.500000, 0.000000},
    {0.500000, 0.000000, 0.000000, 0.000000, 0.000000, 0.500000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.000000, 0.500000, 0.000000, 0.000000, 0.500000, 0.000000},
    {0.125130, 0.125130, 0.125130, 0.125130, 0.124870, 0.124870, 0.124870, 0.124870},
    {0.299948, 0.100156, 0.000000, 0.250000, 0.099896, 0.150104, 0.099896, 0.000000},
}};

constexpr std::array<Row8, 8> kMessy{{
    {0.250000, 0.250000, 0.250000, 0.250000, 0.000000, 0.000000, 0.000000, 0.000000},
    {0.200000, 0.000000, 0.200000, 0.200000, 0.200000, 0.200000, 0.000000, 0.000000},
    {0.000000, 0.000000, 0.000000, 0.250000, 0.250000, 0.250000, 0.250000, 0.000000},
    {0.000000, 0.200000, 0.200000, 0.000000, 0.000000, 0.200000, 0.200000, 0.200000},
    {0.225000, 0.125000, 0.225000, 0.225000, 0.100000, 0.100000, 0.000000, 0.000000},
    {0.000000, 0.100000, 0.100000, 0.125000, 0.125000, 0.225000, 0.225000, 0.100000},
    {0.140000, 0.060000, 0.200000, 0.140000, 0.140000, 0.200000, 0.060000, 0.060000},
    {0.150000, 0.150000, 0.150000, 0.250000, 0.100000, 0.100000, 0.100000, 0.000000},
}};

MatrixXd from_fixture(const std::array<Row8, 8>& rows) {
  MatrixXd p(8, 8);
  for (int g = 0; g < 8; ++g)
    for (int d = 0; d < 8; ++d) p(g, d) = rows[g][d];
  for (int g = 0; g < 8; ++g) p.row(g) /= p.row(g).sum();
  return p;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::DemoGroups: return "demo_groups";
    case Provenance::FullRank: return "full_rank";
    case Provenance::RankDef: return "rank_def";
    case Provenance::Messy: return "messy";
    case Provenance::FromCounts: return "from_counts";
    case Provenance::Custom: return "custom";
  }
  return "custom";
}

Provenance builtin_partition_from_string(std::string_view s) {
  if (s == "demo_groups" || s == "DemoGroups" || s == "demogroups") return Provenance::DemoGroups;
  if (s == "full_rank" || s == "FullRank" || s == "fullrank") return Provenance::FullRank;
  if (s == "rank_def" || s == "RankDef" || s == "rankdef") return Provenance::RankDef;
  if (s == "messy" || s == "Messy") return Provenance::Messy;
  throw ConfigError("unknown partition kind '" + std::string(s) + "'");
}

CompositionMatrix::CompositionMatrix(MatrixXd p, Provenance provenance, double tol)
    : p_(std::move(p)), provenance_(provenance) {
  if (p_.rows() < 1 || p_.cols() < 1) throw DimensionError("composition matrix must be at least 1 x 1");
  if (!p_.allFinite() || (p_.array() < 0.0).any()) throw ConfigError("composition entries must be finite and >= 0");
  for (Eigen::Index g = 0; g < p_.rows(); ++g)
    if (std::abs(p_.row(g).sum() - 1.0) > tol)
      throw ConfigError("composition row " + std::to_string(g) + " does not sum to 1");
}

CompositionMatrix build_builtin_partition(Provenance kind) {
  switch (kind) {
    case Provenance::DemoGroups: return {MatrixXd::Identity(8, 8), kind};
    case Provenance::FullRank: return {from_fixture(kFullRank), kind};
    case Provenance::RankDef: return {from_fixture(kRankDef), kind};
    case Provenance::Messy: return {from_fixture(kMessy), kind};
    default: break;
  }
  throw ConfigError("unsupported built-in partition kind '" + std::string(to_string(kind)) + "'");
}

CompositionMatrix build_from_counts(const Eigen::MatrixXi& counts) {
  if (counts.rows() < 1 || counts.cols() < 1) throw DimensionError("count matrix must be at least 1 x 1");
  if ((counts.array() < 0).any()) throw DomainError("counts must be nonnegative");
  MatrixXd p = counts.cast<double>();
  for (Eigen::Index g = 0; g < p.rows(); ++g) {
    const double s = p.row(g).sum();
    if (s <= 0.0) throw DomainError("count row " + std::to_string(g) + " is all zero");
    p.row(g) /= s;
  }
  return {std::move(p), Provenance::FromCounts};
}

CompositionMatrix random_composition(int n_regions, int n_groups, Rng& rng) {
  if (n_regions < 1 || n_groups < 1) throw ConfigError("composition sizes must be >= 1");
  std::exponential_distribution<double> draw(1.0);
  MatrixXd p(n_regions, n_groups);
  for (int g = 0; g < n_regions; ++g) {
    for (int d = 0; d < n_groups; ++d) p(g, d) = draw(rng);
    p.row(g) /= p.row(g).sum();
  }
  return {std::move(p), Provenance::Custom};
}

PartitionDiagnostics diagnostics(const CompositionMatrix& p, double rank_tol) {
  Eigen::JacobiSVD<MatrixXd> svd(p.matrix());
  PartitionDiagnostics out;
  out.singular_values = svd.singularValues();
  const int k = static_cast<int>(out.singular_values.size());
  out.sigma_max = k > 0 ? out.singular_values(0) : 0.0;
  // Only min(G, K) singular values exist; a wide P has a nontrivial null space.
  const bool wide = p.n_groups() > p.n_regions();
  out.sigma_min = (k > 0 && !wide) ? out.singular_values(k - 1) : 0.0;
  out.rank = 0;
  for (int i = 0; i < k; ++i)
    if (out.singular_values(i) > rank_tol * out.sigma_max) ++out.rank;
  out.condition_number = (out.rank == p.n_groups() && out.sigma_min > 0.0)
                             ? out.sigma_max / out.sigma_min
                             : std::numeric_limits<double>::infinity();
  return out;
}

std::vector<std::string> group_labels(int n_groups) {
  if (n_groups == 8) return {"<30M", "<30F", "30-40M", "30-40F", "40-50M", "40-50F", ">50M", ">50F"};
  std::vector<std::string> out;
  for (int d = 0; d < n_groups; ++d) out.push_back("d" + std::to_string(d));
  return out;
}

void write_composition_csv(const CompositionMatrix& p, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "region";
  for (const auto& l : group_labels(p.n_groups())) os << ',' << l;
  os << '\n';
  for (int g = 0; g < p.n_regions(); ++g) {
    os << g;
    for (int d = 0; d < p.n_groups(); ++d) os << ',' << csv::format_double(p(g, d));
    os << '\n';
  }
}

CompositionMatrix read_composition_csv(const std::filesystem::path& path, bool counts) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 2) throw ConfigError(path.string() + ": expected header 'region,<group labels...>'");
  const int k = static_cast<int>(t.header.size()) - 1;
  const int g = static_cast<int>(t.rows.size());
  if (g < 1) throw ConfigError(path.string() + ": no data rows");
  if (counts) {
    Eigen::MatrixXi c(g, k);
    for (int r = 0; r < g; ++r) {
      if (static_cast<int>(t.rows[r].size()) != k + 1) throw ConfigError(path.string() + ": ragged row");
      for (int d = 0; d < k; ++d) c(r, d) = static_cast<int>(csv::parse_long(t.rows[r][d + 1]));
    }
    return build_from_counts(c);
  }
  MatrixXd p(g, k);
  for (int r = 0; r < g; ++r) {
    if (static_cast<int>(t.rows[r].size()) != k + 1) throw ConfigError(path.string() + ": ragged row");
    for (int d = 0; d < k; ++d) p(r, d) = csv::parse_double(t.rows[r][d + 1]);
  }
  return {std::move(p), Provenance::Custom, 1e-9};
}

}  // namespace atlas
