#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "atlas/features.hpp"
#include "atlas/partitions.hpp"
#include "atlas/recovery.hpp"
#include "atlas/tilt_fit.hpp"
#include "support/helpers.hpp"

using namespace atlas;
using namespace testing_support;

namespace {

PoiCatalog catalog_with(std::vector<int> cats, int C) {
  PoiCatalog c;
  c.n_categories = C;
  for (std::size_t i = 0; i < cats.size(); ++i) c.pois.push_back({static_cast<PoiId>(i), 38.9, -77.0, cats[i]});
  return c;
}

GroundTruthModel small_model(int V, int T, int K, std::uint64_t seed) {
  GroundTruthModel m;
  m.base = random_chain(V, T, seed);
  for (int d = 0; d < K; ++d) m.tilts.push_back(random_vector(V, seed * 10 + d));
  return m;
}

}  // namespace

TEST_CASE("poi histogram of [0,0,1]") {
  const FeatureMap f(FeatureMapKind::PoiHistogram, catalog_with({0, 1, 0}, 2));
  const VectorXd h = f.apply(std::vector<PoiId>{0, 0, 1});
  CHECK(h(0) == doctest::Approx(2.0 / 3));
  CHECK(h(1) == doctest::Approx(1.0 / 3));
  CHECK(h(2) == 0.0);
}

TEST_CASE("category transition of [0,1,0] is row-major over (from, to)") {
  const FeatureMap f(FeatureMapKind::CategoryTransition, catalog_with({0, 1, 0}, 2));
  CHECK(f.dim() == 4);
  const VectorXd h = f.apply(std::vector<PoiId>{0, 1, 0});
  CHECK(h(0) == 0.0);
  CHECK(h(1) == doctest::Approx(0.5));
  CHECK(h(2) == doctest::Approx(0.5));
  CHECK(h(3) == 0.0);
}

TEST_CASE("feature vectors are probability vectors with L2 norm <= 1") {
  const PoiCatalog cat = catalog_with({0, 1, 2, 0, 1}, 3);
  Rng rng = make_rng(1);
  std::uniform_int_distribution<int> tok(0, 4);
  for (auto kind : {FeatureMapKind::PoiHistogram, FeatureMapKind::CategoryHistogram,
                    FeatureMapKind::CategoryTransition}) {
    const FeatureMap f(kind, cat);
    for (int i = 0; i < 100; ++i) {
      std::vector<PoiId> x(2 + i % 7);
      for (auto& v : x) v = tok(rng);
      const VectorXd h = f.apply(x);
      CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(h.minCoeff() >= 0.0);
      CHECK(h.norm() <= 1.0 + 1e-15);
    }
  }
}

TEST_CASE("feature map errors") {
  const FeatureMap f(FeatureMapKind::PoiHistogram, catalog_with({0, 1}, 2));
  CHECK_THROWS_AS(f.apply(std::vector<PoiId>{0, 2}), DomainError);
  CHECK_THROWS_AS(f.apply(std::vector<PoiId>{}), DomainError);
  const FeatureMap b(FeatureMapKind::CategoryTransition, catalog_with({0, 1}, 2));
  CHECK_THROWS_AS(b.apply(std::vector<PoiId>{1}), DomainError);
  CHECK_THROWS_AS(b.check_horizon(1), DomainError);
  CHECK_THROWS_AS(feature_map_from_string("poi_bigram"), ConfigError);
  CHECK(feature_map_from_string("category_histogram") == FeatureMapKind::CategoryHistogram);
}

TEST_CASE("exact group means match path enumeration for every map kind") {
  const std::vector<int> cats{0, 1, 0};
  const PoiCatalog cat = catalog_with(cats, 2);
  for (int T : {2, 3, 4}) {
    const GroundTruthModel m = small_model(3, T, 2, 50 + T);
    for (auto kind : {FeatureMapKind::PoiHistogram, FeatureMapKind::CategoryHistogram,
                      FeatureMapKind::CategoryTransition}) {
      const FeatureMap f(kind, cat);
      const AggregateMatrix a = exact_group_means(f, m);
      CHECK_FALSE(a.rows_are_regions);
      for (int d = 0; d < 2; ++d) {
        const auto e = oracle::enumerate(to_std(m.base.initial), to_std(m.base.transition), to_std(m.tilts[d]), T);
        oracle::Vec mean(f.dim(), 0.0);
        for (const auto& [x, p] : e.prob) {
          oracle::Vec h;
          if (kind == FeatureMapKind::PoiHistogram) {
            h.assign(3, 0.0);
            for (int v : x) h[v] += 1.0 / T;
          } else if (kind == FeatureMapKind::CategoryHistogram) {
            h = oracle::category_hist(x, cats, 2);
          } else {
            h = oracle::category_bigram_hist(x, cats, 2);
          }
          for (int i = 0; i < f.dim(); ++i) mean[i] += p * h[i];
        }
        CHECK(max_abs_diff(to_std(VectorXd(a.values.row(d).transpose())), mean) < 1e-12);
        CHECK(a.values.row(d).sum() == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero tilt: all group means equal the base occupancy") {
  GroundTruthModel m = small_model(4, 5, 3, 9);
  for (auto& t : m.tilts) t.setZero();
  const FeatureMap f(FeatureMapKind::PoiHistogram, catalog_with({0, 1, 0, 1}, 2));
  const AggregateMatrix a = exact_group_means(f, m);
  const VectorXd occ = tilted_poi_mean(m.base, VectorXd::Zero(4));
  for (int d = 0; d < 3; ++d) CHECK((a.values.row(d).transpose() - occ).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single-step tilt closed form: row [0.75, 0.25]") {
  GroundTruthModel m;
  m.base.horizon = 1;
  m.base.initial = VectorXd::Constant(2, 0.5);
  m.base.transition = MatrixXd::Constant(2, 2, 0.5);
  VectorXd l(2);
  l << std::log(3.0), 0.0;
  m.tilts = {l};
  const AggregateMatrix a = exact_group_means(FeatureMap(FeatureMapKind::PoiHistogram, catalog_with({0, 0}, 1)), m);
  CHECK(a.values(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(a.values(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("exact regional aggregates: identity, convex combination, normalization, linearity") {
  AggregateMatrix m;
  m.values = MatrixXd::Identity(2, 2);
  m.rows_are_regions = false;
  CHECK(exact_regional_aggregates(CompositionMatrix(MatrixXd::Identity(2, 2), Provenance::Custom), m).values ==
        m.values);
  MatrixXd half(1, 2);
  half << 0.5, 0.5;
  const AggregateMatrix v = exact_regional_aggregates(CompositionMatrix(half, Provenance::Custom), m);
  CHECK(v.values(0, 0) == doctest::Approx(0.5));
  CHECK(v.values(0, 1) == doctest::Approx(0.5));
  CHECK(v.rows_are_regions);

  Rng rng = make_rng(4);
  const CompositionMatrix p = random_composition(6, 4, rng);
  AggregateMatrix a, b;
  a.rows_are_regions = b.rows_are_regions = false;
  a.values = random_composition(4, 7, rng).matrix();
  b.values = random_composition(4, 7, rng).matrix();
  const MatrixXd va = exact_regional_aggregates(p, a).values;
  CHECK((va.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  AggregateMatrix ab = a;
  ab.values = 0.3 * a.values + 0.7 * b.values;
  CHECK((exact_regional_aggregates(p, ab).values - (0.3 * va + 0.7 * exact_regional_aggregates(p, b).values))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK_THROWS_AS(exact_regional_aggregates(CompositionMatrix(MatrixXd::Identity(3, 3), Provenance::Custom), a),
                  DimensionError);
}

TEST_CASE("empirical regional aggregates") {
  const FeatureMap f(FeatureMapKind::PoiHistogram, catalog_with({0, 0}, 1));
  std::vector<Trajectory> ts{{{0}, std::nullopt, 0}, {{1}, std::nullopt, 0}, {{0, 1, 1}, std::nullopt, 1}};
  const AggregateMatrix a = empirical_regional_aggregates(f, ts, 2);
  CHECK(a.values(0, 0) == doctest::Approx(0.5));
  CHECK(a.values(0, 1) == doctest::Approx(0.5));
  CHECK(a.values(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(a.sample_counts == std::vector<long>{2, 1});
  CHECK(a.min_count() == 1);
  CHECK_THROWS_AS(empirical_regional_aggregates(f, ts, 3), DomainError);
  CHECK_NOTHROW(empirical_regional_aggregates(f, ts, 3, true));
  ts.push_back({{0}, std::nullopt, std::nullopt});
  CHECK_THROWS_AS(empirical_regional_aggregates(f, ts, 2), DomainError);
}

TEST_CASE("pairwise_mean is independent of input order up to rounding and exact on constants") {
  std::vector<VectorXd> rows(1000, VectorXd::Constant(3, 0.1));
  const VectorXd m = pairwise_mean(rows, 3);
  CHECK((m.array() - 0.1).abs().maxCoeff() < 1e-16);
}

TEST_CASE("sampled aggregates fall inside the finite-sample envelope at delta = 0.01") {
  const int V = 4, T = 4, G = 2, n = 200, reps = 1000;
  GroundTruthModel m = small_model(V, T, 2, 17);
  const FeatureMap f(FeatureMapKind::PoiHistogram, catalog_with({0, 1, 0, 1}, 2));
  MatrixXd pm(2, 2);
  pm << 0.7, 0.3, 0.2, 0.8;
  const CompositionMatrix p(pm, Provenance::Custom);
  const MatrixXd exact = exact_regional_aggregates(p, exact_group_means(f, m)).values;
  // Without the 1/sigma_min amplification, the sampling term bounds ||V_hat - V||_F.
  const double eps = finite_sample_bound(1.0, V, G, n, 0.01);
  Rng rng = make_rng(99);
  int inside = 0;
  for (int r = 0; r < reps; ++r) {
    const auto pop = sample_population(m, p, std::vector<int>(G, n), rng);
    inside += (empirical_regional_aggregates(f, pop, G).values - exact).norm() <= eps;
  }
  CHECK(inside >= 990);
}

TEST_CASE("aggregate CSV round trip is bit-exact") {
  AggregateMatrix a;
  Rng rng = make_rng(3);
  a.values = random_composition(3, 5, rng).matrix();
  a.values(1, 2) = 1.0 / 3.0;
  a.sample_counts = {10, 0, 7};
  const auto path = std::filesystem::temp_directory_path() / "atlas_agg_roundtrip.csv";
  write_aggregate_csv(a, path);
  const AggregateMatrix b = read_aggregate_csv(path);
  CHECK(b.values == a.values);
  CHECK(b.sample_counts == a.sample_counts);
  CHECK(b.rows_are_regions == a.rows_are_regions);
  std::filesystem::remove(path);
}

TEST_CASE("bigram tilt matches enumeration with edge weights") {
  const std::vector<int> cats{0, 1, 1};
  const FeatureMap f(FeatureMapKind::CategoryTransition, catalog_with(cats, 2));
  const BaseChain b = random_chain(3, 3, 8);
  VectorXd eta(4);
  eta << 0.3, -0.5, 0.9, 0.1;
  const ChainMarginals m = chain_marginals(f.tilt(b, eta));
  oracle::Mat edge(3, oracle::Vec(3));
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) edge[u][v] = eta(cats[u] * 2 + cats[v]);
  const auto e = oracle::enumerate(to_std(b.initial), to_std(b.transition), oracle::Vec(3, 0.0), 3, edge);
  CHECK(m.log_z == doctest::Approx(std::log(e.z)).epsilon(1e-12));
}
