#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "atlas/csv.hpp"
#include "atlas/divergence.hpp"
#include "atlas/eval.hpp"
#include "support/helpers.hpp"

using namespace atlas;
using namespace testing_support;

namespace {

PoiCatalog line_catalog() {
  // Four POIs spread over the default grid box.
  PoiCatalog c;
  c.n_categories = 2;
  c.pois = {{0, 38.81, -77.24, 0}, {1, 38.85, -77.10, 1}, {2, 39.00, -77.00, 0}, {3, 39.09, -76.91, 1}};
  return c;
}

std::vector<Trajectory> make(std::initializer_list<std::vector<PoiId>> paths) {
  std::vector<Trajectory> out;
  for (const auto& p : paths) out.push_back({p, {}, {}});
  return out;
}

oracle::Vec random_prob(int n, std::uint64_t seed, bool with_zeros) {
  VectorXd v = random_vector(n, seed).array().exp();
  if (with_zeros) v(seed % n) = 0.0;
  return to_std(VectorXd(v / v.sum()));
}

}  // namespace

TEST_CASE("one degree of latitude along a meridian") {
  const double d = haversine_km(0.0, 0.0, 1.0, 0.0);
  CHECK(d == doctest::Approx(111.195).epsilon(1e-5));
  CHECK(d == doctest::Approx(oracle::great_circle_km(0.0, 0.0, 1.0, 0.0)).epsilon(1e-12));
  CHECK(haversine_km(38.9, -77.0, 38.9, -77.0) == 0.0);
}

TEST_CASE("haversine agrees with the chord formula on random pairs") {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const double a = lat(rng), b = lon(rng), c = lat(rng), d = lon(rng);
    CHECK(haversine_km(a, b, c, d) == doctest::Approx(oracle::great_circle_km(a, b, c, d)).epsilon(1e-9));
    CHECK(haversine_km(a, b, c, d) == doctest::Approx(haversine_km(c, d, a, b)).epsilon(1e-14));
  }
}

TEST_CASE("JSD and TV match the reference formulas") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto p = random_prob(7, s, s % 3 == 0);
    const auto q = random_prob(7, 500 + s, s % 5 == 0);
    CHECK(std::abs(js_divergence(to_eigen(p), to_eigen(q)) - oracle::jsd_bits(p, q)) < 1e-12);
    CHECK(std::abs(tv_distance(to_eigen(p), to_eigen(q)) - oracle::tv(p, q)) < 1e-12);
    CHECK(js_divergence(to_eigen(p), to_eigen(q)) == doctest::Approx(js_divergence(to_eigen(q), to_eigen(p))));
  }
}

TEST_CASE("divergence extremes") {
  VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(js_divergence(a, b) == doctest::Approx(1.0));
  CHECK(tv_distance(a, b) == doctest::Approx(1.0));
  CHECK(js_divergence(a, a) == 0.0);
  CHECK(std::isinf(kl_divergence(a, b)));
  VectorXd unnorm(2);
  unnorm << 2, 2;
  VectorXd half(2);
  half << 0.5, 0.5;
  CHECK(js_divergence(unnorm, half) == doctest::Approx(0.0));
}

TEST_CASE("identical sets score zero on every metric") {
  const PoiCatalog c = line_catalog();
  const auto s = make({{0, 1, 2}, {3, 3, 0}, {2, 1, 1}});
  const EvalGrid g;
  const auto bins = DistanceBins::log_spaced();
  CHECK(spatial_jsd(g, c, s, s) == 0.0);
  CHECK(travel_distance_jsd(bins, c, s, s) == 0.0);
  CHECK(trip_jsd(g, c, s, s) == 0.0);
  CHECK(poi_frequency_jsd(4, s, s) == 0.0);
}

TEST_CASE("disjoint supports score one") {
  const PoiCatalog c = line_catalog();
  const auto a = make({{0, 0}, {0, 0}});
  const auto b = make({{3, 2}, {3, 2}});
  const EvalGrid g;
  CHECK(spatial_jsd(g, c, a, b) == doctest::Approx(1.0));
  CHECK(trip_jsd(g, c, a, b) == doctest::Approx(1.0));
  CHECK(poi_frequency_jsd(4, a, b) == doctest::Approx(1.0));
  // zero-length trips fall in the underflow bin; the 3->2 leg does not
  CHECK(travel_distance_jsd(DistanceBins::log_spaced(), c, a, b) == doctest::Approx(1.0));
}

TEST_CASE("distance bins: underflow, interior, overflow") {
  const auto b = DistanceBins::log_spaced(0.1, 1000.0, 20);
  CHECK(b.n_bins() == 21);
  CHECK(b.edges.front() == 0.1);
  CHECK(b.edges.back() == 1000.0);
  CHECK(b.bin_of(0.0) == 0);
  CHECK(b.bin_of(0.1) == 1);
  CHECK(b.bin_of(999.0) == 19);
  CHECK(b.bin_of(1000.0) == 20);
  CHECK(b.bin_of(1e9) == 20);
  DistanceBins bad{{1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(DistanceBins::log_spaced(0.0, 1.0, 5), ConfigError);
}

TEST_CASE("grid cells clamp at the border") {
  const EvalGrid g;
  CHECK(g.n_cells() == 1600);
  CHECK(g.cell_of(g.bbox.lat_min, g.bbox.lon_min) == 0);
  CHECK(g.cell_of(g.bbox.lat_max, g.bbox.lon_max) == 1599);
  CHECK(g.cell_of(0.0, 0.0) == g.cell_of(g.bbox.lat_min, g.bbox.lon_max));
  EvalGrid bad;
  bad.n_rows = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("length-one trajectories are trips from a cell to itself") {
  const PoiCatalog c = line_catalog();
  const auto a = make({{0}, {3}});
  const auto b = make({{0}, {0}});
  CHECK(trajectory_distance_km(c, a[0].tokens) == 0.0);
  CHECK(trip_jsd(EvalGrid{}, c, a, a) == 0.0);
  // two cells vs one: JSD of [1/2, 1/2] vs [1, 0]
  CHECK(trip_jsd(EvalGrid{}, c, a, b) == doctest::Approx(oracle::jsd_bits({0.5, 0.5}, {1.0, 0.0})));
}

TEST_CASE("evaluation input errors") {
  const PoiCatalog c = line_catalog();
  const std::vector<Trajectory> empty;
  const auto s = make({{0, 1}});
  CHECK_THROWS_AS(spatial_jsd(EvalGrid{}, c, empty, s), DomainError);
  CHECK_THROWS_AS(poi_frequency_jsd(4, s, make({{7}})), DomainError);
  CHECK_THROWS_AS(trip_jsd(EvalGrid{}, c, s, make({{}})), DomainError);
  CHECK_THROWS_AS(evaluate_groups(EvalSettings{}, c, {s}, {}), DimensionError);
}

TEST_CASE("gap closed") {
  CHECK(*gap_closed(0.2, 0.1, 0.1) == doctest::Approx(1.0));
  CHECK(*gap_closed(0.2, 0.1, 0.2) == doctest::Approx(0.0));
  CHECK(*gap_closed(0.25, 0.05, 0.142) == doctest::Approx(0.54));
  CHECK(*gap_closed(0.2, 0.1, 0.3) == doctest::Approx(-1.0));
  CHECK_FALSE(gap_closed(0.1, 0.1, 0.3).has_value());
  // invariant under a shared affine change of units
  for (double a : {0.5, 3.0})
    for (double b : {-1.0, 2.0})
      CHECK(*gap_closed(a * 0.31 + b, a * 0.07 + b, a * 0.12 + b) == doctest::Approx(*gap_closed(0.31, 0.07, 0.12)));
}

TEST_CASE("group report averages and population std") {
  const PoiCatalog c = line_catalog();
  const std::vector<std::vector<Trajectory>> real{make({{0, 1}}), make({{2, 3}})};
  const std::vector<std::vector<Trajectory>> synth{make({{0, 1}}), make({{0, 0}})};
  const GroupEvalReport r = evaluate_groups(EvalSettings{}, c, real, synth);
  CHECK(r.per_group.rows() == 2);
  CHECK(r.per_group.row(0).isZero());
  CHECK(r.average(EvalMetric::PoiFrequency) == doctest::Approx(0.5));
  CHECK(r.std(3) == doctest::Approx(0.5));

  const std::string text = group_eval_csv(r);
  const csv::Table t = csv::parse(text);
  CHECK(t.header == std::vector<std::string>{"metric", "d0", "d1", "Avg", "Std"});
  REQUIRE(t.rows.size() == 4u);
  CHECK(t.rows[3][0] == "poi_freq_jsd");
  CHECK(csv::parse_double(t.rows[3][3]) == r.avg(3));

  const auto path = std::filesystem::temp_directory_path() / "atlas_group_eval.csv";
  write_group_eval_csv(r, path);
  std::ifstream in(path);
  const std::string disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(disk == text);
  std::filesystem::remove(path);
}
