#include <doctest.h>

#include <cmath>

#include "atlas/downstream.hpp"
#include "atlas/eval.hpp"

using namespace atlas;

namespace {

PoiCatalog catalog(int V) {
  PoiCatalog c;
  for (int i = 0; i < V; ++i) c.pois.push_back({i, 38.9 + 0.01 * i, -77.0, 0});
  return c;
}

std::vector<Trajectory> make(std::initializer_list<std::vector<PoiId>> paths) {
  std::vector<Trajectory> out;
  for (const auto& p : paths) out.push_back({p, {}, {}});
  return out;
}

}  // namespace

TEST_CASE("unsmoothed bigram from two identical trajectories") {
  const auto train = make({{0, 1}, {0, 1}});
  const NextPoiModel m = train_next_poi(train, 2, 0.0);
  CHECK(m.scores(0)(1) == 1.0);
  CHECK(m.scores(0)(0) == 0.0);
  // unseen context: uniform
  CHECK(m.scores(1)(0) == 0.5);
  CHECK(m.scores(1)(1) == 0.5);
  const DownstreamMetrics r = evaluate_next_poi(m, catalog(2), train, 1);
  CHECK(r.accuracy == 1.0);
  CHECK(r.hr_at_k == 1.0);
  CHECK(r.ndcg_at_k == 1.0);
  CHECK(r.geo_error_km == 0.0);
  CHECK(r.events == 2);
}

TEST_CASE("smoothed scores are a distribution") {
  const auto train = make({{0, 1, 2, 1}, {2, 2, 0}});
  const NextPoiModel m = train_next_poi(train, 3, 0.1);
  for (int u = 0; u < 3; ++u) CHECK(m.scores(u).sum() == doctest::Approx(1.0));
  CHECK(m.scores(1)(2) == doctest::Approx(1.1 / 1.3));
}

TEST_CASE("rank with ties broken by id and NDCG at rank three") {
  VectorXd s(4);
  s << 0.4, 0.3, 0.3, 0.0;
  CHECK(rank_of(s, 0) == 1);
  CHECK(rank_of(s, 1) == 2);
  CHECK(rank_of(s, 2) == 3);
  CHECK(rank_of(s, 3) == 4);

  // Model always ranks the truth third: NDCG = 1 / log2(4) = 0.5.
  NextPoiModel m;
  m.bigram_counts = MatrixXd::Zero(4, 4);
  m.bigram_counts(0, 1) = 5;
  m.bigram_counts(0, 2) = 4;
  m.bigram_counts(0, 3) = 3;
  m.unigram_counts = VectorXd::Constant(4, 12);
  m.smoothing_eps = 0.0;
  const DownstreamMetrics r = evaluate_next_poi(m, catalog(4), make({{0, 3}}), 3);
  CHECK(r.accuracy == 0.0);
  CHECK(r.hr_at_k == 1.0);
  CHECK(r.ndcg_at_k == doctest::Approx(0.5));
  CHECK(r.geo_error_km == doctest::Approx(haversine_km(38.91, -77.0, 38.93, -77.0)));
  const DownstreamMetrics r2 = evaluate_next_poi(m, catalog(4), make({{0, 3}}), 2);
  CHECK(r2.hr_at_k == 0.0);
  CHECK(r2.ndcg_at_k == 0.0);
}

TEST_CASE("downstream errors and short trajectories") {
  CHECK_THROWS_AS(train_next_poi(std::vector<Trajectory>{}, 3), DomainError);
  CHECK_THROWS_AS(train_next_poi(make({{0, 5}}), 3), DomainError);
  const NextPoiModel m = train_next_poi(make({{0, 1}}), 2);
  CHECK_THROWS_AS(evaluate_next_poi(m, catalog(2), make({{0}}), 1), DomainError);
  CHECK_THROWS_AS(evaluate_next_poi(m, catalog(3), make({{0, 1}}), 1), DimensionError);
  CHECK_THROWS_AS(evaluate_next_poi(m, catalog(2), make({{0, 1}}), 0), ConfigError);
  CHECK(evaluate_next_poi(m, catalog(2), make({{0}, {0, 1}}), 1).events == 1);
}

TEST_CASE("summaries are unweighted means over groups") {
  DownstreamMetrics a, b;
  a.accuracy = 0.2;
  a.events = 10;
  b.accuracy = 0.6;
  b.events = 30;
  const DownstreamReport r = summarize({a, b});
  CHECK(r.avg.accuracy == doctest::Approx(0.4));
  CHECK(r.avg.events == 40);
  CHECK(summarize({}).per_group.empty());
}
