#include <doctest.h>

#include <cmath>

#include "atlas/divergence.hpp"
#include "atlas/partitions.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/tilt_fit.hpp"
#include "support/helpers.hpp"

using namespace atlas;
using namespace testing_support;

namespace {

WorldConfig small_config(std::uint64_t seed = 7) {
  WorldConfig c;
  c.n_pois = 3;
  c.n_categories = 2;
  c.n_groups = 2;
  c.n_regions = 2;
  c.horizon = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("catalog invariants hold for generated worlds") {
  WorldConfig c;
  c.n_pois = 23;
  c.n_categories = 5;
  const World w = build_world(c);
  CHECK(w.catalog.vocab() == 23);
  CHECK_NOTHROW(w.catalog.validate());
  for (const Poi& p : w.catalog.pois) {
    CHECK(p.category == p.id % 5);
    CHECK(p.lat >= c.grid.lat_min);
    CHECK(p.lat <= c.grid.lat_max);
    CHECK(p.lon >= c.grid.lon_min);
    CHECK(p.lon <= c.grid.lon_max);
  }
  CHECK_NOTHROW(w.model.base.validate(1e-12));
  CHECK(w.model.base.transition.minCoeff() > 0.0);
}

TEST_CASE("invalid configs are rejected") {
  WorldConfig c;
  c.n_pois = 0;
  CHECK_THROWS_AS(build_world(c), ConfigError);
  c = WorldConfig{};
  c.n_categories = c.n_pois + 1;
  CHECK_THROWS_AS(build_world(c), ConfigError);
  c = WorldConfig{};
  c.tilt_scale = -1;
  CHECK_THROWS_AS(build_world(c), ConfigError);
}

TEST_CASE("same config and seed give bit-identical worlds") {
  const WorldConfig c = small_config(11);
  const World a = build_world(c), b = build_world(c);
  CHECK(a.catalog == b.catalog);
  CHECK(a.model.base.initial == b.model.base.initial);
  CHECK(a.model.base.transition == b.model.base.transition);
  for (int d = 0; d < c.n_groups; ++d) CHECK(a.model.tilts[d] == b.model.tilts[d]);
  WorldConfig c2 = c;
  c2.seed = 12;
  CHECK(build_world(c2).model.base.transition != a.model.base.transition);
}

TEST_CASE("group path probabilities sum to one over all V^T paths") {
  const World w = build_world(small_config(7));
  for (int d = 0; d < 2; ++d) {
    const ChainMarginals m = w.model.group_marginals(d);
    double total = 0.0;
    oracle::for_each_path(3, 2, [&](const oracle::Path& x) {
      double p = m.position(0, x[0]);
      p *= m.step_conditional(0)(x[0], x[1]);
      total += p;
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const auto e = oracle::enumerate(to_std(w.model.base.initial), to_std(w.model.base.transition),
                                     to_std(w.model.tilts[d]), 2);
    double s = 0;
    for (const auto& [x, p] : e.prob) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("zero tilt scale makes every group equal to the base chain") {
  WorldConfig c;
  c.tilt_scale = 0.0;
  const World w = build_world(c);
  const VectorXd base = tilted_poi_mean(w.model.base, VectorXd::Zero(c.n_pois));
  for (int d = 0; d < c.n_groups; ++d) {
    const VectorXd mu = w.model.group_marginals(d).position.colwise().mean().transpose();
    CHECK(js_divergence(mu, base) < 1e-15);
  }
}

TEST_CASE("zero-tilt samples reproduce the base transitions") {
  WorldConfig c;
  c.n_pois = 4;
  c.horizon = 6;
  c.tilt_scale = 0.0;
  const World w = build_world(c);
  const GroupSamplers s(w.model);
  Rng rng = make_rng(3);
  MatrixXd counts = MatrixXd::Zero(4, 4);
  for (int i = 0; i < 100000; ++i) {
    const Trajectory t = s.sample(i % c.n_groups, rng);
    for (std::size_t k = 1; k < t.tokens.size(); ++k) counts(t.tokens[k - 1], t.tokens[k]) += 1;
  }
  for (int u = 0; u < 4; ++u) {
    const double n = counts.row(u).sum();
    for (int v = 0; v < 4; ++v) {
      const double p = w.model.base.transition(u, v);
      CHECK(std::abs(counts(u, v) / n - p) <= 3.5 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("single-step tilt with lambda = [log 3, 0] samples token 0 with probability 3/4") {
  GroundTruthModel m;
  m.base.horizon = 1;
  m.base.initial = VectorXd::Constant(2, 0.5);
  m.base.transition = MatrixXd::Constant(2, 2, 0.5);
  VectorXd l(2);
  l << std::log(3.0), 0.0;
  m.tilts = {l};
  Rng rng = make_rng(1);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Trajectory t = sample_trajectory(m, 0, rng);
    REQUIRE(t.tokens.size() == 1u);
    zeros += t.tokens[0] == 0;
  }
  CHECK(std::abs(zeros / double(n) - 0.75) < 4 * std::sqrt(0.75 * 0.25 / n));
  CHECK_THROWS_AS(sample_trajectory(m, 1, rng), DomainError);
  CHECK_THROWS_AS(sample_trajectory(m, -1, rng), DomainError);
}

TEST_CASE("samples have length T and valid tokens; streams are reproducible") {
  WorldConfig c;
  const World w = build_world(c);
  Rng a = make_rng(5), b = make_rng(5);
  for (int i = 0; i < 200; ++i) {
    const Trajectory t = sample_trajectory(w.model, i % c.n_groups, a);
    CHECK(static_cast<int>(t.tokens.size()) == c.horizon);
    for (PoiId x : t.tokens) CHECK((x >= 0 && x < c.n_pois));
    CHECK(t == sample_trajectory(w.model, i % c.n_groups, b));
  }
}

TEST_CASE("sample_population: identity composition labels match regions") {
  WorldConfig c;
  c.n_groups = 3;
  const World w = build_world(c);
  const CompositionMatrix p(MatrixXd::Identity(3, 3), Provenance::Custom);
  Rng rng = make_rng(2);
  const std::vector<int> n{5, 7, 3};
  const auto pop = sample_population(w.model, p, n, rng);
  CHECK(pop.size() == 15u);
  for (const auto& t : pop) CHECK(t.group_label == t.region_id);
  CHECK(sample_population(w.model, p, std::vector<int>{0, 0, 0}, rng).empty());
  CHECK_THROWS_AS(sample_population(w.model, p, std::vector<int>{1, -1, 0}, rng), DomainError);
  CHECK_THROWS_AS(sample_population(w.model, p, std::vector<int>{1, 1}, rng), DimensionError);
}

TEST_CASE("sample_population: balanced mixture label frequency concentrates at 1/2") {
  WorldConfig c;
  c.n_groups = 2;
  c.horizon = 2;
  const World w = build_world(c);
  MatrixXd pm(1, 2);
  pm << 0.5, 0.5;
  const CompositionMatrix p(pm, Provenance::Custom);
  Rng rng = make_rng(4);
  const int n = 100000;
  const auto pop = sample_population(w.model, p, std::vector<int>{n}, rng);
  double zeros = 0;
  for (const auto& t : pop) zeros += *t.group_label == 0;
  CHECK(std::abs(zeros / n - 0.5) <= 3 * std::sqrt(0.25 / n));
}

TEST_CASE("transition-tilt worlds store row-stochastic group chains") {
  WorldConfig c;
  c.tilt_target = TiltTarget::Transition;
  const World w = build_world(c);
  REQUIRE(static_cast<int>(w.model.group_transitions.size()) == c.n_groups);
  for (const auto& m : w.model.group_transitions) {
    CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(m.minCoeff() > 0.0);
  }
  for (const auto& t : w.model.tilts) CHECK(t.isZero());
  CHECK(w.model.group_transitions[0] != w.model.group_transitions[1]);
}
