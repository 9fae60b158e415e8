#pragma once

// Small fixtures shared by the unit and acceptance tests.

#include <random>

#include "atlas/chain.hpp"
#include "atlas/types.hpp"
#include "oracles.hpp"

namespace testing_support {

inline oracle::Vec to_std(const atlas::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline oracle::Mat to_std(const atlas::MatrixXd& m) {
  oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline atlas::VectorXd to_eigen(const oracle::Vec& v) {
  atlas::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

// Random strictly positive chain.
inline atlas::BaseChain random_chain(int V, int T, std::uint64_t seed) {
  atlas::Rng rng = atlas::make_rng(seed, 77);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  atlas::BaseChain b;
  b.horizon = T;
  b.initial.resize(V);
  b.transition.resize(V, V);
  for (int v = 0; v < V; ++v) b.initial(v) = u(rng);
  b.initial /= b.initial.sum();
  for (int r = 0; r < V; ++r) {
    for (int c = 0; c < V; ++c) b.transition(r, c) = u(rng);
    b.transition.row(r) /= b.transition.row(r).sum();
  }
  return b;
}

inline atlas::VectorXd random_vector(int n, std::uint64_t seed, double scale = 1.0) {
  atlas::Rng rng = atlas::make_rng(seed, 78);
  std::normal_distribution<double> g(0.0, scale);
  atlas::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

inline double max_abs_diff(const oracle::Vec& a, const oracle::Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing_support
