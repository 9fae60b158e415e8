#pragma once

// Exact transfer-matrix machinery for fixed-horizon Markov chains whose path
// measure is reweighted by per-token and per-transition log-weights:
//
//   Q(x) ∝ initial(x_0) · Π_t transition(x_t, x_{t+1}) · exp(Σ_t a(x_t) + Σ_t b(x_t, x_{t+1}))
//
// Such a measure is again Markov (with position-dependent transitions), so its
// partition function, marginals, covariances, and samples all follow from one
// forward-backward pass in log space.

#include <span>
#include <vector>

#include "atlas/types.hpp"

namespace atlas {

// Unconditioned chain: initial distribution, row-stochastic transition, horizon T.
struct BaseChain {
  VectorXd initial;
  MatrixXd transition;
  int horizon = 1;

  int vocab() const { return static_cast<int>(initial.size()); }
  // Throws ConfigError when the stochasticity invariants fail at `tol`.
  void validate(double tol = 1e-12) const;
};

// A reweighted chain in log form. Edge weights are folded into log_step.
struct WeightedChain {
  VectorXd log_start;  // log initial(v)
  MatrixXd log_step;   // log transition(u, v) + b(u, v); -inf allowed
  VectorXd node;       // a(v), added at every position
  int horizon = 1;

  int vocab() const { return static_cast<int>(log_start.size()); }

  static WeightedChain from_base(const BaseChain& base);
  static WeightedChain tilted(const BaseChain& base, const VectorXd& node_tilt);
};

struct ChainMarginals {
  MatrixXd position;          // T x V, P(x_t = v)
  std::vector<MatrixXd> pair; // T-1 entries, V x V, P(x_t = u, x_{t+1} = v)
  double log_z = 0.0;

  int horizon() const { return static_cast<int>(position.rows()); }
  int vocab() const { return static_cast<int>(position.cols()); }

  // E[# visits to v] over the whole path.
  VectorXd expected_counts() const { return position.colwise().sum().transpose(); }
  // E[# transitions u -> v].
  MatrixXd expected_transition_counts() const;
  // P(x_{t+1} = v | x_t = u); rows of unreachable states are zero.
  MatrixXd step_conditional(int t) const;
};

double log_sum_exp(std::span<const double> xs);

// Forward recursion only.
double log_partition(const WeightedChain& chain);

// Forward-backward; pair marginals are always filled.
ChainMarginals chain_marginals(const WeightedChain& chain);

// Additive path statistic S(x) = Σ_t node(x_t) + Σ_t edge(x_t, x_{t+1}).
// An empty `edge` means zero edge contribution.
struct PathStatistic {
  VectorXd node;
  MatrixXd edge;
};

struct StatisticCovariance {
  double mean = 0.0;   // E[S]
  VectorXd node;       // Cov(c_v, S)
  MatrixXd edge;       // Cov(n_uv, S)
};

// Covariance of every visit count and transition count with S, in O(T V^2).
StatisticCovariance covariance_with(const ChainMarginals& marginals, const PathStatistic& stat);

// Full V x V covariance of visit counts, Cov(c_u, c_v).
MatrixXd visit_count_covariance(const ChainMarginals& marginals);

// Exact sampler for the chain described by `marginals` (inverse-CDF per step,
// one uniform draw per token).
class TrajectorySampler {
 public:
  explicit TrajectorySampler(const ChainMarginals& marginals);

  std::vector<PoiId> sample(Rng& rng) const;
  int horizon() const { return horizon_; }
  int vocab() const { return vocab_; }

 private:
  int horizon_;
  int vocab_;
  std::vector<double> start_cdf_;
  std::vector<MatrixXd> step_cdf_;  // row-wise cumulative sums, one matrix per step

  static PoiId draw(const double* cdf, int n, double u);
};

}  // namespace atlas
