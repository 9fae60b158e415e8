#include "atlas/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace atlas {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MatrixXd safe_log(const MatrixXd& m) {
  return m.unaryExpr([](double x) { return x > 0.0 ? std::log(x) : kNegInf; });
}

VectorXd safe_log(const VectorXd& v) {
  return v.unaryExpr([](double x) { return x > 0.0 ? std::log(x) : kNegInf; });
}

double lse2(const double* xs, int n, int stride) {
  double hi = kNegInf;
  for (int i = 0; i < n; ++i) hi = std::max(hi, xs[i * stride]);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(xs[i * stride] - hi);
  return hi + std::log(s);
}

void check_chain(const WeightedChain& c) {
  const auto v = c.log_start.size();
  if (c.horizon < 1) throw ConfigError("chain horizon must be >= 1");
  if (v < 1 || c.log_step.rows() != v || c.log_step.cols() != v || c.node.size() != v)
    throw DimensionError("weighted chain: inconsistent vocabulary sizes");
}

}  // namespace

void BaseChain::validate(double tol) const {
  const auto v = initial.size();
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (v < 1 || transition.rows() != v || transition.cols() != v)
    throw DimensionError("base chain: transition must be V x V with V = initial.size()");
  if ((initial.array() < 0).any() || (transition.array() < 0).any())
    throw ConfigError("base chain: negative probability");
  if (std::abs(initial.sum() - 1.0) > tol) throw ConfigError("base chain: initial does not sum to 1");
  for (Eigen::Index u = 0; u < v; ++u)
    if (std::abs(transition.row(u).sum() - 1.0) > tol)
      throw ConfigError("base chain: transition row " + std::to_string(u) + " does not sum to 1");
}

WeightedChain WeightedChain::from_base(const BaseChain& base) {
  return {safe_log(base.initial), safe_log(base.transition), VectorXd::Zero(base.vocab()), base.horizon};
}

WeightedChain WeightedChain::tilted(const BaseChain& base, const VectorXd& node_tilt) {
  if (node_tilt.size() != base.vocab()) throw DimensionError("tilt length must equal V");
  WeightedChain c = from_base(base);
  c.node = node_tilt;
  return c;
}

double log_sum_exp(std::span<const double> xs) {
  return lse2(xs.data(), static_cast<int>(xs.size()), 1);
}

MatrixXd ChainMarginals::expected_transition_counts() const {
  MatrixXd n = MatrixXd::Zero(vocab(), vocab());
  for (const auto& p : pair) n += p;
  return n;
}

MatrixXd ChainMarginals::step_conditional(int t) const {
  MatrixXd r = pair.at(t);
  for (int u = 0; u < vocab(); ++u) {
    const double p = position(t, u);
    if (p > 0.0)
      r.row(u) /= p;
    else
      r.row(u).setZero();
  }
  return r;
}

namespace {

// Row-major log-alpha table: alpha(t, v).
MatrixXd forward_table(const WeightedChain& c) {
  const int n = c.vocab();
  const int horizon = c.horizon;
  MatrixXd alpha(horizon, n);
  alpha.row(0) = (c.log_start + c.node).transpose();
  std::vector<double> buf(n);
  for (int t = 1; t < horizon; ++t) {
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < n; ++u) buf[u] = alpha(t - 1, u) + c.log_step(u, v);
      alpha(t, v) = c.node(v) + lse2(buf.data(), n, 1);
    }
  }
  return alpha;
}

MatrixXd backward_table(const WeightedChain& c) {
  const int n = c.vocab();
  const int horizon = c.horizon;
  MatrixXd beta(horizon, n);
  beta.row(horizon - 1).setZero();
  std::vector<double> buf(n);
  for (int t = horizon - 2; t >= 0; --t) {
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) buf[v] = c.log_step(u, v) + c.node(v) + beta(t + 1, v);
      beta(t, u) = lse2(buf.data(), n, 1);
    }
  }
  return beta;
}

}  // namespace

double log_partition(const WeightedChain& chain) {
  check_chain(chain);
  const MatrixXd alpha = forward_table(chain);
  const VectorXd last = alpha.row(chain.horizon - 1).transpose();
  return log_sum_exp({last.data(), static_cast<std::size_t>(last.size())});
}

ChainMarginals chain_marginals(const WeightedChain& chain) {
  check_chain(chain);
  const int n = chain.vocab();
  const int horizon = chain.horizon;
  const MatrixXd alpha = forward_table(chain);
  const MatrixXd beta = backward_table(chain);

  ChainMarginals m;
  const VectorXd last = alpha.row(horizon - 1).transpose();
  m.log_z = log_sum_exp({last.data(), static_cast<std::size_t>(last.size())});
  if (!std::isfinite(m.log_z)) throw DomainError("tilted chain has zero or infinite total mass");

  m.position.resize(horizon, n);
  for (int t = 0; t < horizon; ++t)
    for (int v = 0; v < n; ++v) m.position(t, v) = std::exp(alpha(t, v) + beta(t, v) - m.log_z);

  m.pair.assign(horizon > 1 ? horizon - 1 : 0, MatrixXd());
  for (int t = 0; t + 1 < horizon; ++t) {
    MatrixXd& p = m.pair[t];
    p.resize(n, n);
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        p(u, v) = std::exp(alpha(t, u) + chain.log_step(u, v) + chain.node(v) + beta(t + 1, v) - m.log_z);
  }
  return m;
}

StatisticCovariance covariance_with(const ChainMarginals& m, const PathStatistic& stat) {
  const int n = m.vocab();
  const int horizon = m.horizon();
  if (stat.node.size() != n) throw DimensionError("statistic node term must have length V");
  const bool has_edge = stat.edge.size() > 0;
  if (has_edge && (stat.edge.rows() != n || stat.edge.cols() != n))
    throw DimensionError("statistic edge term must be V x V");
  const MatrixXd edge = has_edge ? stat.edge : MatrixXd::Zero(n, n);
  const VectorXd& a = stat.node;

  // b(u,v) + a(v): contribution of stepping u -> v.
  MatrixXd step_gain = edge;
  step_gain.rowwise() += a.transpose();

  // future(t, u) = E[contributions strictly after x_t | x_t = u]
  MatrixXd future = MatrixXd::Zero(horizon, n);
  std::vector<MatrixXd> fwd_cond(horizon > 1 ? horizon - 1 : 0);
  for (int t = 0; t + 1 < horizon; ++t) fwd_cond[t] = m.step_conditional(t);
  for (int t = horizon - 2; t >= 0; --t) {
    const MatrixXd& r = fwd_cond[t];
    future.row(t) = (r.cwiseProduct(step_gain).rowwise().sum() + r * future.row(t + 1).transpose()).transpose();
  }

  // past(t, v) = E[contributions strictly before x_t's own node term | x_t = v]
  MatrixXd past = MatrixXd::Zero(horizon, n);
  for (int t = 1; t < horizon; ++t) {
    const MatrixXd& p = m.pair[t - 1];
    for (int v = 0; v < n; ++v) {
      const double pv = m.position(t, v);
      if (pv <= 0.0) continue;
      double s = 0.0;
      for (int u = 0; u < n; ++u) s += p(u, v) * (past(t - 1, u) + a(u) + edge(u, v));
      past(t, v) = s / pv;
    }
  }

  StatisticCovariance out;
  out.mean = 0.0;
  for (int v = 0; v < n; ++v) out.mean += m.position(0, v) * (a(v) + future(0, v));

  const VectorXd counts = m.expected_counts();
  out.node = VectorXd::Zero(n);
  for (int t = 0; t < horizon; ++t)
    for (int v = 0; v < n; ++v) out.node(v) += m.position(t, v) * (past(t, v) + a(v) + future(t, v));
  out.node -= counts * out.mean;

  out.edge = MatrixXd::Zero(n, n);
  for (int t = 0; t + 1 < horizon; ++t) {
    const MatrixXd& p = m.pair[t];
    for (int u = 0; u < n; ++u) {
      const double before = past(t, u) + a(u);
      for (int v = 0; v < n; ++v)
        out.edge(u, v) += p(u, v) * (before + edge(u, v) + a(v) + future(t + 1, v));
    }
  }
  out.edge -= m.expected_transition_counts() * out.mean;
  return out;
}

MatrixXd visit_count_covariance(const ChainMarginals& m) {
  const int n = m.vocab();
  MatrixXd cov(n, n);
  PathStatistic s{VectorXd::Zero(n), MatrixXd()};
  for (int v = 0; v < n; ++v) {
    s.node.setZero();
    s.node(v) = 1.0;
    cov.col(v) = covariance_with(m, s).node;
  }
  return 0.5 * (cov + cov.transpose());
}

TrajectorySampler::TrajectorySampler(const ChainMarginals& m) : horizon_(m.horizon()), vocab_(m.vocab()) {
  start_cdf_.resize(vocab_);
  double acc = 0.0;
  for (int v = 0; v < vocab_; ++v) start_cdf_[v] = (acc += m.position(0, v));
  step_cdf_.reserve(horizon_ > 1 ? horizon_ - 1 : 0);
  for (int t = 0; t + 1 < horizon_; ++t) {
    // Row-major storage so each row's cdf is contiguous.
    MatrixXd r = m.step_conditional(t).transpose();
    for (int u = 0; u < vocab_; ++u) {
      double c = 0.0;
      for (int v = 0; v < vocab_; ++v) r(v, u) = (c += r(v, u));
    }
    step_cdf_.push_back(std::move(r));
  }
}

PoiId TrajectorySampler::draw(const double* cdf, int n, double u) {
  const double target = u * cdf[n - 1];
  const double* it = std::upper_bound(cdf, cdf + n, target);
  int idx = static_cast<int>(it - cdf);
  if (idx >= n) idx = n - 1;
  // Skip zero-probability entries at the boundary.
  while (idx > 0 && cdf[idx] == cdf[idx - 1]) --idx;
  return static_cast<PoiId>(idx);
}

std::vector<PoiId> TrajectorySampler::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<PoiId> out(horizon_);
  out[0] = draw(start_cdf_.data(), vocab_, unif(rng));
  for (int t = 1; t < horizon_; ++t) {
    const MatrixXd& cdf = step_cdf_[t - 1];
    out[t] = draw(cdf.data() + static_cast<Eigen::Index>(out[t - 1]) * vocab_, vocab_, unif(rng));
  }
  return out;
}

}  // namespace atlas
