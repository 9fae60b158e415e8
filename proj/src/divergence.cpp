#include "atlas/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atlas {

namespace {

VectorXd as_distribution(const VectorXd& p) {
  if ((p.array() < 0.0).any() || !p.allFinite()) throw DomainError("histogram entries must be finite and >= 0");
  const double s = p.sum();
  if (!(s > 0.0)) throw DomainError("histogram has zero total mass");
  if (std::abs(s - 1.0) > 1e-9) return p / s;
  return p;
}

void check_sizes(const VectorXd& p, const VectorXd& q) {
  if (p.size() != q.size()) throw DimensionError("histograms must have equal length");
  if (p.size() == 0) throw DomainError("empty histogram");
}

}  // namespace

double js_divergence(const VectorXd& p_in, const VectorXd& q_in) {
  check_sizes(p_in, q_in);
  const VectorXd p = as_distribution(p_in);
  const VectorXd q = as_distribution(q_in);
  double js = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p(i) + q(i));
    if (p(i) > 0.0) js += 0.5 * p(i) * std::log2(p(i) / m);
    if (q(i) > 0.0) js += 0.5 * q(i) * std::log2(q(i) / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

double tv_distance(const VectorXd& p_in, const VectorXd& q_in) {
  check_sizes(p_in, q_in);
  return 0.5 * (as_distribution(p_in) - as_distribution(q_in)).lpNorm<1>();
}

double kl_divergence(const VectorXd& p_in, const VectorXd& q_in) {
  check_sizes(p_in, q_in);
  const VectorXd p = as_distribution(p_in);
  const VectorXd q = as_distribution(q_in);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return std::max(kl, 0.0);
}

}  // namespace atlas
