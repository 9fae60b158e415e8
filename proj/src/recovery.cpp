#include "atlas/recovery.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace atlas {

namespace {

struct TruncatedSvd {
  MatrixXd pinv;
  double sigma_min_kept = 0.0;
  int rank = 0;
};

TruncatedSvd truncated_pinv(const MatrixXd& p, double rcond) {
  Eigen::JacobiSVD<MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  VectorXd inv = VectorXd::Zero(s.size());
  TruncatedSvd out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rcond * smax && s(i) > 0.0) {
      inv(i) = 1.0 / s(i);
      out.sigma_min_kept = s(i);
      ++out.rank;
    }
  }
  out.pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

}  // namespace

MatrixXd pseudo_inverse(const MatrixXd& p, double rcond) { return truncated_pinv(p, rcond).pinv; }

RecoveryResult recover_group_means(const CompositionMatrix& p, const MatrixXd& v, double rcond) {
  if (v.rows() != p.n_regions())
    throw DimensionError("aggregates have " + std::to_string(v.rows()) + " rows, composition has " +
                         std::to_string(p.n_regions()) + " regions");
  if (!(rcond >= 0.0)) throw DomainError("rcond must be >= 0");
  const TruncatedSvd t = truncated_pinv(p.matrix(), rcond);
  RecoveryResult r;
  r.m_hat = t.pinv * v;
  r.residual_fro = (p.matrix() * r.m_hat - v).norm();
  r.sigma_min_used = t.sigma_min_kept;
  r.rank_used = t.rank;
  return r;
}

StabilityCheck stability_check(const CompositionMatrix& p, const MatrixXd& v1, const MatrixXd& v2, double rcond) {
  if (v1.rows() != v2.rows() || v1.cols() != v2.cols()) throw DimensionError("V1 and V2 must have equal shape");
  const TruncatedSvd t = truncated_pinv(p.matrix(), rcond);
  if (t.rank < p.n_groups()) throw DomainError("composition matrix is not full column rank");
  const RecoveryResult r1 = recover_group_means(p, v1, rcond);
  const RecoveryResult r2 = recover_group_means(p, v2, rcond);
  return {(r1.m_hat - r2.m_hat).norm(), (v1 - v2).norm() / t.sigma_min_kept};
}

double finite_sample_bound(double b, int m, int g, long n_min, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (n_min < 1) throw DomainError("n_min must be >= 1");
  if (!(b > 0.0) || m < 1 || g < 1) throw DomainError("need B > 0, m >= 1, G >= 1");
  const double conc = std::sqrt(static_cast<double>(m)) + std::sqrt(2.0 * std::log(g / delta));
  return b * conc / std::sqrt(static_cast<double>(n_min)) * std::sqrt(static_cast<double>(g));
}

double overall_bound(double eps_opt, double eps_samp, double sigma_min) {
  if (eps_opt < 0.0 || eps_samp < 0.0 || sigma_min < 0.0) throw DomainError("bound inputs must be >= 0");
  if (sigma_min == 0.0) return std::numeric_limits<double>::infinity();
  return (eps_opt + eps_samp) / sigma_min;
}

BoundReport make_bound_report(double eps_opt, double b, int m, int g, long n_min, double delta, double sigma_min) {
  BoundReport r;
  r.eps_samp = finite_sample_bound(b, m, g, n_min, delta);
  r.eps_opt = eps_opt;
  r.total_bound = overall_bound(eps_opt, r.eps_samp, sigma_min);
  r.sigma_min = sigma_min;
  r.delta = delta;
  r.b = b;
  r.m = m;
  r.g = g;
  r.n_min = n_min;
  return r;
}

double phi_ipm(const VectorXd& mu1, const VectorXd& mu2) {
  if (mu1.size() != mu2.size()) throw DimensionError("feature means must have equal dimension");
  return (mu1 - mu2).norm();
}

VectorXd clip_renormalize(const VectorXd& x, double floor, bool* clipped) {
  VectorXd y = x.cwiseMax(floor);
  if (clipped) *clipped = (y.array() != x.array()).any();
  return y / y.sum();
}

}  // namespace atlas
