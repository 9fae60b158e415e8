#pragma once

#include "atlas/partitions.hpp"
#include "atlas/types.hpp"

namespace atlas {

struct RecoveryResult {
  MatrixXd m_hat;              // K x m, raw least-squares output (not projected to the simplex)
  double residual_fro = 0.0;   // ||P M_hat - V||_F
  double sigma_min_used = 0.0; // smallest singular value kept in the pseudoinverse
  int rank_used = 0;
};

inline constexpr double kDefaultRcond = 1e-8;

// Minimum-norm least squares M_hat = P^+ V via SVD; singular values below
// rcond * sigma_max are treated as zero. V is G x m, M_hat is K x m.
RecoveryResult recover_group_means(const CompositionMatrix& p, const MatrixXd& v, double rcond = kDefaultRcond);

// Moore-Penrose pseudoinverse (K x G) with the same truncation rule.
MatrixXd pseudo_inverse(const MatrixXd& p, double rcond = kDefaultRcond);

struct StabilityCheck {
  double lhs = 0.0;  // ||M1 - M2||_F
  double rhs = 0.0;  // ||V1 - V2||_F / sigma_min(P)
};

// Both sides of the perturbation inequality. Throws DomainError when P is not
// full column rank at rcond.
StabilityCheck stability_check(const CompositionMatrix& p, const MatrixXd& v1, const MatrixXd& v2,
                               double rcond = kDefaultRcond);

// Sampling term (B (sqrt(m) + sqrt(2 ln(G/delta))) / sqrt(n_min)) sqrt(G), without 1/sigma_min.
double finite_sample_bound(double b, int m, int g, long n_min, double delta);

// (eps_opt + eps_samp) / sigma_min; +inf when sigma_min == 0.
double overall_bound(double eps_opt, double eps_samp, double sigma_min);

struct BoundReport {
  double eps_samp = 0.0;
  double eps_opt = 0.0;
  double total_bound = 0.0;
  double sigma_min = 0.0;
  double delta = 0.0;
  double b = 1.0;
  int m = 0;
  int g = 0;
  long n_min = 0;
};

BoundReport make_bound_report(double eps_opt, double b, int m, int g, long n_min, double delta, double sigma_min);

// Closed-form phi-IPM between two laws with feature means mu1, mu2: ||mu1 - mu2||_2.
double phi_ipm(const VectorXd& mu1, const VectorXd& mu2);

// max(x, floor) then renormalize to sum 1. `clipped` reports whether any entry moved.
VectorXd clip_renormalize(const VectorXd& x, double floor, bool* clipped = nullptr);

}  // namespace atlas
