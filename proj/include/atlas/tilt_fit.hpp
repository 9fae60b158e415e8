#pragma once

// Two-phase fitting on the Markov backbone:
//   phase 1: maximum-likelihood base chain from unlabeled trajectories;
//   phase 2: per-group exponential tilts recovered from regional aggregates,
//            either by moment recovery + convex dual (TwoStage) or by
//            minimizing the squared aggregate loss directly (DirectL2).

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "atlas/chain.hpp"
#include "atlas/features.hpp"
#include "atlas/partitions.hpp"
#include "atlas/recovery.hpp"
#include "atlas/types.hpp"

namespace atlas {

BaseChain fit_base_chain(std::span<const Trajectory> trajectories, int vocab, double smoothing_eps);

// log Z(lambda) and the tilted-chain marginals for a per-POI tilt.
std::pair<double, ChainMarginals> forward_log_partition(const BaseChain& base, const VectorXd& lambda);
ChainMarginals tilted_marginals(const BaseChain& base, const VectorXd& lambda);
// Expected normalized POI histogram under the tilted chain.
VectorXd tilted_poi_mean(const BaseChain& base, const VectorXd& lambda);

enum class DualMethod { GradientDescent, Newton };

struct DualOptions {
  double tol = 1e-8;           // on ||mu_lambda - mu_target||_1
  int max_iterations = 10000;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
  double clip_floor = 1e-9;
  DualMethod method = DualMethod::Newton;
};

struct FitReport {
  int iterations = 0;
  double final_objective = 0.0;
  double grad_norm = 0.0;  // stationarity measure compared against the tolerance
  bool converged = false;
  bool target_clipped = false;
  double eps_opt = 0.0;                      // ||V_theta - V_hat||_F
  std::vector<double> aggregate_js;          // per region
  std::vector<double> aggregate_tv;          // per region
  std::vector<double> objective_trace;       // one entry per accepted iterate
};

struct DualValue {
  double value = 0.0;
  VectorXd gradient;
  ChainMarginals marginals;
};

// f(eta) = log Z(eta) - <eta, s * mu_target>, s = count scale (T or T-1).
DualValue dual_objective(const BaseChain& base, const FeatureMap& map, const VectorXd& eta,
                         const VectorXd& mu_target);

struct DualResult {
  VectorXd eta;
  FitReport report;
};

// Minimizes the convex dual; the returned eta is mean-centered.
DualResult fit_tilt_dual(const BaseChain& base, const FeatureMap& map, const VectorXd& mu_target,
                         const DualOptions& opts = {}, const VectorXd* warm_start = nullptr);

// PoiHistogram convenience overload.
DualResult fit_tilt_dual(const BaseChain& base, const VectorXd& mu_target, const DualOptions& opts = {});

enum class FitMethod { Dual, DirectL2, GroundTruth, Baseline };
std::string_view to_string(FitMethod m);

// K per-group parameter vectors in the feature space of `map` (R^V for POI histograms).
struct TiltParams {
  BaseChain base;
  FeatureMap map;
  std::vector<VectorXd> params;
  FitMethod fitted_by = FitMethod::Dual;

  int n_groups() const { return static_cast<int>(params.size()); }
  WeightedChain group_chain(int group) const;
  ChainMarginals group_marginals(int group) const;
  // Per-POI tilt; only defined for unigram feature maps.
  VectorXd poi_tilt(int group) const;

  static TiltParams baseline(const BaseChain& base, const FeatureMap& map, int n_groups);
};

enum class FitMode { TwoStage, DirectL2 };
std::string_view to_string(FitMode m);
FitMode fit_mode_from_string(std::string_view s);

enum class DirectMethod { GradientDescent, GaussNewton };

struct AtlasOptions {
  FitMode mode = FitMode::TwoStage;
  DualOptions dual;
  double rcond = kDefaultRcond;
  // DirectL2
  DirectMethod direct_method = DirectMethod::GaussNewton;
  int direct_max_iterations = 500;
  double direct_tol = 1e-10;  // on ||P^+ (V_theta - V_hat)||_F
};

struct AtlasFit {
  TiltParams tilts;
  FitReport report;
  std::optional<RecoveryResult> recovery;  // TwoStage only
  std::vector<FitReport> group_reports;    // TwoStage only
};

AtlasFit atlas_fit(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p,
                   const AggregateMatrix& v_hat, const AtlasOptions& opts = {},
                   const std::vector<VectorXd>* warm_start = nullptr);

// Squared aggregate loss sum_g ||nu_theta(g) - v_hat(g)||^2 and its exact gradient.
class DirectL2Problem {
 public:
  DirectL2Problem(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p, const MatrixXd& v_hat);

  struct Evaluation {
    double loss = 0.0;
    MatrixXd group_means;   // K x m
    MatrixXd residual;      // G x m, P M - V_hat
    std::vector<ChainMarginals> marginals;
  };

  Evaluation evaluate(const std::vector<VectorXd>& params) const;
  // K gradients, one per group parameter vector.
  std::vector<VectorXd> gradient(const Evaluation& e) const;

  int n_groups() const { return static_cast<int>(p_.cols()); }

 private:
  const BaseChain& base_;
  const FeatureMap& map_;
  MatrixXd p_;
  MatrixXd v_hat_;
  int scale_;
};

// Aggregate divergences per region between model aggregates and targets.
void fill_aggregate_report(FitReport& report, const MatrixXd& v_model, const MatrixXd& v_hat);

}  // namespace atlas
