#include "atlas/tilt_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atlas/divergence.hpp"

namespace atlas {

namespace {

// Minimum-norm solution of H x = b for symmetric PSD H.
VectorXd sym_pinv_solve(const MatrixXd& h, const VectorXd& b, double rel = 1e-12) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  const VectorXd& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  VectorXd c = es.eigenvectors().transpose() * b;
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = ev(i) > rel * top ? c(i) / ev(i) : 0.0;
  return es.eigenvectors() * c;
}

void center(VectorXd& x) { x.array() -= x.mean(); }

double dual_value_only(const BaseChain& base, const FeatureMap& map, const VectorXd& eta, const VectorXd& target,
                       int scale) {
  return log_partition(map.tilt(base, eta)) - scale * eta.dot(target);
}

}  // namespace

BaseChain fit_base_chain(std::span<const Trajectory> trajectories, int vocab, double smoothing_eps) {
  if (trajectories.empty()) throw DomainError("fit_base_chain: no trajectories");
  if (vocab < 1) throw ConfigError("fit_base_chain: V must be >= 1");
  if (!(smoothing_eps >= 0.0)) throw ConfigError("fit_base_chain: smoothing must be >= 0");
  const int horizon = static_cast<int>(trajectories.front().tokens.size());
  if (horizon < 1) throw DomainError("fit_base_chain: empty trajectory");

  VectorXd first = VectorXd::Zero(vocab);
  MatrixXd bigram = MatrixXd::Zero(vocab, vocab);
  for (const auto& t : trajectories) {
    if (static_cast<int>(t.tokens.size()) != horizon) throw DomainError("fit_base_chain: trajectories differ in length");
    for (PoiId x : t.tokens)
      if (x < 0 || x >= vocab) throw DomainError("fit_base_chain: token outside vocabulary");
    first(t.tokens[0]) += 1.0;
    for (int i = 0; i + 1 < horizon; ++i) bigram(t.tokens[i], t.tokens[i + 1]) += 1.0;
  }

  BaseChain b;
  b.horizon = horizon;
  const double n = static_cast<double>(trajectories.size());
  b.initial = (first.array() + smoothing_eps) / (n + vocab * smoothing_eps);
  b.transition.resize(vocab, vocab);
  for (int u = 0; u < vocab; ++u) {
    const double from = bigram.row(u).sum();
    if (from + vocab * smoothing_eps > 0.0)
      b.transition.row(u) = (bigram.row(u).array() + smoothing_eps) / (from + vocab * smoothing_eps);
    else
      b.transition.row(u).setConstant(1.0 / vocab);  // state never left, no smoothing
  }
  return b;
}

std::pair<double, ChainMarginals> forward_log_partition(const BaseChain& base, const VectorXd& lambda) {
  if (!lambda.allFinite()) throw DomainError("tilt must be finite");
  ChainMarginals m = chain_marginals(WeightedChain::tilted(base, lambda));
  const double lz = m.log_z;
  return {lz, std::move(m)};
}

ChainMarginals tilted_marginals(const BaseChain& base, const VectorXd& lambda) {
  return forward_log_partition(base, lambda).second;
}

VectorXd tilted_poi_mean(const BaseChain& base, const VectorXd& lambda) {
  const ChainMarginals m = tilted_marginals(base, lambda);
  return m.expected_counts() / static_cast<double>(m.horizon());
}

DualValue dual_objective(const BaseChain& base, const FeatureMap& map, const VectorXd& eta,
                         const VectorXd& mu_target) {
  if (eta.size() != map.dim() || mu_target.size() != map.dim())
    throw DimensionError("dual parameters and target must have the feature dimension");
  const int scale = map.count_scale(base.horizon);
  DualValue out;
  out.marginals = chain_marginals(map.tilt(base, eta));
  const VectorXd mu = map.expected(out.marginals);
  out.value = out.marginals.log_z - scale * eta.dot(mu_target);
  out.gradient = scale * (mu - mu_target);
  return out;
}

DualResult fit_tilt_dual(const BaseChain& base, const FeatureMap& map, const VectorXd& mu_target,
                         const DualOptions& opts, const VectorXd* warm_start) {
  if (mu_target.size() != map.dim()) throw DimensionError("target must have the feature dimension");
  if (!mu_target.allFinite()) throw DomainError("target must be finite");
  const int scale = map.count_scale(base.horizon);

  DualResult res;
  VectorXd target = mu_target;
  if ((target.array() <= 0.0).any() || std::abs(target.sum() - 1.0) > 1e-9) {
    target = clip_renormalize(target, opts.clip_floor);
    res.report.target_clipped = true;
  }

  VectorXd eta = warm_start ? *warm_start : VectorXd::Zero(map.dim());
  if (eta.size() != map.dim()) throw DimensionError("warm start has the wrong dimension");
  center(eta);

  double step_hint = opts.initial_step;
  int it = 0;
  DualValue dv = dual_objective(base, map, eta, target);
  for (;; ++it) {
    const double resid = dv.gradient.lpNorm<1>() / scale;
    res.report.objective_trace.push_back(dv.value);
    res.report.final_objective = dv.value;
    res.report.grad_norm = resid;
    if (resid < opts.tol) {
      res.report.converged = true;
      break;
    }
    if (it >= opts.max_iterations) break;

    VectorXd dir;
    if (opts.method == DualMethod::Newton) {
      dir = -sym_pinv_solve(map.count_covariance(dv.marginals), dv.gradient);
      if (!(dir.dot(dv.gradient) < 0.0) || !dir.allFinite()) dir = -dv.gradient;
    } else {
      dir = -dv.gradient;
    }
    const double slope = dir.dot(dv.gradient);

    double t = opts.method == DualMethod::Newton ? 1.0 : step_hint;
    bool accepted = false;
    VectorXd trial;
    while (t > 1e-20) {
      trial = eta + t * dir;
      const double f = dual_value_only(base, map, trial, target, scale);
      if (std::isfinite(f) && f <= dv.value + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= opts.shrink;
    }
    if (!accepted) break;  // stalled at rounding level
    step_hint = std::max(opts.initial_step, 2.0 * t);
    center(trial);
    eta = trial;
    dv = dual_objective(base, map, eta, target);
  }
  res.report.iterations = it;
  res.eta = eta;
  return res;
}

DualResult fit_tilt_dual(const BaseChain& base, const VectorXd& mu_target, const DualOptions& opts) {
  std::vector<int> cats(base.vocab(), 0);
  const FeatureMap map(FeatureMapKind::PoiHistogram, std::move(cats), 1);
  return fit_tilt_dual(base, map, mu_target, opts);
}

std::string_view to_string(FitMethod m) {
  switch (m) {
    case FitMethod::Dual: return "dual";
    case FitMethod::DirectL2: return "direct_l2";
    case FitMethod::GroundTruth: return "ground_truth";
    case FitMethod::Baseline: return "baseline";
  }
  return "dual";
}

std::string_view to_string(FitMode m) { return m == FitMode::TwoStage ? "two_stage" : "direct_l2"; }

FitMode fit_mode_from_string(std::string_view s) {
  if (s == "two_stage" || s == "TwoStage" || s == "two-stage") return FitMode::TwoStage;
  if (s == "direct_l2" || s == "DirectL2" || s == "direct-l2") return FitMode::DirectL2;
  throw ConfigError("unknown fit mode '" + std::string(s) + "'");
}

WeightedChain TiltParams::group_chain(int group) const {
  if (group < 0 || group >= n_groups()) throw DomainError("group index out of range");
  return map.tilt(base, params[group]);
}

ChainMarginals TiltParams::group_marginals(int group) const { return chain_marginals(group_chain(group)); }

VectorXd TiltParams::poi_tilt(int group) const {
  if (map.is_bigram()) throw DomainError("bigram tilts have no per-POI form");
  return map.statistic(params.at(group)).node;
}

TiltParams TiltParams::baseline(const BaseChain& base, const FeatureMap& map, int n_groups) {
  return {base, map, std::vector<VectorXd>(n_groups, VectorXd::Zero(map.dim())), FitMethod::Baseline};
}

DirectL2Problem::DirectL2Problem(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p,
                                 const MatrixXd& v_hat)
    : base_(base), map_(map), p_(p.matrix()), v_hat_(v_hat), scale_(map.count_scale(base.horizon)) {
  if (v_hat.rows() != p.n_regions() || v_hat.cols() != map.dim())
    throw DimensionError("aggregates must be G x m");
}

DirectL2Problem::Evaluation DirectL2Problem::evaluate(const std::vector<VectorXd>& params) const {
  if (static_cast<int>(params.size()) != n_groups()) throw DimensionError("need one parameter vector per group");
  Evaluation e;
  e.group_means.resize(n_groups(), map_.dim());
  e.marginals.reserve(n_groups());
  for (int d = 0; d < n_groups(); ++d) {
    e.marginals.push_back(chain_marginals(map_.tilt(base_, params[d])));
    e.group_means.row(d) = map_.expected(e.marginals.back()).transpose();
  }
  e.residual = p_ * e.group_means - v_hat_;
  e.loss = e.residual.squaredNorm();
  return e;
}

std::vector<VectorXd> DirectL2Problem::gradient(const Evaluation& e) const {
  // dL/dmu_d = 2 sum_g P[g,d] r_g; dmu_d/deta_d = Cov(F)/scale (symmetric).
  const MatrixXd w = 2.0 * p_.transpose() * e.residual;
  std::vector<VectorXd> g;
  g.reserve(n_groups());
  for (int d = 0; d < n_groups(); ++d)
    g.push_back(map_.count_covariance_times(e.marginals[d], w.row(d).transpose()) / scale_);
  return g;
}

void fill_aggregate_report(FitReport& report, const MatrixXd& v_model, const MatrixXd& v_hat) {
  report.eps_opt = (v_model - v_hat).norm();
  report.aggregate_js.clear();
  report.aggregate_tv.clear();
  for (Eigen::Index g = 0; g < v_hat.rows(); ++g) {
    const VectorXd a = v_model.row(g).transpose().cwiseMax(0.0);
    const VectorXd b = v_hat.row(g).transpose().cwiseMax(0.0);
    report.aggregate_js.push_back(js_divergence(a, b));
    report.aggregate_tv.push_back(tv_distance(a, b));
  }
}

namespace {

AtlasFit fit_two_stage(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p,
                       const AggregateMatrix& v_hat, const AtlasOptions& opts,
                       const std::vector<VectorXd>* warm_start) {
  AtlasFit out{TiltParams{base, map, {}, FitMethod::Dual}, {}, std::nullopt, {}};
  out.recovery = recover_group_means(p, v_hat.values, opts.rcond);
  const int k = p.n_groups();
  out.report.converged = true;
  MatrixXd m_theta(k, map.dim());
  for (int d = 0; d < k; ++d) {
    bool clipped = false;
    const VectorXd target = clip_renormalize(out.recovery->m_hat.row(d).transpose(), opts.dual.clip_floor, &clipped);
    DualResult r = fit_tilt_dual(base, map, target, opts.dual, warm_start ? &(*warm_start)[d] : nullptr);
    r.report.target_clipped = r.report.target_clipped || clipped;
    out.report.iterations += r.report.iterations;
    out.report.converged = out.report.converged && r.report.converged;
    out.report.target_clipped = out.report.target_clipped || r.report.target_clipped;
    out.report.grad_norm = std::max(out.report.grad_norm, r.report.grad_norm);
    m_theta.row(d) = map.expected(chain_marginals(map.tilt(base, r.eta))).transpose();
    out.tilts.params.push_back(std::move(r.eta));
    out.group_reports.push_back(std::move(r.report));
  }
  const MatrixXd v_model = p.matrix() * m_theta;
  out.report.final_objective = (v_model - v_hat.values).squaredNorm();
  fill_aggregate_report(out.report, v_model, v_hat.values);
  return out;
}

AtlasFit fit_direct_l2(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p,
                       const AggregateMatrix& v_hat, const AtlasOptions& opts,
                       const std::vector<VectorXd>* warm_start) {
  const int k = p.n_groups();
  const int scale = map.count_scale(base.horizon);
  DirectL2Problem problem(base, map, p, v_hat.values);
  const MatrixXd pinv = pseudo_inverse(p.matrix(), opts.rcond);

  std::vector<VectorXd> params = warm_start ? *warm_start : std::vector<VectorXd>(k, VectorXd::Zero(map.dim()));
  for (auto& x : params) center(x);

  AtlasFit out{TiltParams{base, map, {}, FitMethod::DirectL2}, {}, std::nullopt, {}};
  FitReport& rep = out.report;
  auto e = problem.evaluate(params);
  double step_hint = opts.dual.initial_step;
  // Levenberg-Marquardt damping relative to each Jacobian's top eigenvalue;
  // raised when the Gauss-Newton step fails the line search.
  constexpr double kMinDamping = 1e-10, kMaxDamping = 1e6;
  double damping = 0.0;
  int it = 0;
  for (;; ++it) {
    const MatrixXd moment_step = -pinv * e.residual;  // K x m
    rep.grad_norm = moment_step.norm();
    rep.final_objective = e.loss;
    rep.objective_trace.push_back(e.loss);
    if (rep.grad_norm < opts.direct_tol) {
      rep.converged = true;
      break;
    }
    if (it >= opts.direct_max_iterations) break;

    const std::vector<VectorXd> grad = problem.gradient(e);
    const bool gauss_newton = opts.direct_method == DirectMethod::GaussNewton;
    std::vector<Eigen::SelfAdjointEigenSolver<MatrixXd>> jac;
    if (gauss_newton)
      for (int d = 0; d < k; ++d) jac.emplace_back(map.count_covariance(e.marginals[d]) / scale);

    std::vector<VectorXd> dir(k), trial(k);
    DirectL2Problem::Evaluation te;
    bool accepted = false;
    for (;;) {
      const bool use_gn = gauss_newton && damping <= kMaxDamping;
      double slope = 0.0;
      if (use_gn) {
        for (int d = 0; d < k; ++d) {
          const VectorXd& ev = jac[d].eigenvalues();
          const double top = ev.cwiseAbs().maxCoeff();
          VectorXd c = jac[d].eigenvectors().transpose() * moment_step.row(d).transpose();
          for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = ev(i) > 1e-12 * top ? c(i) / (ev(i) + damping * top) : 0.0;
          dir[d] = jac[d].eigenvectors() * c;
          slope += dir[d].dot(grad[d]);
        }
      }
      if (!use_gn || !(slope < 0.0)) {
        slope = 0.0;
        for (int d = 0; d < k; ++d) {
          dir[d] = -grad[d];
          slope += dir[d].dot(grad[d]);
        }
      }
      if (!(slope < 0.0)) break;

      double t = use_gn ? 1.0 : step_hint;
      const double t_min = use_gn ? 1e-4 : 1e-30;
      while (t > t_min) {
        for (int d = 0; d < k; ++d) trial[d] = params[d] + t * dir[d];
        te = problem.evaluate(trial);
        if (std::isfinite(te.loss) && te.loss <= e.loss + opts.dual.armijo_c * t * slope) {
          accepted = true;
          break;
        }
        t *= opts.dual.shrink;
      }
      if (accepted) {
        if (!use_gn) step_hint = 2.0 * t;
        break;
      }
      if (!use_gn) break;
      damping = std::max(kMinDamping, 10.0 * damping);
    }
    if (!accepted) break;
    damping = damping <= kMinDamping ? 0.0 : damping / 10.0;
    for (auto& x : trial) center(x);
    params = std::move(trial);
    e = std::move(te);
  }
  rep.iterations = it;
  out.tilts.params = std::move(params);
  fill_aggregate_report(rep, p.matrix() * e.group_means, v_hat.values);
  return out;
}

}  // namespace

AtlasFit atlas_fit(const BaseChain& base, const FeatureMap& map, const CompositionMatrix& p,
                   const AggregateMatrix& v_hat, const AtlasOptions& opts, const std::vector<VectorXd>* warm_start) {
  if (v_hat.rows() != p.n_regions()) throw DimensionError("aggregates must have one row per region");
  if (v_hat.cols() != map.dim()) throw DimensionError("aggregate columns must equal the feature dimension");
  if (base.vocab() != map.vocab()) throw DimensionError("base chain vocabulary does not match feature map");
  if (warm_start && static_cast<int>(warm_start->size()) != p.n_groups())
    throw DimensionError("warm start needs one vector per group");
  map.check_horizon(base.horizon);
  return opts.mode == FitMode::TwoStage ? fit_two_stage(base, map, p, v_hat, opts, warm_start)
                                        : fit_direct_l2(base, map, p, v_hat, opts, warm_start);
}

}  // namespace atlas
