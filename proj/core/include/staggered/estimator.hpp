#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "staggered/estimands.hpp"
#include "staggered/panel.hpp"

namespace staggered {

// Per-cohort sample moments. Covariances use divisor N_g - 1 and are left
// empty (0 x 0) for singleton cohorts or when not requested.
struct CohortStats {
  int t_len = 0;
  std::vector<int> sizes;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;

  int n_cohorts() const { return static_cast<int>(sizes.size()); }
};

CohortStats cohort_stats(const PanelView& view, bool with_cov = true,
                         int threads = 1);
CohortStats cohort_stats(const PanelData& panel, bool with_cov = true,
                         int threads = 1);

struct PointEstimates {
  Eigen::VectorXd theta0;  // K
  Eigen::VectorXd xhat;    // M
};

PointEstimates point_estimates(const CohortStats& stats,
                               const EstimandWeights& w,
                               const AdjustmentSpec& adj);

// Sample-analog variance blocks of (theta0_hat, xhat):
//   sum_g N_g^{-1} A_{.,g} S_g_hat A_{.,g}'.
// The inestimable -S_theta/N part is handled downstream by inference, which
// is why v_theta0 is conservative as stored.
struct VarianceComponents {
  Eigen::MatrixXd v_theta0;    // K x K
  Eigen::MatrixXd v_x_theta0;  // M x K
  Eigen::MatrixXd v_x;         // M x M, symmetric PSD
};

VarianceComponents variance_components(const CohortStats& stats,
                                       const EstimandWeights& w,
                                       const AdjustmentSpec& adj);

// Plug-in optimal coefficient: solves v_x * beta = v_x_theta0 by a pivoted
// Cholesky of the symmetric positive-definite v_x. Throws NumericError when
// v_x is numerically singular (relative pivot below 1e-10).
Eigen::MatrixXd beta_star(const VarianceComponents& components);

// Coefficient presets for the estimator family theta_hat = theta0 - beta'xhat.
struct BetaSpec {
  enum class Kind { kZero, kUnit, kPlugin, kFixed };
  Kind kind = Kind::kPlugin;
  Eigen::MatrixXd fixed;  // M x K when kFixed (1 x 1 treated as scalar fill)

  static BetaSpec zero() { return {Kind::kZero, {}}; }
  static BetaSpec unit() { return {Kind::kUnit, {}}; }
  static BetaSpec plugin() { return {Kind::kPlugin, {}}; }
  static BetaSpec fixed_scalar(double b) {
    BetaSpec s{Kind::kFixed, Eigen::MatrixXd::Constant(1, 1, b)};
    return s;
  }
};

Eigen::MatrixXd resolve_beta(const BetaSpec& spec,
                             const VarianceComponents& components,
                             const AdjustmentSpec& adj, int k_components);

struct Estimate {
  Eigen::VectorXd theta_hat;  // K
  Eigen::VectorXd theta0;     // K
  Eigen::VectorXd xhat;       // M
  Eigen::MatrixXd beta;       // M x K actually used
  std::string preset;
};

Estimate make_estimate(const PointEstimates& pts, const Eigen::MatrixXd& beta,
                       std::string preset);

}  // namespace staggered
