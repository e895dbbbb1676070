#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "staggered/estimands.hpp"
#include "staggered/estimator.hpp"
#include "staggered/panel.hpp"

namespace staggered {

double normal_cdf(double z);
double normal_quantile(double p);  // p in (0, 1)

// Design-based covariance of the estimator for a given coefficient matrix,
// built from the sample-analog blocks (conservative: no -S_theta/N term).
Eigen::MatrixXd estimator_covariance(const VarianceComponents& components,
                                     const Eigen::MatrixXd& beta);

// Heterogeneity correction subtracted from the conservative variance: the
// share of treatment-effect variance explained by outcomes from periods
// before the first cohort the estimand touches. Unavailable when that cohort
// starts in period 1 or a pre-period covariance is singular; callers then
// keep the conservative value.
struct Refinement {
  bool available = false;
  Eigen::MatrixXd subtracted;  // K x K
  std::string note;
};
Refinement heterogeneity_refinement(const CohortStats& stats,
                                    const EstimandWeights& w);

// Full estimate for one coefficient preset: point estimates, conservative and
// refined standard errors (already scaled as sigma_hat / sqrt(N)).
struct FitResult {
  Estimate est;
  Eigen::VectorXd se_neyman;
  Eigen::VectorXd se_refined;
  Eigen::MatrixXd cov_neyman;  // K x K
  bool refined_fell_back = false;
  std::vector<std::string> warnings;
};

FitResult fit(const PanelView& view, const EstimandWeights& w,
              const AdjustmentSpec& adj, const BetaSpec& beta,
              int threads = 1);

// Scalar conveniences (K = 1).
double neyman_se(const CohortStats& stats, const EstimandWeights& w,
                 const AdjustmentSpec& adj, const Eigen::MatrixXd& beta);
struct RefinedSe {
  double se = 0;
  bool fell_back = false;
};
RefinedSe refined_se(const CohortStats& stats, const EstimandWeights& w,
                     const AdjustmentSpec& adj, const Eigen::MatrixXd& beta);

std::pair<double, double> confidence_interval(double theta, double se,
                                              double alpha);

// Fisher randomization test machinery. The statistic is recomputed in full on
// each permuted assignment; permutations shuffle first-treatment labels
// across units, within strata when stratum ids are given. A draw on which the
// statistic is undefined (singular adjustment variance) is redrawn and
// counted; more than max_redraw_share of the draws failing is fatal.
// p-values use the (1 + #{|t_pi| >= |t_obs|}) / (B + 1) convention with ties
// counted, so the test is exact under the sharp null for any draw count.
struct FrtOptions {
  int draws = 500;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_redraw_share = 0.10;
};

struct FrtMultiOutcome {
  std::vector<double> p;  // per statistic component
  double p_max = 1.0;     // joint test on max_j |t_j|
  int draws = 0;
  long redraws = 0;
  Eigen::VectorXd observed;
};

using MultiStatistic =
    std::function<std::optional<Eigen::VectorXd>(const std::vector<int>&)>;

FrtMultiOutcome frt_multi_statistic(const std::vector<int>& first_treated,
                                    const std::vector<std::string>& strata,
                                    const MultiStatistic& statistic,
                                    const FrtOptions& options);

struct FrtOutcome {
  double p = 1.0;
  int draws = 0;
  long redraws = 0;
  double observed = 0;
};

using Statistic =
    std::function<std::optional<double>(const std::vector<int>&)>;

FrtOutcome frt_statistic(const std::vector<int>& first_treated,
                         const std::vector<std::string>& strata,
                         const Statistic& statistic, const FrtOptions& options);

// Studentized FRT for the configured estimator (plug-in coefficient and
// refined standard error recomputed on every permutation).
FrtOutcome frt(const PanelData& panel, const EstimandWeights& w,
               const AdjustmentSpec& adj, const BetaSpec& beta,
               const FrtOptions& options);

// Pre-treatment balance: component t-tests on E[xhat] = 0 plus a joint FRT
// on the max |t| statistic.
struct BalanceComponent {
  double xhat = 0;
  double se = 0;
  double t_stat = 0;
  double p_t = 1;
  double p_frt = 1;
};
struct BalanceReport {
  std::vector<BalanceComponent> components;
  double joint_p = 1;
  int draws = 0;
  long redraws = 0;
};
BalanceReport balance_test(const PanelData& panel, const AdjustmentSpec& adj,
                           const FrtOptions& options);

// Critical value c with P(max_k |Z_k| <= c) = 1 - alpha for Z ~ N(0, corr),
// simulated with a seeded deterministic stream. Simultaneous bands are then
// theta_k +/- c * se_k.
double sup_t_critical(const Eigen::MatrixXd& corr, double alpha,
                      int draws = 100000, std::uint64_t seed = 1);

// Estimator presets tying a comparison scheme to a coefficient choice.
struct Preset {
  std::string name;
  Comparison comparison = Comparison::kAuto;
  BetaSpec beta;
  bool forces_es0 = false;  // dchaisemartin is ES(0) with not-yet comparison
};
Preset resolve_preset(const std::string& name);

struct InferenceOptions {
  double alpha = 0.05;
  int frt_draws = 500;  // 0 disables the FRT
  std::uint64_t seed = 1;
  int threads = 1;
  int band_draws = 100000;
};

struct ComponentResult {
  std::string label;
  int event_time = 0;
  double theta = 0;
  double se_neyman = 0;
  double se_refined = 0;
  double ci_lo = 0, ci_hi = 0;
  double band_lo = 0, band_hi = 0;
  double frt_p = -1;  // < 0 when the FRT was not run
};

struct InferenceResult {
  Estimate est;
  std::vector<ComponentResult> components;
  double joint_frt_p = -1;
  double band_critical = 0;
  int frt_draws = 0;
  long frt_redraws = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  bool refined_fell_back = false;
  std::vector<std::string> warnings;
};

InferenceResult analyze(const PanelData& panel, const EstimandWeights& w,
                        const AdjustmentSpec& adj, const BetaSpec& beta,
                        const InferenceOptions& options);

}  // namespace staggered
