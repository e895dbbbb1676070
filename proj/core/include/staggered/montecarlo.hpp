#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "staggered/estimands.hpp"
#include "staggered/estimator.hpp"
#include "staggered/panel.hpp"
#include "staggered/rng.hpp"

namespace staggered {

// Full science table: one N x T outcome matrix per treatment-timing cohort,
// with no-anticipation built in (columns before min(g, g') agree across g).
// Assignments are draws of which units occupy each cohort slot.
struct PotentialOutcomes {
  int n = 0;
  int t_len = 0;
  std::vector<int> cohort_values;  // sorted, may end with kNever
  std::vector<int> cohort_sizes;
  std::vector<Eigen::MatrixXd> y;  // per cohort: N x T

  int cohort_index(int g) const;
};

struct PopulationSpec {
  enum class Kind { kTwoPeriod, kCalibratedNull, kCalibratedHetero };
  Kind kind = Kind::kTwoPeriod;
  int n2 = 1000, ninf = 1000;
  double rho = 0.5;
  double gamma = 0.0;
  double effect_sd_scale = 1.0;  // calibrated heterogeneous effects
  std::string panel_path;        // calibrated designs
  std::uint64_t seed = 1;
};

// Two periods, cohorts {2, never}: baseline outcomes Gaussian with
// correlation rho across periods, second-period effects
// tau_i = gamma * (Y_i2(never) - mean), centered so the average effect is 0.
// The population is drawn once and held fixed; only assignments vary.
PotentialOutcomes gen_two_period(int n2, int ninf, double rho, double gamma,
                                 std::uint64_t seed);

// Calibrated design: the supplied panel's outcomes become the untreated
// science, with either no effects or unit effects u_i ~ N(0, sd(Y)) switched
// on from each unit's treatment date.
PotentialOutcomes calibrated(const PanelData& panel, double effect_sd_scale,
                             std::uint64_t seed);

PotentialOutcomes generate(const PopulationSpec& spec);

// Observed outcome matrix under one assignment of units to cohorts.
Eigen::MatrixXd realize(const PotentialOutcomes& po,
                        const std::vector<int>& first_treated);

// Canonical panel (sorted labels) used to compile estimands against the
// design's cohort structure.
PanelData skeleton_panel(const PotentialOutcomes& po);

std::vector<int> draw_assignment(const PotentialOutcomes& po, Rng& rng);

// True quantities from the science table.
double true_tau(const PotentialOutcomes& po, int t, int g, int g_prime);
double true_theta(const PotentialOutcomes& po, const EstimandWeights& w);
Eigen::MatrixXd finite_population_cov(const Eigen::MatrixXd& values);
Eigen::MatrixXd true_cohort_cov(const PotentialOutcomes& po, int g);  // S_g

// Exact design covariance of the stacked statistic (theta0_hat, xhat) in
// closed form: sum_g N_g^{-1} A_g S_g A_g' - N^{-1} S_tau.
Eigen::MatrixXd closed_form_variance(const PotentialOutcomes& po,
                                     const EstimandWeights& w,
                                     const AdjustmentSpec& adj);
// Top-left K x K block of S_tau (the treatment-effect heterogeneity).
Eigen::MatrixXd true_s_theta(const PotentialOutcomes& po,
                             const EstimandWeights& w);
// Oracle coefficient from the true covariance blocks.
Eigen::MatrixXd oracle_beta(const PotentialOutcomes& po,
                            const EstimandWeights& w,
                            const AdjustmentSpec& adj);

// Exhaustive enumeration over every assignment with the design's cohort
// counts. Guarded by the multinomial count (<= 1e6).
double assignment_count(const PotentialOutcomes& po);

void for_each_assignment(
    const PotentialOutcomes& po,
    const std::function<void(const std::vector<int>& first_treated,
                             const Eigen::MatrixXd& outcomes)>& fn);

struct EnumerationMoments {
  long count = 0;
  Eigen::VectorXd mean;  // stacked (theta0; xhat), length K + M
  Eigen::MatrixXd var;   // exact design covariance
};
EnumerationMoments enumerate_stat_moments(const PotentialOutcomes& po,
                                          const EstimandWeights& w,
                                          const AdjustmentSpec& adj);

struct EnumeratedEstimator {
  long count = 0;
  double mean = 0;
  double var = 0;
};
EnumeratedEstimator enumerate_estimator(const PotentialOutcomes& po,
                                        const EstimandWeights& w,
                                        const AdjustmentSpec& adj,
                                        const Eigen::MatrixXd& beta);

// Studentized statistic on every assignment; feeds exact FRT checks.
std::vector<double> enumerate_studentized(const PotentialOutcomes& po,
                                          const EstimandWeights& w,
                                          const AdjustmentSpec& adj,
                                          const BetaSpec& beta);
// Share of assignments on which a full-enumeration FRT rejects at alpha.
double enumerate_frt_rejection(const PotentialOutcomes& po,
                               const EstimandWeights& w,
                               const AdjustmentSpec& adj, const BetaSpec& beta,
                               double alpha);

// Monte Carlo runner over repeated assignment draws on a fixed population.
struct McConfig {
  std::string estimand = "simple";
  AdjustmentKind adjustment = AdjustmentKind::kCsScalar;
  std::vector<std::string> estimators = {"plugin", "did", "dim"};
  int reps = 1000;
  double alpha = 0.05;
  int frt_draws = 500;  // 0 skips the FRT
  std::uint64_t seed = 1;
  int threads = 1;
};

struct McRow {
  std::string estimator;
  std::string estimand;
  double true_theta = 0;
  double bias = 0;
  double sd = 0;
  double mean_se = 0;
  double coverage = 0;
  double frt_size = -1;  // < 0 when the FRT was skipped
  double mean_beta = 0;  // mean beta[0] (scalar adjustments)
  long reps = 0;
  long failures = 0;
};

std::vector<McRow> run_mc(const PotentialOutcomes& po, const McConfig& config);

}  // namespace staggered
