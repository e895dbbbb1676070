#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "staggered/panel.hpp"

namespace staggered {

// Comparison group used when turning target-parameter weights on ATE(t, g)
// into concrete cohort-pair contrasts.
//   kNeverTreated : contrast against the never-treated cohort
//   kNotYetTreated: size-weighted average over cohorts not yet treated at t
//   kLastCohort   : contrast against the last cohort to be treated
// kAuto resolves to never-treated when that cohort exists, otherwise to the
// not-yet-treated average.
enum class Comparison { kAuto, kNeverTreated, kNotYetTreated, kLastCohort };

std::string to_string(Comparison c);

// One weight a_{t,gg'} (or b^j_{t,gg'}) attached to the contrast
// tau(t, g, g') = mean outcome of cohort g at period t minus cohort g'.
struct WeightTriple {
  int component = 0;  // row of the compiled matrix system
  int t = 0;          // internal period, 1..T
  int g = 0;          // cohort value (internal period or kNever)
  int g_prime = 0;
  double w = 0.0;
};

// A target parameter compiled into per-cohort row matrices:
//   theta0_hat = sum_g a_theta[g] * mean(Y | cohort g).
// Multi-lag event studies stack one row per lag (K > 1).
struct EstimandWeights {
  std::string name;
  int components = 1;  // K
  std::vector<std::string> component_labels;
  std::vector<int> component_event_time;  // event-study lag per row, if any
  std::vector<WeightTriple> weights;      // compiled a_{t,gg'}
  std::vector<Eigen::MatrixXd> a_theta;   // per cohort index: K x T
  Comparison comparison = Comparison::kAuto;
  double dropped_weight = 0.0;  // unidentified share of the textbook weights
  std::vector<std::string> warnings;
  // Smallest cohort value carrying nonzero weight; pre-treatment periods for
  // the variance refinement are those before it.
  int g_min = kNever;

  // Mirror of the panel the weights were compiled against.
  int t_len = 0;
  std::vector<int> cohort_values;
};

struct EstimandSpec {
  enum class Kind { kSimple, kCalendar, kCohort, kEventStudy, kAttTg, kCustom };
  Kind kind = Kind::kSimple;
  int lag = 0;                // event study
  int att_t = 0, att_g = 0;   // att, in raw period labels
  std::string custom_path;

  // "simple" | "calendar" | "cohort" | "es<l>" | "att:<t>,<g>" |
  // "custom:<file>"
  static EstimandSpec parse(const std::string& text);
  std::string describe() const;
};

EstimandWeights build_estimand(const EstimandSpec& spec, const PanelData& panel,
                               Comparison comparison = Comparison::kAuto);

// Several event-study lags compiled as one stacked system sharing a single
// adjustment and variance solve.
EstimandWeights build_event_study(const std::vector<int>& lags,
                                  const PanelData& panel,
                                  Comparison comparison = Comparison::kAuto);

enum class AdjustmentKind { kNone, kCsScalar, kAllPairs, kCustom };

AdjustmentKind parse_adjustment_kind(const std::string& text);
std::string to_string(AdjustmentKind k);

// Pre-treatment contrasts X_hat compiled to per-cohort matrices:
//   xhat = sum_g a_zero[g] * mean(Y | cohort g),
// mean-zero by construction under random timing and no anticipation.
struct AdjustmentSpec {
  std::string name;
  int dim = 0;  // M
  std::vector<WeightTriple> weights;
  std::vector<Eigen::MatrixXd> a_zero;  // per cohort index: M x T
  // For kCsScalar: adjustment row paired with each estimand component
  // (identity unless duplicate rows were merged).
  std::vector<int> component_row;
  std::vector<std::string> warnings;

  int t_len = 0;
  std::vector<int> cohort_values;
};

AdjustmentSpec build_adjustment(AdjustmentKind kind, const EstimandWeights& w,
                                const PanelData& panel,
                                const std::string& custom_path = "");

// Relabel first treatment as G_i - k for placebo/lead estimation. Units whose
// shifted date falls before period 1 are removed (they can never enter an
// identified contrast on the shifted panel).
PanelData shift_for_placebo(const PanelData& panel, int k);

}  // namespace staggered
