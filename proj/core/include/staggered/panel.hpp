#pragma once

#include <Eigen/Dense>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace staggered {

// Sentinel cohort value for units never treated within the sample window.
inline constexpr int kNever = std::numeric_limits<int>::max();

// Balanced N x T panel with staggered absorbing treatment.
//
// Periods are re-indexed internally to 1..T; `period_labels` keeps the
// original labels for reporting. Units are stored sorted by unit id so that
// a panel built from the same rows in any order is bit-identical, which makes
// every downstream estimate exactly invariant to input ordering.
// PanelData is immutable after construction and safe to share across threads.
struct PanelData {
  std::vector<std::string> unit_ids;      // length N, ascending
  std::vector<int> period_labels;        // length T, strictly increasing
  Eigen::MatrixXd outcomes;              // N x T, outcomes(i, t-1) = Y_it
  std::vector<int> first_treated;        // per unit: internal period or kNever
  std::vector<int> cohort_values;        // sorted distinct first_treated
  std::vector<int> cohort_sizes;         // N_g aligned with cohort_values
  std::vector<std::string> cluster_ids;  // empty, or length N
  std::vector<std::string> stratum_ids;  // empty, or length N

  int n_units() const { return static_cast<int>(unit_ids.size()); }
  int n_periods() const { return static_cast<int>(period_labels.size()); }
  int n_cohorts() const { return static_cast<int>(cohort_values.size()); }
  bool has_never() const {
    return !cohort_values.empty() && cohort_values.back() == kNever;
  }
  // Largest finite (eventually-treated) cohort, or 0 if none.
  int last_finite_cohort() const;
  int cohort_index(int g) const;  // -1 if g is not a cohort
  // Reporting label for an internal period or cohort value.
  std::string label_of(int internal) const;

  bool has_clusters() const { return !cluster_ids.empty(); }
  bool has_strata() const { return !stratum_ids.empty(); }
};

// Non-owning view used by estimation internals so that simulation and
// permutation loops can relabel units without copying outcomes.
struct PanelView {
  const Eigen::MatrixXd* outcomes = nullptr;
  const std::vector<int>* first_treated = nullptr;
  const std::vector<int>* cohort_values = nullptr;
  const std::vector<int>* cohort_sizes = nullptr;

  static PanelView of(const PanelData& p) {
    return {&p.outcomes, &p.first_treated, &p.cohort_values, &p.cohort_sizes};
  }
  int n() const { return static_cast<int>(outcomes->rows()); }
  int t() const { return static_cast<int>(outcomes->cols()); }
  int n_cohorts() const { return static_cast<int>(cohort_values->size()); }
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  // (t, g) pairs, internal indexing, sorted by (t, g).
  std::vector<std::pair<int, int>> identified_set;

  bool ok() const { return errors.empty(); }
};

// One observation of the long input format.
struct PanelRow {
  std::string unit;
  int period = 0;
  int first_treated_label = 0;  // raw label or kNever
  double outcome = 0.0;
  std::string cluster;  // optional
  std::string stratum;  // optional
};

// Assemble a canonical panel from long rows. Throws ValidationError on
// unbalanced data, duplicate (unit, period) cells, first_treated values that
// are not period labels, or clusters spanning two cohorts.
PanelData assemble_panel(std::vector<PanelRow> rows);

// Read the long CSV format: header `unit,period,first_treated,outcome` with
// optional `cluster` and `stratum` columns. Never-treated is encoded as an
// empty cell, "Inf", or "never" (case-insensitive).
struct LoadOptions {
  std::string cluster_col = "cluster";
  std::string stratum_col = "stratum";
};
PanelData load_panel(std::istream& in, const LoadOptions& options = {});
PanelData load_panel_file(const std::string& path,
                          const LoadOptions& options = {});

// Structural checks plus the identified (t, g) set: every pair with
// g <= t <= T when a never-treated cohort exists, otherwise only pairs with
// t < max(G). Findings are reported, not thrown.
ValidationReport validate(const PanelData& panel);

// Identified pairs for a cohort set over 1..T (helper shared with builders).
std::vector<std::pair<int, int>> identified_pairs(
    const std::vector<int>& cohort_values, int t_len);

// Cluster-level transform: one row per cluster f with outcomes
// (F/N) * sum of member outcomes, preserving all average contrasts.
PanelData collapse_clusters(const PanelData& panel);

// Average outcomes within consecutive blocks of `block` periods; first
// treatment dates map to their containing block. Requires T divisible.
PanelData aggregate_time(const PanelData& panel, int block);

// Drop listed unit ids (exclusion lists are the caller's responsibility).
PanelData exclude_units(const PanelData& panel,
                        const std::vector<std::string>& drop);

}  // namespace staggered
