#include "staggered/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "staggered/errors.hpp"

namespace staggered {

namespace {

// Column means with compensated summation. Long panels can sum 1e5+ terms per
// column, where naive accumulation starts losing digits against the 1e-12
// exactness contracts.
Eigen::VectorXd kahan_column_means(const Eigen::MatrixXd& outcomes,
                                   const std::vector<int>& rows) {
  const int t_len = static_cast<int>(outcomes.cols());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(t_len);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(t_len);
  for (int i : rows)
    for (int t = 0; t < t_len; ++t) {
      const double y = outcomes(i, t) - carry[t];
      const double s = sum[t] + y;
      carry[t] = (s - sum[t]) - y;
      sum[t] = s;
    }
  return sum / static_cast<double>(rows.size());
}

void stats_for_cohort(const PanelView& view, const std::vector<int>& rows,
                      bool with_cov, Eigen::VectorXd& mean,
                      Eigen::MatrixXd& cov) {
  const int t_len = view.t();
  mean = kahan_column_means(*view.outcomes, rows);
  if (!with_cov || rows.size() < 2) {
    cov.resize(0, 0);
    return;
  }
  Eigen::MatrixXd centered(rows.size(), t_len);
  for (std::size_t r = 0; r < rows.size(); ++r)
    centered.row(r) = view.outcomes->row(rows[r]) - mean.transpose();
  cov = Eigen::MatrixXd::Zero(t_len, t_len);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  cov /= static_cast<double>(rows.size() - 1);
}

int cohort_index_of(const std::vector<int>& cohort_values, int g) {
  auto it = std::lower_bound(cohort_values.begin(), cohort_values.end(), g);
  if (it == cohort_values.end() || *it != g) return -1;
  return static_cast<int>(it - cohort_values.begin());
}

bool row_block_is_zero(const Eigen::MatrixXd& m) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0;
}

void check_conformable(const CohortStats& stats, const EstimandWeights& w,
                       const AdjustmentSpec& adj) {
  if (w.t_len != stats.t_len || adj.t_len != stats.t_len)
    throw ValidationError(
        "estimand/adjustment were compiled for a different period count");
  if (static_cast<int>(w.a_theta.size()) != stats.n_cohorts() ||
      static_cast<int>(adj.a_zero.size()) != stats.n_cohorts())
    throw ValidationError(
        "estimand/adjustment were compiled for a different cohort set");
}

}  // namespace

CohortStats cohort_stats(const PanelView& view, bool with_cov, int threads) {
  const int n = view.n();
  const int n_cohorts = view.n_cohorts();

  std::vector<std::vector<int>> rows(n_cohorts);
  for (int k = 0; k < n_cohorts; ++k)
    rows[k].reserve((*view.cohort_sizes)[k]);
  for (int i = 0; i < n; ++i) {
    const int k = cohort_index_of(*view.cohort_values, (*view.first_treated)[i]);
    if (k < 0)
      throw ValidationError("unit has a first_treated value outside the cohort set");
    rows[k].push_back(i);
  }
  for (int k = 0; k < n_cohorts; ++k)
    if (static_cast<int>(rows[k].size()) != (*view.cohort_sizes)[k])
      throw ValidationError("cohort sizes do not match unit labels");

  CohortStats stats;
  stats.t_len = view.t();
  stats.sizes = *view.cohort_sizes;
  stats.means.resize(n_cohorts);
  stats.covs.resize(n_cohorts);

  auto work = [&](int begin, int end) {
    for (int k = begin; k < end; ++k)
      stats_for_cohort(view, rows[k], with_cov, stats.means[k], stats.covs[k]);
  };

  const int usable = std::max(1, std::min(threads, n_cohorts));
  if (usable == 1) {
    work(0, n_cohorts);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_cohorts + usable - 1) / usable;
    for (int w0 = 0; w0 < n_cohorts; w0 += chunk)
      pool.emplace_back(work, w0, std::min(n_cohorts, w0 + chunk));
    for (auto& th : pool) th.join();
  }
  return stats;
}

CohortStats cohort_stats(const PanelData& panel, bool with_cov, int threads) {
  return cohort_stats(PanelView::of(panel), with_cov, threads);
}

PointEstimates point_estimates(const CohortStats& stats,
                               const EstimandWeights& w,
                               const AdjustmentSpec& adj) {
  check_conformable(stats, w, adj);
  PointEstimates out;
  out.theta0 = Eigen::VectorXd::Zero(w.components);
  out.xhat = Eigen::VectorXd::Zero(adj.dim);
  for (int k = 0; k < stats.n_cohorts(); ++k) {
    out.theta0 += w.a_theta[k] * stats.means[k];
    if (adj.dim > 0) out.xhat += adj.a_zero[k] * stats.means[k];
  }
  return out;
}

VarianceComponents variance_components(const CohortStats& stats,
                                       const EstimandWeights& w,
                                       const AdjustmentSpec& adj) {
  check_conformable(stats, w, adj);
  const int k_comp = w.components;
  const int m = adj.dim;

  VarianceComponents v;
  v.v_theta0 = Eigen::MatrixXd::Zero(k_comp, k_comp);
  v.v_x_theta0 = Eigen::MatrixXd::Zero(m, k_comp);
  v.v_x = Eigen::MatrixXd::Zero(m, m);

  for (int k = 0; k < stats.n_cohorts(); ++k) {
    const bool used =
        !row_block_is_zero(w.a_theta[k]) || !row_block_is_zero(adj.a_zero[k]);
    if (!used) continue;
    if (stats.covs[k].size() == 0)
      throw ValidationError(
          "cohort with N_g = " + std::to_string(stats.sizes[k]) +
          " is touched by the estimand or adjustment but its sample "
          "covariance is undefined; merge or drop the cohort");
    const double inv_n = 1.0 / static_cast<double>(stats.sizes[k]);
    const Eigen::MatrixXd sa_theta = stats.covs[k] * w.a_theta[k].transpose();
    v.v_theta0 += inv_n * w.a_theta[k] * sa_theta;
    if (m > 0) {
      v.v_x_theta0 += inv_n * adj.a_zero[k] * sa_theta;
      v.v_x += inv_n * adj.a_zero[k] * stats.covs[k] * adj.a_zero[k].transpose();
    }
  }
  // Products of symmetric factors pick up rounding asymmetry; restore it.
  v.v_theta0 = ((v.v_theta0 + v.v_theta0.transpose()) / 2.0).eval();
  v.v_x = ((v.v_x + v.v_x.transpose()) / 2.0).eval();
  return v;
}

Eigen::MatrixXd beta_star(const VarianceComponents& components) {
  const int m = static_cast<int>(components.v_x.rows());
  if (m == 0) return Eigen::MatrixXd::Zero(0, components.v_theta0.rows());

  Eigen::LDLT<Eigen::MatrixXd> ldlt(components.v_x);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double d_max = d.maxCoeff();
  const double d_min = d.minCoeff();
  if (!(d_max > 0.0) || d_min < 1e-10 * d_max || ldlt.info() != Eigen::Success)
    throw NumericError(
        "adjustment variance V_x is numerically singular (relative pivot " +
        std::to_string(d_max > 0 ? d_min / d_max : 0.0) +
        "); shrink the adjustment, e.g. use cs_scalar instead of all_pairs, "
        "drop collinear contrasts, or aggregate periods");
  return ldlt.solve(components.v_x_theta0);
}

Eigen::MatrixXd resolve_beta(const BetaSpec& spec,
                             const VarianceComponents& components,
                             const AdjustmentSpec& adj, int k_components) {
  const int m = adj.dim;
  switch (spec.kind) {
    case BetaSpec::Kind::kZero:
      return Eigen::MatrixXd::Zero(m, k_components);
    case BetaSpec::Kind::kUnit: {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, k_components);
      if (!adj.component_row.empty()) {
        if (static_cast<int>(adj.component_row.size()) != k_components)
          throw ValidationError("adjustment rows do not pair with estimand components");
        for (int k = 0; k < k_components; ++k) b(adj.component_row[k], k) = 1.0;
      } else if (m == k_components) {
        b.setIdentity();
      } else {
        throw ValidationError(
            "beta = 1 needs one adjustment row per estimand component (M = " +
            std::to_string(m) + ", K = " + std::to_string(k_components) + ")");
      }
      return b;
    }
    case BetaSpec::Kind::kPlugin:
      return beta_star(components);
    case BetaSpec::Kind::kFixed: {
      if (spec.fixed.rows() == 1 && spec.fixed.cols() == 1)
        return Eigen::MatrixXd::Constant(m, k_components, spec.fixed(0, 0));
      if (spec.fixed.rows() != m || spec.fixed.cols() != k_components)
        throw ValidationError("fixed beta has the wrong dimensions");
      return spec.fixed;
    }
  }
  throw ValidationError("unresolved beta preset");
}

Estimate make_estimate(const PointEstimates& pts, const Eigen::MatrixXd& beta,
                       std::string preset) {
  Estimate est;
  est.theta0 = pts.theta0;
  est.xhat = pts.xhat;
  est.beta = beta;
  est.preset = std::move(preset);
  est.theta_hat.resize(pts.theta0.size());
  for (int k = 0; k < pts.theta0.size(); ++k)
    est.theta_hat[k] = pts.theta0[k] - pts.xhat.dot(beta.col(k));
  return est;
}

}  // namespace staggered
