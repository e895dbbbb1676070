#include "staggered/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "staggered/errors.hpp"
#include "staggered/rng.hpp"

namespace staggered {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Acklam's rational approximation, polished with two Newton steps against the
// erfc-based CDF; accurate to close to machine precision on (1e-300, 1).
double normal_quantile_guess(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

bool row_block_is_zero(const Eigen::MatrixXd& m) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0;
}

// Negative diagonal entries of a mathematically PSD covariance are rounding
// noise; anything materially negative is a conformability bug upstream.
double checked_variance(double v, double scale, const char* what) {
  if (v < -1e-12 * std::max(1.0, scale))
    throw NumericError(std::string(what) +
                       " produced a negative variance: " + std::to_string(v));
  return std::max(v, 0.0);
}

int thread_count(int requested, int work_items) {
  if (requested < 1) requested = 1;
  return std::max(1, std::min(requested, work_items));
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("normal quantile requires p in (0, 1)");
  double z = normal_quantile_guess(p);
  for (int it = 0; it < 2; ++it) {
    const double err = normal_cdf(z) - p;
    const double dens = normal_pdf(z);
    if (dens <= 0) break;
    z -= err / dens;
  }
  return z;
}

Eigen::MatrixXd estimator_covariance(const VarianceComponents& components,
                                     const Eigen::MatrixXd& beta) {
  const Eigen::MatrixXd cross = beta.transpose() * components.v_x_theta0;
  Eigen::MatrixXd cov = components.v_theta0 - cross - cross.transpose() +
                        beta.transpose() * components.v_x * beta;
  return ((cov + cov.transpose()) / 2.0).eval();
}

Refinement heterogeneity_refinement(const CohortStats& stats,
                                    const EstimandWeights& w) {
  Refinement out;
  if (w.g_min == kNever) {
    out.note = "estimand carries no cohort weight; refinement unavailable";
    return out;
  }
  const int pre = w.g_min - 1;
  if (pre < 1) {
    out.note =
        "first weighted cohort is treated in period 1, leaving no "
        "pre-treatment period; using the conservative variance";
    return out;
  }

  int idx_gmin = -1;
  for (std::size_t k = 0; k < w.cohort_values.size(); ++k)
    if (w.cohort_values[k] == w.g_min) idx_gmin = static_cast<int>(k);
  if (idx_gmin < 0 || stats.covs[idx_gmin].size() == 0) {
    out.note = "pre-period covariance unavailable; using the conservative variance";
    return out;
  }

  const int k_comp = w.components;
  Eigen::MatrixXd beta_sum = Eigen::MatrixXd::Zero(pre, k_comp);
  for (int k = 0; k < stats.n_cohorts(); ++k) {
    if (w.cohort_values[k] != kNever && w.cohort_values[k] < w.g_min) continue;
    if (row_block_is_zero(w.a_theta[k])) continue;
    if (stats.covs[k].size() == 0) {
      out.note = "pre-period covariance unavailable; using the conservative variance";
      return out;
    }
    const Eigen::MatrixXd pre_block = stats.covs[k].topLeftCorner(pre, pre);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(pre_block);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !(d.maxCoeff() > 0.0) ||
        d.minCoeff() < 1e-10 * d.maxCoeff()) {
      out.note =
          "pre-period covariance is singular in cohort " +
          std::to_string(w.cohort_values[k]) + "; using the conservative variance";
      return out;
    }
    // Projection of the weighted outcome on the pre-treatment outcomes.
    const Eigen::MatrixXd rhs =
        stats.covs[k].topRows(pre) * w.a_theta[k].transpose();
    beta_sum += ldlt.solve(rhs);
  }

  const Eigen::MatrixXd pre_gmin =
      stats.covs[idx_gmin].topLeftCorner(pre, pre);
  long n = 0;
  for (int size : stats.sizes) n += size;
  // The quadratic form estimates the explained part of S_theta, which enters
  // the estimator's variance as -S_theta / N.
  Eigen::MatrixXd sub =
      beta_sum.transpose() * pre_gmin * beta_sum / static_cast<double>(n);
  out.subtracted = ((sub + sub.transpose()) / 2.0).eval();
  out.available = true;
  return out;
}

FitResult fit(const PanelView& view, const EstimandWeights& w,
              const AdjustmentSpec& adj, const BetaSpec& beta, int threads) {
  FitResult out;
  const CohortStats stats = cohort_stats(view, true, threads);
  const PointEstimates pts = point_estimates(stats, w, adj);
  const VarianceComponents components = variance_components(stats, w, adj);
  const Eigen::MatrixXd b = resolve_beta(beta, components, adj, w.components);
  out.est = make_estimate(pts, b, "");
  out.cov_neyman = estimator_covariance(components, b);

  const int k_comp = w.components;
  out.se_neyman.resize(k_comp);
  out.se_refined.resize(k_comp);
  const Refinement refinement = heterogeneity_refinement(stats, w);
  out.refined_fell_back = !refinement.available;
  if (!refinement.available && !refinement.note.empty())
    out.warnings.push_back(refinement.note);

  const double scale = out.cov_neyman.diagonal().cwiseAbs().maxCoeff();
  for (int k = 0; k < k_comp; ++k) {
    const double v = checked_variance(out.cov_neyman(k, k), scale, "neyman variance");
    out.se_neyman[k] = std::sqrt(v);
    if (refinement.available) {
      const double vr = v - refinement.subtracted(k, k);
      out.se_refined[k] = std::sqrt(std::max(vr, 0.0));
    } else {
      out.se_refined[k] = out.se_neyman[k];
    }
  }
  return out;
}

double neyman_se(const CohortStats& stats, const EstimandWeights& w,
                 const AdjustmentSpec& adj, const Eigen::MatrixXd& beta) {
  const VarianceComponents components = variance_components(stats, w, adj);
  const Eigen::MatrixXd cov = estimator_covariance(components, beta);
  return std::sqrt(checked_variance(cov(0, 0), std::abs(cov(0, 0)), "neyman variance"));
}

RefinedSe refined_se(const CohortStats& stats, const EstimandWeights& w,
                     const AdjustmentSpec& adj, const Eigen::MatrixXd& beta) {
  const double base = neyman_se(stats, w, adj, beta);
  const Refinement refinement = heterogeneity_refinement(stats, w);
  if (!refinement.available) return {base, true};
  const double v = base * base - refinement.subtracted(0, 0);
  return {std::sqrt(std::max(v, 0.0)), false};
}

std::pair<double, double> confidence_interval(double theta, double se,
                                              double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  return {theta - z * se, theta + z * se};
}

namespace {

// Shared permutation loop. Draw b is fully determined by (seed, b, attempt),
// so results are bit-identical for any thread count.
struct PermutationPlan {
  std::vector<std::vector<int>> groups;  // unit indices per stratum

  static PermutationPlan build(const std::vector<int>& first_treated,
                               const std::vector<std::string>& strata) {
    PermutationPlan plan;
    if (strata.empty()) {
      std::vector<int> all(first_treated.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      plan.groups.push_back(std::move(all));
      return plan;
    }
    std::map<std::string, std::vector<int>> by;
    for (std::size_t i = 0; i < strata.size(); ++i)
      by[strata[i]].push_back(static_cast<int>(i));
    for (auto& [key, idx] : by) plan.groups.push_back(std::move(idx));
    return plan;
  }

  void permute(const std::vector<int>& base, Rng& rng,
               std::vector<int>& out) const {
    out = base;
    for (const auto& group : groups) {
      // Shuffle the multiset of labels within the group.
      std::vector<int> labels(group.size());
      for (std::size_t q = 0; q < group.size(); ++q) labels[q] = base[group[q]];
      rng.shuffle(labels);
      for (std::size_t q = 0; q < group.size(); ++q) out[group[q]] = labels[q];
    }
  }
};

constexpr int kMaxAttemptsPerDraw = 64;

}  // namespace

FrtMultiOutcome frt_multi_statistic(const std::vector<int>& first_treated,
                                    const std::vector<std::string>& strata,
                                    const MultiStatistic& statistic,
                                    const FrtOptions& options) {
  if (options.draws < 1) throw ValidationError("FRT needs at least one draw");
  auto observed = statistic(first_treated);
  if (!observed)
    throw NumericError("FRT statistic undefined on the observed assignment");
  const Eigen::VectorXd obs = *observed;
  const double obs_max = obs.size() > 0 ? obs.maxCoeff() : 0.0;
  const int dim = static_cast<int>(obs.size());

  const PermutationPlan plan = PermutationPlan::build(first_treated, strata);
  const int draws = options.draws;
  const int workers = thread_count(options.threads, draws);

  std::vector<std::vector<long>> counts(workers, std::vector<long>(dim, 0));
  std::vector<long> counts_max(workers, 0);
  std::vector<long> redraws(workers, 0);
  std::atomic<bool> give_up{false};
  const long redraw_cap = std::max<long>(
      8, static_cast<long>(options.max_redraw_share * draws) + 1);

  auto run = [&](int worker, int begin, int end) {
    std::vector<int> labels;
    long local_redraws = 0;
    for (int b = begin; b < end && !give_up.load(std::memory_order_relaxed); ++b) {
      std::optional<Eigen::VectorXd> value;
      for (int attempt = 0; attempt < kMaxAttemptsPerDraw; ++attempt) {
        Rng rng = Rng::derive(options.seed, static_cast<std::uint64_t>(b) + 1,
                              static_cast<std::uint64_t>(attempt));
        plan.permute(first_treated, rng, labels);
        value = statistic(labels);
        if (value) break;
        ++local_redraws;
        if (local_redraws > redraw_cap) {
          give_up.store(true, std::memory_order_relaxed);
          break;
        }
      }
      if (!value) {
        give_up.store(true, std::memory_order_relaxed);
        break;
      }
      for (int j = 0; j < dim; ++j)
        if ((*value)[j] >= obs[j]) ++counts[worker][j];
      if (value->size() > 0 && value->maxCoeff() >= obs_max) ++counts_max[worker];
    }
    redraws[worker] = local_redraws;
  };

  if (workers == 1) {
    run(0, 0, draws);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (draws + workers - 1) / workers;
    for (int wkr = 0; wkr < workers; ++wkr) {
      const int begin = wkr * chunk;
      if (begin >= draws) break;
      pool.emplace_back(run, wkr, begin, std::min(draws, begin + chunk));
    }
    for (auto& th : pool) th.join();
  }

  FrtMultiOutcome out;
  out.draws = draws;
  out.observed = obs;
  for (long r : redraws) out.redraws += r;
  if (give_up.load() ||
      out.redraws > static_cast<long>(options.max_redraw_share * draws))
    throw NumericError(
        "FRT redrew " + std::to_string(out.redraws) + " of " +
        std::to_string(draws) +
        " permutations because the statistic was undefined (singular "
        "adjustment variance); the design is too degenerate for this "
        "adjustment");

  out.p.assign(dim, 1.0);
  long total_max = 0;
  std::vector<long> total(dim, 0);
  for (int wkr = 0; wkr < workers; ++wkr) {
    for (int j = 0; j < dim; ++j) total[j] += counts[wkr][j];
    total_max += counts_max[wkr];
  }
  for (int j = 0; j < dim; ++j)
    out.p[j] = static_cast<double>(1 + total[j]) / (draws + 1);
  out.p_max = static_cast<double>(1 + total_max) / (draws + 1);
  return out;
}

FrtOutcome frt_statistic(const std::vector<int>& first_treated,
                         const std::vector<std::string>& strata,
                         const Statistic& statistic, const FrtOptions& options) {
  MultiStatistic wrapped =
      [&statistic](const std::vector<int>& labels) -> std::optional<Eigen::VectorXd> {
    auto v = statistic(labels);
    if (!v) return std::nullopt;
    Eigen::VectorXd out(1);
    out[0] = *v;
    return out;
  };
  const FrtMultiOutcome multi =
      frt_multi_statistic(first_treated, strata, wrapped, options);
  FrtOutcome out;
  out.p = multi.p[0];
  out.draws = multi.draws;
  out.redraws = multi.redraws;
  out.observed = multi.observed[0];
  return out;
}

namespace {

// |theta_hat / se| per component, refined SE, everything recomputed from the
// permuted labels. nullopt flags a singular adjustment variance.
std::optional<Eigen::VectorXd> studentized_statistic(
    const Eigen::MatrixXd& outcomes, const std::vector<int>& labels,
    const std::vector<int>& cohort_values, const std::vector<int>& cohort_sizes,
    const EstimandWeights& w, const AdjustmentSpec& adj, const BetaSpec& beta) {
  PanelView view{&outcomes, &labels, &cohort_values, &cohort_sizes};
  try {
    const FitResult f = fit(view, w, adj, beta, 1);
    Eigen::VectorXd t(f.est.theta_hat.size());
    for (int k = 0; k < t.size(); ++k) {
      // Studentize by the refined scale; if the subtraction clamped it to
      // zero, the conservative scale keeps the statistic finite and ties
      // broken.
      double se = f.se_refined[k];
      if (se <= 0) se = f.se_neyman[k];
      if (se > 0)
        t[k] = std::abs(f.est.theta_hat[k]) / se;
      else
        t[k] = f.est.theta_hat[k] == 0.0
                   ? 0.0
                   : std::numeric_limits<double>::infinity();
    }
    return t;
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

}  // namespace

FrtOutcome frt(const PanelData& panel, const EstimandWeights& w,
               const AdjustmentSpec& adj, const BetaSpec& beta,
               const FrtOptions& options) {
  MultiStatistic stat =
      [&](const std::vector<int>& labels) -> std::optional<Eigen::VectorXd> {
    return studentized_statistic(panel.outcomes, labels, panel.cohort_values,
                                 panel.cohort_sizes, w, adj, beta);
  };
  const FrtMultiOutcome multi = frt_multi_statistic(
      panel.first_treated, panel.stratum_ids, stat, options);
  FrtOutcome out;
  out.p = w.components == 1 ? multi.p[0] : multi.p_max;
  out.draws = multi.draws;
  out.redraws = multi.redraws;
  out.observed = multi.observed.size() == 1 ? multi.observed[0]
                                            : multi.observed.maxCoeff();
  return out;
}

BalanceReport balance_test(const PanelData& panel, const AdjustmentSpec& adj,
                           const FrtOptions& options) {
  if (adj.dim == 0)
    throw ValidationError("balance test needs a non-empty adjustment");

  // Dummy estimand so variance_components sees only the adjustment rows.
  EstimandWeights empty;
  empty.components = 1;
  empty.t_len = adj.t_len;
  empty.cohort_values = adj.cohort_values;
  for (std::size_t k = 0; k < adj.cohort_values.size(); ++k)
    empty.a_theta.push_back(Eigen::MatrixXd::Zero(1, adj.t_len));

  auto t_vector =
      [&](const std::vector<int>& labels) -> std::optional<Eigen::VectorXd> {
    PanelView view{&panel.outcomes, &labels, &panel.cohort_values,
                   &panel.cohort_sizes};
    const CohortStats stats = cohort_stats(view, true, 1);
    const PointEstimates pts = point_estimates(stats, empty, adj);
    const VarianceComponents components = variance_components(stats, empty, adj);
    Eigen::VectorXd t(adj.dim);
    for (int j = 0; j < adj.dim; ++j) {
      const double se = std::sqrt(std::max(components.v_x(j, j), 0.0));
      if (se > 0)
        t[j] = std::abs(pts.xhat[j]) / se;
      else
        t[j] = pts.xhat[j] == 0.0 ? 0.0
                                  : std::numeric_limits<double>::infinity();
    }
    return t;
  };

  // Observed components with signs, for reporting.
  const CohortStats stats = cohort_stats(panel, true, options.threads);
  const PointEstimates pts = point_estimates(stats, empty, adj);
  const VarianceComponents components = variance_components(stats, empty, adj);

  const FrtMultiOutcome multi = frt_multi_statistic(
      panel.first_treated, panel.stratum_ids, t_vector, options);

  BalanceReport rep;
  rep.draws = multi.draws;
  rep.redraws = multi.redraws;
  rep.joint_p = multi.p_max;
  for (int j = 0; j < adj.dim; ++j) {
    BalanceComponent c;
    c.xhat = pts.xhat[j];
    c.se = std::sqrt(std::max(components.v_x(j, j), 0.0));
    c.t_stat = c.se > 0 ? c.xhat / c.se
                        : (c.xhat == 0.0 ? 0.0
                                         : std::copysign(
                                               std::numeric_limits<double>::infinity(),
                                               c.xhat));
    c.p_t = std::erfc(std::abs(c.t_stat) / kSqrt2);
    c.p_frt = multi.p[j];
    rep.components.push_back(c);
  }
  return rep;
}

double sup_t_critical(const Eigen::MatrixXd& corr, double alpha, int draws,
                      std::uint64_t seed) {
  const int k = static_cast<int>(corr.rows());
  if (k == 0) throw ValidationError("sup-t band needs at least one component");
  if (draws < 1) throw ValidationError("sup-t band needs at least one draw");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed for the sup-t correlation");
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd factor =
      es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();

  std::vector<double> maxima(draws);
  Rng rng = Rng::derive(seed, 0x5b5ULL);
  Eigen::VectorXd g(k);
  for (int b = 0; b < draws; ++b) {
    for (int j = 0; j < k; ++j) g[j] = rng.normal();
    maxima[b] = (factor * g).cwiseAbs().maxCoeff();
  }
  std::sort(maxima.begin(), maxima.end());
  // Conservative empirical quantile, matching the FRT tie convention.
  long idx = static_cast<long>(std::ceil((1.0 - alpha) * (draws + 1))) - 1;
  idx = std::clamp<long>(idx, 0, draws - 1);
  return maxima[static_cast<std::size_t>(idx)];
}

Preset resolve_preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "plugin") {
    p.beta = BetaSpec::plugin();
  } else if (name == "cs" || name == "did") {
    p.beta = BetaSpec::unit();
  } else if (name == "sa") {
    p.comparison = Comparison::kLastCohort;
    p.beta = BetaSpec::unit();
  } else if (name == "dim") {
    p.beta = BetaSpec::zero();
  } else if (name == "dchaisemartin" || name == "dcdh") {
    p.comparison = Comparison::kNotYetTreated;
    p.beta = BetaSpec::unit();
    p.forces_es0 = true;
  } else {
    throw ValidationError("unknown preset '" + name +
                          "' (expected plugin, cs, sa, dchaisemartin, did, dim)");
  }
  return p;
}

InferenceResult analyze(const PanelData& panel, const EstimandWeights& w,
                        const AdjustmentSpec& adj, const BetaSpec& beta,
                        const InferenceOptions& options) {
  InferenceResult out;
  out.alpha = options.alpha;
  out.seed = options.seed;

  const FitResult f = fit(PanelView::of(panel), w, adj, beta, options.threads);
  out.est = f.est;
  out.refined_fell_back = f.refined_fell_back;
  out.warnings = f.warnings;
  for (const auto& warn : w.warnings) out.warnings.push_back(warn);
  for (const auto& warn : adj.warnings) out.warnings.push_back(warn);

  const int k_comp = w.components;
  double band_crit = 0;
  if (k_comp > 1) {
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(k_comp, k_comp);
    for (int a = 0; a < k_comp; ++a)
      for (int b = 0; b < k_comp; ++b) {
        const double va = f.cov_neyman(a, a), vb = f.cov_neyman(b, b);
        if (a != b && va > 0 && vb > 0)
          corr(a, b) = f.cov_neyman(a, b) / std::sqrt(va * vb);
      }
    band_crit = sup_t_critical(corr, options.alpha, options.band_draws,
                               options.seed ^ 0x9e3779b97f4a7c15ULL);
  }
  out.band_critical = band_crit;

  for (int k = 0; k < k_comp; ++k) {
    ComponentResult c;
    c.label = k < static_cast<int>(w.component_labels.size())
                  ? w.component_labels[k]
                  : w.name;
    c.event_time = k < static_cast<int>(w.component_event_time.size())
                       ? w.component_event_time[k]
                       : 0;
    c.theta = f.est.theta_hat[k];
    c.se_neyman = f.se_neyman[k];
    c.se_refined = f.se_refined[k];
    std::tie(c.ci_lo, c.ci_hi) =
        confidence_interval(c.theta, c.se_refined, options.alpha);
    if (k_comp > 1) {
      c.band_lo = c.theta - band_crit * c.se_refined;
      c.band_hi = c.theta + band_crit * c.se_refined;
    } else {
      c.band_lo = c.ci_lo;
      c.band_hi = c.ci_hi;
    }
    out.components.push_back(c);
  }

  if (options.frt_draws > 0) {
    FrtOptions fo;
    fo.draws = options.frt_draws;
    fo.seed = options.seed;
    fo.threads = options.threads;
    MultiStatistic stat =
        [&](const std::vector<int>& labels) -> std::optional<Eigen::VectorXd> {
      return studentized_statistic(panel.outcomes, labels, panel.cohort_values,
                                   panel.cohort_sizes, w, adj, beta);
    };
    const FrtMultiOutcome multi = frt_multi_statistic(
        panel.first_treated, panel.stratum_ids, stat, fo);
    out.frt_draws = multi.draws;
    out.frt_redraws = multi.redraws;
    out.joint_frt_p = multi.p_max;
    for (int k = 0; k < k_comp; ++k) out.components[k].frt_p = multi.p[k];
  }
  return out;
}

}  // namespace staggered
