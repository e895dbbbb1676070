#include "staggered/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <thread>

#include "staggered/errors.hpp"
#include "staggered/inference.hpp"

namespace staggered {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  return splitmix64(s);
}

std::vector<int> base_labels(const PotentialOutcomes& po) {
  std::vector<int> labels;
  labels.reserve(po.n);
  for (std::size_t k = 0; k < po.cohort_values.size(); ++k)
    labels.insert(labels.end(), po.cohort_sizes[k], po.cohort_values[k]);
  return labels;
}

}  // namespace

int PotentialOutcomes::cohort_index(int g) const {
  auto it = std::lower_bound(cohort_values.begin(), cohort_values.end(), g);
  if (it == cohort_values.end() || *it != g) return -1;
  return static_cast<int>(it - cohort_values.begin());
}

PotentialOutcomes gen_two_period(int n2, int ninf, double rho, double gamma,
                                 std::uint64_t seed) {
  if (n2 < 1 || ninf < 1)
    throw ValidationError("two-period design needs units in both cohorts");
  if (!(rho >= -1.0 && rho <= 1.0))
    throw ValidationError("rho must lie in [-1, 1]");
  if (gamma < 0) throw ValidationError("gamma must be >= 0");

  const int n = n2 + ninf;
  PotentialOutcomes po;
  po.n = n;
  po.t_len = 2;
  po.cohort_values = {2, kNever};
  po.cohort_sizes = {n2, ninf};

  Rng rng = Rng::derive(seed, 0, 0);
  Eigen::MatrixXd base(n, 2);
  const double cross = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    base(i, 0) = z1;
    base(i, 1) = rho * z1 + cross * z2;
  }

  const double mean2 = base.col(1).mean();
  Eigen::MatrixXd treated = base;
  treated.col(1) += gamma * (base.col(1).array() - mean2).matrix();

  po.y = {treated, base};
  return po;
}

PotentialOutcomes calibrated(const PanelData& panel, double effect_sd_scale,
                             std::uint64_t seed) {
  PotentialOutcomes po;
  po.n = panel.n_units();
  po.t_len = panel.n_periods();
  po.cohort_values = panel.cohort_values;
  po.cohort_sizes = panel.cohort_sizes;

  const Eigen::MatrixXd& baseline = panel.outcomes;
  Eigen::VectorXd effects = Eigen::VectorXd::Zero(po.n);
  if (effect_sd_scale > 0) {
    const double mean = baseline.mean();
    const double sd = std::sqrt((baseline.array() - mean).square().sum() /
                                (baseline.size() - 1));
    Rng rng = Rng::derive(seed, 0, 1);
    for (int i = 0; i < po.n; ++i)
      effects[i] = effect_sd_scale * sd * rng.normal();
  }

  for (int g : po.cohort_values) {
    Eigen::MatrixXd yg = baseline;
    if (g != kNever && effect_sd_scale > 0)
      for (int t = g; t <= po.t_len; ++t) yg.col(t - 1) += effects;
    po.y.push_back(std::move(yg));
  }
  return po;
}

PotentialOutcomes generate(const PopulationSpec& spec) {
  switch (spec.kind) {
    case PopulationSpec::Kind::kTwoPeriod:
      return gen_two_period(spec.n2, spec.ninf, spec.rho, spec.gamma, spec.seed);
    case PopulationSpec::Kind::kCalibratedNull: {
      const PanelData panel = load_panel_file(spec.panel_path);
      return calibrated(panel, 0.0, spec.seed);
    }
    case PopulationSpec::Kind::kCalibratedHetero: {
      const PanelData panel = load_panel_file(spec.panel_path);
      return calibrated(panel, spec.effect_sd_scale, spec.seed);
    }
  }
  throw ValidationError("unknown population kind");
}

Eigen::MatrixXd realize(const PotentialOutcomes& po,
                        const std::vector<int>& first_treated) {
  Eigen::MatrixXd out(po.n, po.t_len);
  for (int i = 0; i < po.n; ++i) {
    const int k = po.cohort_index(first_treated[i]);
    if (k < 0) throw ValidationError("assignment label outside the cohort set");
    out.row(i) = po.y[k].row(i);
  }
  return out;
}

PanelData skeleton_panel(const PotentialOutcomes& po) {
  PanelData p;
  char buf[16];
  for (int i = 0; i < po.n; ++i) {
    std::snprintf(buf, sizeof(buf), "u%06d", i);
    p.unit_ids.push_back(buf);
  }
  for (int t = 1; t <= po.t_len; ++t) p.period_labels.push_back(t);
  p.first_treated = base_labels(po);
  p.outcomes = realize(po, p.first_treated);
  p.cohort_values = po.cohort_values;
  p.cohort_sizes = po.cohort_sizes;
  return p;
}

std::vector<int> draw_assignment(const PotentialOutcomes& po, Rng& rng) {
  std::vector<int> labels = base_labels(po);
  rng.shuffle(labels);
  return labels;
}

double true_tau(const PotentialOutcomes& po, int t, int g, int g_prime) {
  const int a = po.cohort_index(g);
  const int b = po.cohort_index(g_prime);
  if (a < 0 || b < 0) throw ValidationError("cohort outside the science table");
  return (po.y[a].col(t - 1) - po.y[b].col(t - 1)).mean();
}

double true_theta(const PotentialOutcomes& po, const EstimandWeights& w) {
  double theta = 0;
  for (const auto& tr : w.weights)
    theta += tr.w * true_tau(po, tr.t, tr.g, tr.g_prime);
  return theta;
}

Eigen::MatrixXd finite_population_cov(const Eigen::MatrixXd& values) {
  const int n = static_cast<int>(values.rows());
  if (n < 2) throw ValidationError("finite-population covariance needs n >= 2");
  const Eigen::RowVectorXd mean = values.colwise().mean();
  const Eigen::MatrixXd centered = values.rowwise() - mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(values.cols(), values.cols());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov / static_cast<double>(n - 1);
}

Eigen::MatrixXd true_cohort_cov(const PotentialOutcomes& po, int g) {
  const int k = po.cohort_index(g);
  if (k < 0) throw ValidationError("cohort outside the science table");
  return finite_population_cov(po.y[k]);
}

namespace {

// Stacked per-cohort weight matrix [a_theta; a_zero], (K + M) x T.
Eigen::MatrixXd stacked_weights(const EstimandWeights& w,
                                const AdjustmentSpec& adj, int cohort) {
  const int k_comp = w.components;
  const int m = adj.dim;
  Eigen::MatrixXd a(k_comp + m, w.t_len);
  a.topRows(k_comp) = w.a_theta[cohort];
  if (m > 0) a.bottomRows(m) = adj.a_zero[cohort];
  return a;
}

}  // namespace

Eigen::MatrixXd closed_form_variance(const PotentialOutcomes& po,
                                     const EstimandWeights& w,
                                     const AdjustmentSpec& adj) {
  const int dim = w.components + adj.dim;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd stacked_effects = Eigen::MatrixXd::Zero(po.n, dim);
  for (std::size_t k = 0; k < po.cohort_values.size(); ++k) {
    const Eigen::MatrixXd a = stacked_weights(w, adj, static_cast<int>(k));
    const Eigen::MatrixXd s = finite_population_cov(po.y[k]);
    var += (a * s * a.transpose()) / po.cohort_sizes[k];
    stacked_effects += po.y[k] * a.transpose();
  }
  var -= finite_population_cov(stacked_effects) / po.n;
  return ((var + var.transpose()) / 2.0).eval();
}

Eigen::MatrixXd true_s_theta(const PotentialOutcomes& po,
                             const EstimandWeights& w) {
  Eigen::MatrixXd weighted = Eigen::MatrixXd::Zero(po.n, w.components);
  for (std::size_t k = 0; k < po.cohort_values.size(); ++k)
    weighted += po.y[k] * w.a_theta[k].transpose();
  return finite_population_cov(weighted);
}

Eigen::MatrixXd oracle_beta(const PotentialOutcomes& po,
                            const EstimandWeights& w,
                            const AdjustmentSpec& adj) {
  VarianceComponents components;
  const int k_comp = w.components;
  const int m = adj.dim;
  components.v_theta0 = Eigen::MatrixXd::Zero(k_comp, k_comp);
  components.v_x_theta0 = Eigen::MatrixXd::Zero(m, k_comp);
  components.v_x = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < po.cohort_values.size(); ++k) {
    const Eigen::MatrixXd s = finite_population_cov(po.y[k]);
    const double inv_n = 1.0 / po.cohort_sizes[k];
    const Eigen::MatrixXd sa = s * w.a_theta[k].transpose();
    components.v_theta0 += inv_n * w.a_theta[k] * sa;
    if (m > 0) {
      components.v_x_theta0 += inv_n * adj.a_zero[k] * sa;
      components.v_x += inv_n * adj.a_zero[k] * s * adj.a_zero[k].transpose();
    }
  }
  components.v_x = ((components.v_x + components.v_x.transpose()) / 2.0).eval();
  return beta_star(components);
}

double assignment_count(const PotentialOutcomes& po) {
  // Product of binomial coefficients, computed multiplicatively.
  double count = 1.0;
  int remaining = po.n;
  for (int size : po.cohort_sizes) {
    for (int j = 1; j <= size; ++j) {
      count *= static_cast<double>(remaining - size + j) / j;
      if (count > 1e15) return count;  // already far past any usable bound
    }
    remaining -= size;
  }
  return count;
}

void for_each_assignment(
    const PotentialOutcomes& po,
    const std::function<void(const std::vector<int>&, const Eigen::MatrixXd&)>& fn) {
  const double count = assignment_count(po);
  if (count > 1e6 + 0.5)
    throw ValidationError("enumeration would visit " + std::to_string(count) +
                          " assignments; the cap is 1e6");
  std::vector<int> labels = base_labels(po);
  std::sort(labels.begin(), labels.end());
  do {
    fn(labels, realize(po, labels));
  } while (std::next_permutation(labels.begin(), labels.end()));
}

EnumerationMoments enumerate_stat_moments(const PotentialOutcomes& po,
                                          const EstimandWeights& w,
                                          const AdjustmentSpec& adj) {
  const int dim = w.components + adj.dim;
  EnumerationMoments out;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(dim, dim);
  long count = 0;

  for_each_assignment(po, [&](const std::vector<int>& labels,
                              const Eigen::MatrixXd& outcomes) {
    PanelView view{&outcomes, &labels, &po.cohort_values, &po.cohort_sizes};
    const CohortStats stats = cohort_stats(view, false, 1);
    const PointEstimates pts = point_estimates(stats, w, adj);
    Eigen::VectorXd stacked(dim);
    stacked.head(w.components) = pts.theta0;
    stacked.tail(adj.dim) = pts.xhat;
    sum += stacked;
    sum_sq.selfadjointView<Eigen::Lower>().rankUpdate(stacked);
    ++count;
  });

  out.count = count;
  out.mean = sum / static_cast<double>(count);
  sum_sq.triangularView<Eigen::StrictlyUpper>() = sum_sq.transpose();
  out.var = sum_sq / static_cast<double>(count) - out.mean * out.mean.transpose();
  out.var = ((out.var + out.var.transpose()) / 2.0).eval();
  return out;
}

EnumeratedEstimator enumerate_estimator(const PotentialOutcomes& po,
                                        const EstimandWeights& w,
                                        const AdjustmentSpec& adj,
                                        const Eigen::MatrixXd& beta) {
  if (w.components != 1)
    throw ValidationError("enumerate_estimator expects a scalar estimand");
  EnumeratedEstimator out;
  double sum = 0, sum_sq = 0;
  long count = 0;
  for_each_assignment(po, [&](const std::vector<int>& labels,
                              const Eigen::MatrixXd& outcomes) {
    PanelView view{&outcomes, &labels, &po.cohort_values, &po.cohort_sizes};
    const CohortStats stats = cohort_stats(view, false, 1);
    const PointEstimates pts = point_estimates(stats, w, adj);
    const double theta = pts.theta0[0] - pts.xhat.dot(beta.col(0));
    sum += theta;
    sum_sq += theta * theta;
    ++count;
  });
  out.count = count;
  out.mean = sum / count;
  out.var = sum_sq / count - out.mean * out.mean;
  return out;
}

std::vector<double> enumerate_studentized(const PotentialOutcomes& po,
                                          const EstimandWeights& w,
                                          const AdjustmentSpec& adj,
                                          const BetaSpec& beta) {
  std::vector<double> ts;
  for_each_assignment(po, [&](const std::vector<int>& labels,
                              const Eigen::MatrixXd& outcomes) {
    PanelView view{&outcomes, &labels, &po.cohort_values, &po.cohort_sizes};
    const FitResult f = fit(view, w, adj, beta, 1);
    double worst = 0;
    for (int k = 0; k < f.est.theta_hat.size(); ++k) {
      double se = f.se_refined[k];
      if (se <= 0) se = f.se_neyman[k];
      const double t = se > 0 ? std::abs(f.est.theta_hat[k]) / se
                              : (f.est.theta_hat[k] == 0.0
                                     ? 0.0
                                     : std::numeric_limits<double>::infinity());
      worst = std::max(worst, t);
    }
    ts.push_back(worst);
  });
  return ts;
}

double enumerate_frt_rejection(const PotentialOutcomes& po,
                               const EstimandWeights& w,
                               const AdjustmentSpec& adj, const BetaSpec& beta,
                               double alpha) {
  const std::vector<double> ts = enumerate_studentized(po, w, adj, beta);
  const long count = static_cast<long>(ts.size());
  long rejected = 0;
  for (double observed : ts) {
    long at_least = 0;
    for (double t : ts)
      if (t >= observed) ++at_least;
    if (static_cast<double>(at_least) / count <= alpha) ++rejected;
  }
  return static_cast<double>(rejected) / count;
}

namespace {

struct McEstimatorState {
  std::string label;
  EstimandWeights w;
  AdjustmentSpec adj;
  BetaSpec beta;
  double truth = 0;
  int group = 0;       // index of the shared (w, adj) bundle
  bool ancova = false;  // non-recommended OLS comparison, point estimate only
};

// ANCOVA I: the treatment coefficient from regressing the final-period
// outcome on treatment and the demeaned first-period outcome, without the
// interaction. Kept for comparison; it is not part of the unbiased estimator
// class and can be less efficient than the unadjusted contrast under
// heterogeneous effects, so no design-based standard error is reported.
double ancova1_coefficient(const Eigen::MatrixXd& outcomes,
                           const std::vector<int>& labels) {
  const int n = static_cast<int>(outcomes.rows());
  const int last = static_cast<int>(outcomes.cols()) - 1;
  double d_mean = 0, x_mean = 0, y_mean = 0;
  for (int i = 0; i < n; ++i) {
    d_mean += labels[i] != kNever ? 1.0 : 0.0;
    x_mean += outcomes(i, 0);
    y_mean += outcomes(i, last);
  }
  d_mean /= n;
  x_mean /= n;
  y_mean /= n;
  double s_dd = 0, s_dx = 0, s_xx = 0, s_dy = 0, s_xy = 0;
  for (int i = 0; i < n; ++i) {
    const double d = (labels[i] != kNever ? 1.0 : 0.0) - d_mean;
    const double x = outcomes(i, 0) - x_mean;
    const double y = outcomes(i, last) - y_mean;
    s_dd += d * d;
    s_dx += d * x;
    s_xx += x * x;
    s_dy += d * y;
    s_xy += x * y;
  }
  const double denom = s_dd * s_xx - s_dx * s_dx;
  if (denom == 0) throw NumericError("ANCOVA regression is singular");
  return (s_dy * s_xx - s_dx * s_xy) / denom;
}

struct RepRecord {
  double theta = 0, se = 0, beta0 = 0, frt_p = -1;
  bool ok = false;
};

struct EstimatorEval {
  double theta = 0, se_refined = 0, se_neyman = 0, beta0 = 0;
  bool ok = false;
};

// One pass over a labeling evaluating every estimator, sharing cohort stats
// and the per-group variance blocks.
std::vector<EstimatorEval> eval_estimators(
    const Eigen::MatrixXd& outcomes, const std::vector<int>& labels,
    const PotentialOutcomes& po,
    const std::vector<std::pair<EstimandWeights, AdjustmentSpec>>& groups,
    const std::vector<McEstimatorState>& estimators) {
  PanelView view{&outcomes, &labels, &po.cohort_values, &po.cohort_sizes};
  const CohortStats stats = cohort_stats(view, true, 1);

  struct GroupEval {
    PointEstimates pts;
    VarianceComponents comps;
    Refinement refinement;
  };
  std::vector<GroupEval> group_evals;
  group_evals.reserve(groups.size());
  for (const auto& [w, adj] : groups)
    group_evals.push_back({point_estimates(stats, w, adj),
                           variance_components(stats, w, adj),
                           heterogeneity_refinement(stats, w)});

  std::vector<EstimatorEval> out(estimators.size());
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    const auto& st = estimators[e];
    EstimatorEval& ev = out[e];
    if (st.ancova) {
      try {
        ev.theta = ancova1_coefficient(outcomes, labels);
        ev.ok = true;
      } catch (const NumericError&) {
        ev.ok = false;
      }
      continue;
    }
    const GroupEval& ge = group_evals[st.group];
    try {
      const Eigen::MatrixXd beta = resolve_beta(st.beta, ge.comps, st.adj, 1);
      ev.theta = ge.pts.theta0[0] - ge.pts.xhat.dot(beta.col(0));
      const Eigen::MatrixXd cov = estimator_covariance(ge.comps, beta);
      ev.se_neyman = std::sqrt(std::max(cov(0, 0), 0.0));
      ev.se_refined =
          ge.refinement.available
              ? std::sqrt(std::max(cov(0, 0) - ge.refinement.subtracted(0, 0), 0.0))
              : ev.se_neyman;
      ev.beta0 = beta.size() > 0 ? beta(0, 0) : 0.0;
      ev.ok = true;
    } catch (const NumericError&) {
      ev.ok = false;
    }
  }
  return out;
}

double studentize(const EstimatorEval& ev) {
  double se = ev.se_refined;
  if (se <= 0) se = ev.se_neyman;
  if (se > 0) return std::abs(ev.theta) / se;
  return ev.theta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<McRow> run_mc(const PotentialOutcomes& po, const McConfig& config) {
  if (config.reps < 1) throw ValidationError("Monte Carlo needs reps >= 1");
  const PanelData skeleton = skeleton_panel(po);

  // Resolve presets, sharing compiled weight systems across presets that use
  // the same comparison and estimand.
  std::vector<McEstimatorState> estimators;
  std::map<std::string, int> group_of;
  std::vector<std::pair<EstimandWeights, AdjustmentSpec>> groups;
  for (const std::string& name : config.estimators) {
    if (name == "ancova1") {
      if (po.t_len != 2 || po.cohort_values != std::vector<int>{2, kNever})
        throw ValidationError(
            "the ancova1 comparison is defined for the two-period design only");
      McEstimatorState st;
      st.label = name;
      st.ancova = true;
      st.group = -1;
      st.truth = true_theta(
          po, build_estimand(EstimandSpec::parse("simple"), skeleton));
      estimators.push_back(std::move(st));
      continue;
    }
    const Preset preset = resolve_preset(name);
    const std::string estimand_text =
        preset.forces_es0 ? std::string("es0") : config.estimand;
    const std::string key = estimand_text + "#" + to_string(preset.comparison);
    if (!group_of.count(key)) {
      const EstimandWeights w = build_estimand(
          EstimandSpec::parse(estimand_text), skeleton, preset.comparison);
      const AdjustmentSpec adj = build_adjustment(config.adjustment, w, skeleton);
      group_of[key] = static_cast<int>(groups.size());
      groups.emplace_back(w, adj);
    }
    McEstimatorState st;
    st.label = name;
    st.group = group_of[key];
    st.w = groups[st.group].first;
    st.adj = groups[st.group].second;
    st.beta = preset.beta;
    st.truth = true_theta(po, st.w);
    if (st.w.components != 1)
      throw ValidationError("the Monte Carlo runner expects scalar estimands");
    estimators.push_back(std::move(st));
  }

  const int n_est = static_cast<int>(estimators.size());
  const int reps = config.reps;
  std::vector<std::vector<RepRecord>> records(
      n_est, std::vector<RepRecord>(reps));

  auto run_rep = [&](int rep) {
    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(rep) + 1, 0);
    const std::vector<int> labels = draw_assignment(po, rng);
    const Eigen::MatrixXd outcomes = realize(po, labels);

    const std::vector<EstimatorEval> observed =
        eval_estimators(outcomes, labels, po, groups, estimators);
    std::vector<int> live;  // estimators whose FRT statistic is defined
    for (int e = 0; e < n_est; ++e) {
      if (!observed[e].ok) continue;
      RepRecord& rec = records[e][rep];
      rec.theta = observed[e].theta;
      rec.se = observed[e].se_refined;
      rec.beta0 = observed[e].beta0;
      rec.ok = true;
      if (!estimators[e].ancova) live.push_back(e);
    }

    if (config.frt_draws > 0 && !live.empty()) {
      MultiStatistic stat = [&](const std::vector<int>& permuted)
          -> std::optional<Eigen::VectorXd> {
        const std::vector<EstimatorEval> evals =
            eval_estimators(outcomes, permuted, po, groups, estimators);
        Eigen::VectorXd t(static_cast<int>(live.size()));
        for (std::size_t q = 0; q < live.size(); ++q) {
          if (!evals[live[q]].ok) return std::nullopt;
          t[static_cast<int>(q)] = studentize(evals[live[q]]);
        }
        return t;
      };
      FrtOptions fo;
      fo.draws = config.frt_draws;
      fo.seed = mix_seed(config.seed, static_cast<std::uint64_t>(rep));
      fo.threads = 1;
      try {
        const FrtMultiOutcome multi =
            frt_multi_statistic(labels, {}, stat, fo);
        for (std::size_t q = 0; q < live.size(); ++q)
          records[live[q]][rep].frt_p = multi.p[static_cast<int>(q)];
      } catch (const NumericError&) {
        for (int e : live) records[e][rep].frt_p = -1;
      }
    }
  };

  const int workers = std::max(1, std::min(config.threads, reps));
  if (workers == 1) {
    for (int rep = 0; rep < reps; ++rep) run_rep(rep);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int wkr = 0; wkr < workers; ++wkr)
      pool.emplace_back([&] {
        for (;;) {
          const int rep = next.fetch_add(1);
          if (rep >= reps) break;
          run_rep(rep);
        }
      });
    for (auto& th : pool) th.join();
  }

  const double z = normal_quantile(1.0 - config.alpha / 2.0);
  std::vector<McRow> rows;
  for (int e = 0; e < n_est; ++e) {
    McRow row;
    row.estimator = estimators[e].label;
    row.estimand = estimators[e].w.name;
    row.true_theta = estimators[e].truth;
    row.reps = reps;

    double sum = 0, sum_se = 0, sum_beta = 0;
    long ok = 0, covered = 0, frt_done = 0, frt_reject = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const RepRecord& rec = records[e][rep];
      if (!rec.ok) {
        ++row.failures;
        continue;
      }
      ++ok;
      sum += rec.theta;
      sum_se += rec.se;
      sum_beta += rec.beta0;
      if (std::abs(rec.theta - row.true_theta) <= z * rec.se) ++covered;
      if (rec.frt_p >= 0) {
        ++frt_done;
        if (rec.frt_p <= config.alpha) ++frt_reject;
      }
    }
    if (ok > 0) {
      const double mean = sum / ok;
      row.bias = mean - row.true_theta;
      double ss = 0;
      for (int rep = 0; rep < reps; ++rep)
        if (records[e][rep].ok) {
          const double d = records[e][rep].theta - mean;
          ss += d * d;
        }
      row.sd = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
      row.mean_se = sum_se / ok;
      row.coverage = static_cast<double>(covered) / ok;
      row.mean_beta = sum_beta / ok;
      row.frt_size = frt_done > 0
                         ? static_cast<double>(frt_reject) / frt_done
                         : -1.0;
    }
    if (estimators[e].ancova) {  // point estimates only
      row.mean_se = -1.0;
      row.coverage = -1.0;
      row.frt_size = -1.0;
      row.estimand = "simple";
      row.mean_beta = 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace staggered
