#include "staggered/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "staggered/csv.hpp"
#include "staggered/errors.hpp"

namespace staggered {

namespace {

std::string pair_label(const PanelData& panel, int t, int g) {
  return "(" + panel.label_of(t) + ", " + panel.label_of(g) + ")";
}

Comparison resolve(Comparison c, const PanelData& panel) {
  if (c != Comparison::kAuto) return c;
  return panel.has_never() ? Comparison::kNeverTreated
                           : Comparison::kNotYetTreated;
}

// Accumulates triples and compiles the per-cohort matrices.
class Compiler {
 public:
  Compiler(int components, const PanelData& panel)
      : panel_(panel), k_(components) {
    mats_.resize(panel.n_cohorts());
    for (auto& m : mats_) m = Eigen::MatrixXd::Zero(k_, panel.n_periods());
  }

  void add(int component, int t, int g, int g_prime, double w) {
    if (w == 0.0) return;
    triples_.push_back({component, t, g, g_prime, w});
    mats_[panel_.cohort_index(g)](component, t - 1) += w;
    mats_[panel_.cohort_index(g_prime)](component, t - 1) -= w;
  }

  std::vector<WeightTriple> triples() { return std::move(triples_); }
  std::vector<Eigen::MatrixXd> matrices() { return std::move(mats_); }

 private:
  const PanelData& panel_;
  int k_;
  std::vector<WeightTriple> triples_;
  std::vector<Eigen::MatrixXd> mats_;
};

// ATE-level weights for one component: (t, g) -> w, already restricted to the
// identified set and renormalized to sum to one.
struct AteWeights {
  std::vector<std::pair<std::pair<int, int>, double>> w;
  double dropped = 0.0;  // textbook weight mass lost to identification
};

using PairSet = std::set<std::pair<int, int>>;

double cohort_size(const PanelData& p, int g) {
  return static_cast<double>(p.cohort_sizes[p.cohort_index(g)]);
}

std::vector<int> finite_cohorts(const PanelData& p) {
  std::vector<int> out;
  for (int g : p.cohort_values)
    if (g != kNever) out.push_back(g);
  return out;
}

AteWeights simple_weights(const PanelData& p, const PairSet& id) {
  AteWeights out;
  double denom = 0, denom_all = 0, num_dropped = 0;
  for (int t = 1; t <= p.n_periods(); ++t)
    for (int g : finite_cohorts(p)) {
      if (g > t) continue;
      denom_all += cohort_size(p, g);
      if (id.count({t, g}))
        denom += cohort_size(p, g);
      else
        num_dropped += cohort_size(p, g);
    }
  if (denom == 0) throw ValidationError("simple estimand: no identified (t, g) pair");
  for (int t = 1; t <= p.n_periods(); ++t)
    for (int g : finite_cohorts(p))
      if (g <= t && id.count({t, g}))
        out.w.push_back({{t, g}, cohort_size(p, g) / denom});
  out.dropped = denom_all > 0 ? num_dropped / denom_all : 0.0;
  return out;
}

AteWeights calendar_weights(const PanelData& p, const PairSet& id) {
  AteWeights out;
  std::vector<int> times, times_all;
  for (int t = 1; t <= p.n_periods(); ++t) {
    bool any = false, any_all = false;
    for (int g : finite_cohorts(p)) {
      if (g > t) continue;
      any_all = true;
      if (id.count({t, g})) any = true;
    }
    if (any) times.push_back(t);
    if (any_all) times_all.push_back(t);
  }
  if (times.empty())
    throw ValidationError("calendar estimand: no identified period");
  for (int t : times) {
    double denom = 0;
    for (int g : finite_cohorts(p))
      if (g <= t && id.count({t, g})) denom += cohort_size(p, g);
    for (int g : finite_cohorts(p))
      if (g <= t && id.count({t, g}))
        out.w.push_back({{t, g}, cohort_size(p, g) / (denom * times.size())});
  }
  out.dropped =
      1.0 - static_cast<double>(times.size()) / std::max<std::size_t>(1, times_all.size());
  return out;
}

AteWeights cohort_weights(const PanelData& p, const PairSet& id) {
  AteWeights out;
  std::vector<int> cohorts;
  double size_sum = 0, size_all = 0;
  for (int g : finite_cohorts(p)) {
    size_all += cohort_size(p, g);
    bool any = false;
    for (int t = g; t <= p.n_periods(); ++t)
      if (id.count({t, g})) any = true;
    if (any) {
      cohorts.push_back(g);
      size_sum += cohort_size(p, g);
    }
  }
  if (cohorts.empty())
    throw ValidationError("cohort estimand: no identified cohort");
  for (int g : cohorts) {
    int n_t = 0;
    for (int t = g; t <= p.n_periods(); ++t)
      if (id.count({t, g})) ++n_t;
    const double wg = cohort_size(p, g) / size_sum;
    for (int t = g; t <= p.n_periods(); ++t)
      if (id.count({t, g})) out.w.push_back({{t, g}, wg / n_t});
  }
  out.dropped = size_all > 0 ? 1.0 - size_sum / size_all : 0.0;
  return out;
}

AteWeights event_study_weights(const PanelData& p, const PairSet& id, int lag) {
  AteWeights out;
  double denom = 0, denom_all = 0;
  for (int g : finite_cohorts(p)) {
    if (g + lag > p.n_periods()) continue;
    denom_all += cohort_size(p, g);
    if (id.count({g + lag, g})) denom += cohort_size(p, g);
  }
  if (denom == 0)
    throw ValidationError("event-study lag " + std::to_string(lag) +
                          " touches no identified (t, g) pair");
  for (int g : finite_cohorts(p))
    if (g + lag <= p.n_periods() && id.count({g + lag, g}))
      out.w.push_back({{g + lag, g}, cohort_size(p, g) / denom});
  out.dropped = denom_all > 0 ? 1.0 - denom / denom_all : 0.0;
  return out;
}

AteWeights att_weights(const PanelData& p, const PairSet& id, int raw_t, int raw_g) {
  auto it = std::find(p.period_labels.begin(), p.period_labels.end(), raw_t);
  if (it == p.period_labels.end())
    throw ValidationError("att estimand: period " + std::to_string(raw_t) +
                          " is not a period label");
  const int t = static_cast<int>(it - p.period_labels.begin()) + 1;
  auto ig = std::find(p.period_labels.begin(), p.period_labels.end(), raw_g);
  if (ig == p.period_labels.end())
    throw ValidationError("att estimand: cohort " + std::to_string(raw_g) +
                          " is not a period label");
  const int g = static_cast<int>(ig - p.period_labels.begin()) + 1;
  if (p.cohort_index(g) < 0)
    throw ValidationError("att estimand: no units are first treated at " +
                          std::to_string(raw_g));
  if (!id.count({t, g}))
    throw ValidationError("att estimand touches unidentified pair " +
                          pair_label(p, t, g));
  AteWeights out;
  out.w.push_back({{t, g}, 1.0});
  return out;
}

// Split ATE-level weights into cohort-pair contrasts for one comparison rule.
// Pairs the comparison cannot serve are dropped with renormalization.
void split_into_contrasts(const PanelData& p, Comparison comparison,
                          AteWeights ate, int component, Compiler& compiler,
                          std::vector<std::string>& warnings,
                          double& dropped_accum) {
  const int g_last = p.last_finite_cohort();
  double kept_mass = 0;
  std::vector<std::pair<std::pair<int, int>, double>> usable;
  for (auto& [tg, w] : ate.w) {
    const int t = tg.first;
    if (comparison == Comparison::kLastCohort && t >= g_last) continue;
    usable.push_back({tg, w});
    kept_mass += w;
  }
  if (usable.empty())
    throw ValidationError(
        "estimand has no usable (t, g) pair under the " +
        to_string(comparison) + " comparison");
  if (kept_mass < 1.0 - 1e-12) {
    warnings.push_back("comparison '" + to_string(comparison) + "' drops " +
                       std::to_string(1.0 - kept_mass) +
                       " of the estimand weight; remaining weights renormalized");
    dropped_accum += 1.0 - kept_mass;
  }

  for (auto& [tg, w0] : usable) {
    const auto [t, g] = tg;
    const double w = w0 / kept_mass;
    switch (comparison) {
      case Comparison::kNeverTreated: {
        if (!p.has_never())
          throw ValidationError(
              "never-treated comparison requested but no never-treated cohort "
              "exists");
        compiler.add(component, t, g, kNever, w);
        break;
      }
      case Comparison::kNotYetTreated: {
        double denom = 0;
        for (int gp : p.cohort_values)
          if (gp > t && gp != g) denom += cohort_size(p, gp);
        if (denom == 0)
          throw ValidationError("no cohort is still untreated at period " +
                                p.label_of(t) + " for pair " + pair_label(p, t, g));
        for (int gp : p.cohort_values)
          if (gp > t && gp != g)
            compiler.add(component, t, g, gp, w * cohort_size(p, gp) / denom);
        break;
      }
      case Comparison::kLastCohort: {
        if (g_last == 0 || g == g_last)
          throw ValidationError("last-cohort comparison unavailable for pair " +
                                pair_label(p, t, g));
        compiler.add(component, t, g, g_last, w);
        break;
      }
      case Comparison::kAuto:
        break;  // resolved earlier
    }
  }
}

int compute_g_min(const std::vector<Eigen::MatrixXd>& a_theta,
                  const std::vector<int>& cohort_values) {
  int g_min = kNever;
  for (std::size_t k = 0; k < cohort_values.size(); ++k)
    if (a_theta[k].cwiseAbs().maxCoeff() > 0.0)
      g_min = std::min(g_min, cohort_values[k]);
  return g_min;
}

std::vector<WeightTriple> load_weight_csv(const std::string& path,
                                          const PanelData& panel,
                                          bool allow_component) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open weight file '" + path + "'");
  std::vector<std::string> fields;
  if (!csv::next_row(in, fields))
    throw ValidationError("weight file '" + path + "' is empty");

  std::map<std::string, int> col;
  for (int j = 0; j < static_cast<int>(fields.size()); ++j) {
    std::string name = csv::trim(fields[j]);
    for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    col[name] = j;
  }
  for (const char* required : {"t", "g", "g_prime", "weight"})
    if (!col.count(required))
      throw ValidationError("weight file '" + path + "' is missing column '" +
                            std::string(required) + "'");
  const bool with_component = allow_component && col.count("component");

  auto to_cohort = [&](const std::string& raw) -> int {
    std::string s = raw;
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s.empty() || s == "inf" || s == "never") return kNever;
    const int label = std::stoi(s);
    auto it = std::find(panel.period_labels.begin(), panel.period_labels.end(), label);
    if (it == panel.period_labels.end())
      throw ValidationError("weight file: '" + raw + "' is not a period label");
    return static_cast<int>(it - panel.period_labels.begin()) + 1;
  };

  std::vector<WeightTriple> out;
  while (csv::next_row(in, fields)) {
    WeightTriple w;
    if (with_component) w.component = std::stoi(csv::trim(fields[col["component"]]));
    w.t = to_cohort(csv::trim(fields[col["t"]]));
    if (w.t == kNever) throw ValidationError("weight file: t cannot be never");
    w.g = to_cohort(csv::trim(fields[col["g"]]));
    w.g_prime = to_cohort(csv::trim(fields[col["g_prime"]]));
    w.w = std::stod(csv::trim(fields[col["weight"]]));
    if (panel.cohort_index(w.g) < 0 || panel.cohort_index(w.g_prime) < 0)
      throw ValidationError("weight file: cohort pair (" + panel.label_of(w.g) +
                            ", " + panel.label_of(w.g_prime) + ") not in the panel");
    if (w.g == w.g_prime)
      throw ValidationError("weight file: g and g_prime must differ");
    if (w.t < std::min(w.g, w.g_prime))
      throw ValidationError(
          "weight file: weight on (" + panel.label_of(w.t) + ", " +
          panel.label_of(w.g) + ", " + panel.label_of(w.g_prime) +
          ") violates the normalization a = 0 before both treatment dates");
    out.push_back(w);
  }
  if (out.empty()) throw ValidationError("weight file '" + path + "' has no rows");
  return out;
}

}  // namespace

std::string to_string(Comparison c) {
  switch (c) {
    case Comparison::kAuto: return "auto";
    case Comparison::kNeverTreated: return "never";
    case Comparison::kNotYetTreated: return "notyet";
    case Comparison::kLastCohort: return "lastcohort";
  }
  return "?";
}

EstimandSpec EstimandSpec::parse(const std::string& text) {
  EstimandSpec spec;
  if (text == "simple") {
    spec.kind = Kind::kSimple;
  } else if (text == "calendar") {
    spec.kind = Kind::kCalendar;
  } else if (text == "cohort") {
    spec.kind = Kind::kCohort;
  } else if (text.rfind("es", 0) == 0 && text.size() > 2) {
    spec.kind = Kind::kEventStudy;
    try {
      spec.lag = std::stoi(text.substr(2));
    } catch (...) {
      throw ValidationError("cannot parse event-study lag in '" + text + "'");
    }
    if (spec.lag < 0) throw ValidationError("event-study lag must be >= 0");
  } else if (text.rfind("att:", 0) == 0) {
    spec.kind = Kind::kAttTg;
    std::string rest = text.substr(4);
    auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw ValidationError("att estimand syntax is att:<t>,<g>");
    try {
      spec.att_t = std::stoi(rest.substr(0, comma));
      spec.att_g = std::stoi(rest.substr(comma + 1));
    } catch (...) {
      throw ValidationError("att estimand syntax is att:<t>,<g>");
    }
  } else if (text.rfind("custom:", 0) == 0) {
    spec.kind = Kind::kCustom;
    spec.custom_path = text.substr(7);
  } else {
    throw ValidationError("unknown estimand '" + text + "'");
  }
  return spec;
}

std::string EstimandSpec::describe() const {
  switch (kind) {
    case Kind::kSimple: return "simple";
    case Kind::kCalendar: return "calendar";
    case Kind::kCohort: return "cohort";
    case Kind::kEventStudy: return "es" + std::to_string(lag);
    case Kind::kAttTg:
      return "att:" + std::to_string(att_t) + "," + std::to_string(att_g);
    case Kind::kCustom: return "custom:" + custom_path;
  }
  return "?";
}

EstimandWeights build_estimand(const EstimandSpec& spec, const PanelData& panel,
                               Comparison comparison) {
  const Comparison cmp = resolve(comparison, panel);
  EstimandWeights out;
  out.name = spec.describe();
  out.comparison = cmp;
  out.t_len = panel.n_periods();
  out.cohort_values = panel.cohort_values;
  out.component_labels = {out.name};

  Compiler compiler(1, panel);

  if (spec.kind == EstimandSpec::Kind::kCustom) {
    for (const auto& w : load_weight_csv(spec.custom_path, panel, false))
      compiler.add(0, w.t, w.g, w.g_prime, w.w);
  } else {
    const auto pairs = identified_pairs(panel.cohort_values, panel.n_periods());
    const PairSet id(pairs.begin(), pairs.end());
    AteWeights ate;
    switch (spec.kind) {
      case EstimandSpec::Kind::kSimple: ate = simple_weights(panel, id); break;
      case EstimandSpec::Kind::kCalendar: ate = calendar_weights(panel, id); break;
      case EstimandSpec::Kind::kCohort: ate = cohort_weights(panel, id); break;
      case EstimandSpec::Kind::kEventStudy:
        ate = event_study_weights(panel, id, spec.lag);
        out.component_event_time = {spec.lag};
        break;
      case EstimandSpec::Kind::kAttTg:
        ate = att_weights(panel, id, spec.att_t, spec.att_g);
        break;
      case EstimandSpec::Kind::kCustom: break;
    }
    if (ate.dropped > 0) {
      out.dropped_weight = ate.dropped;
      out.warnings.push_back(
          "estimand restricted to identified pairs; dropped weight share = " +
          std::to_string(ate.dropped));
    }
    split_into_contrasts(panel, cmp, std::move(ate), 0, compiler, out.warnings,
                         out.dropped_weight);
  }

  out.weights = compiler.triples();
  out.a_theta = compiler.matrices();
  out.g_min = compute_g_min(out.a_theta, panel.cohort_values);
  return out;
}

EstimandWeights build_event_study(const std::vector<int>& lags,
                                  const PanelData& panel, Comparison comparison) {
  if (lags.empty()) throw ValidationError("event study needs at least one lag");
  const Comparison cmp = resolve(comparison, panel);
  EstimandWeights out;
  out.name = "event_study";
  out.comparison = cmp;
  out.components = static_cast<int>(lags.size());
  out.t_len = panel.n_periods();
  out.cohort_values = panel.cohort_values;

  const auto pairs = identified_pairs(panel.cohort_values, panel.n_periods());
  const PairSet id(pairs.begin(), pairs.end());

  Compiler compiler(out.components, panel);
  for (int k = 0; k < out.components; ++k) {
    AteWeights ate = event_study_weights(panel, id, lags[k]);
    if (ate.dropped > 0) out.dropped_weight += ate.dropped;
    split_into_contrasts(panel, cmp, std::move(ate), k, compiler, out.warnings,
                         out.dropped_weight);
    out.component_labels.push_back("es" + std::to_string(lags[k]));
    out.component_event_time.push_back(lags[k]);
  }
  out.weights = compiler.triples();
  out.a_theta = compiler.matrices();
  out.g_min = compute_g_min(out.a_theta, panel.cohort_values);
  return out;
}

AdjustmentKind parse_adjustment_kind(const std::string& text) {
  if (text == "none") return AdjustmentKind::kNone;
  if (text == "cs" || text == "cs_scalar") return AdjustmentKind::kCsScalar;
  if (text == "all_pairs") return AdjustmentKind::kAllPairs;
  if (text.rfind("custom:", 0) == 0) return AdjustmentKind::kCustom;
  throw ValidationError("unknown adjustment '" + text + "'");
}

std::string to_string(AdjustmentKind k) {
  switch (k) {
    case AdjustmentKind::kNone: return "none";
    case AdjustmentKind::kCsScalar: return "cs_scalar";
    case AdjustmentKind::kAllPairs: return "all_pairs";
    case AdjustmentKind::kCustom: return "custom";
  }
  return "?";
}

AdjustmentSpec build_adjustment(AdjustmentKind kind, const EstimandWeights& w,
                                const PanelData& panel,
                                const std::string& custom_path) {
  AdjustmentSpec out;
  out.name = to_string(kind);
  out.t_len = panel.n_periods();
  out.cohort_values = panel.cohort_values;

  std::vector<WeightTriple> raw;
  int m = 0;

  switch (kind) {
    case AdjustmentKind::kNone: {
      out.dim = 0;
      for (int k = 0; k < panel.n_cohorts(); ++k)
        out.a_zero.push_back(Eigen::MatrixXd::Zero(0, panel.n_periods()));
      return out;
    }
    case AdjustmentKind::kCsScalar: {
      // Replay each estimand contrast in the last period before either cohort
      // is treated. With the never-treated comparison this is tau(g-1, g, inf)
      // weighted like the estimand; the not-yet-treated and last-cohort
      // variants follow by the same rule.
      m = w.components;
      std::map<std::tuple<int, int, int, int>, double> merged;
      for (const auto& tr : w.weights) {
        const int base = std::min(tr.g, tr.g_prime) - 1;
        if (base < 1)
          throw ValidationError(
              "cs_scalar adjustment: estimand touches cohort first treated in "
              "period " + panel.label_of(std::min(tr.g, tr.g_prime)) +
              ", which has no earlier period");
        merged[{tr.component, base, tr.g, tr.g_prime}] += tr.w;
      }
      for (const auto& [key, weight] : merged) {
        auto [component, base, g, gp] = key;
        raw.push_back({component, base, g, gp, weight});
      }
      break;
    }
    case AdjustmentKind::kAllPairs: {
      // One contrast per ordered cohort pair per shared pre-treatment period.
      for (std::size_t a = 0; a < panel.cohort_values.size(); ++a)
        for (std::size_t b = a + 1; b < panel.cohort_values.size(); ++b) {
          const int g = panel.cohort_values[a];
          const int gp = panel.cohort_values[b];
          for (int t = 1; t < std::min(g, gp) && t <= panel.n_periods(); ++t) {
            raw.push_back({m, t, g, gp, 1.0});
            ++m;
          }
        }
      if (m == 0)
        throw ValidationError("all_pairs adjustment: no shared pre-treatment period");
      const double root_n = std::sqrt(static_cast<double>(panel.n_units()));
      if (m > root_n)
        out.warnings.push_back(
            "adjustment dimension " + std::to_string(m) +
            " exceeds sqrt(N) = " + std::to_string(root_n) +
            "; normal approximations may be poor. Consider cs_scalar or "
            "aggregating periods");
      break;
    }
    case AdjustmentKind::kCustom: {
      auto triples = load_weight_csv(custom_path, panel, true);
      int max_component = 0;
      for (const auto& tr : triples) {
        if (tr.g <= tr.t || tr.g_prime <= tr.t)
          throw ValidationError(
              "custom adjustment: contrast at (" + panel.label_of(tr.t) + ", " +
              panel.label_of(tr.g) + ", " + panel.label_of(tr.g_prime) +
              ") is not pre-treatment for both cohorts");
        max_component = std::max(max_component, tr.component);
      }
      m = max_component + 1;
      raw = std::move(triples);
      break;
    }
  }

  // Compile rows, then drop rows that duplicate an earlier one exactly (the
  // only structural degeneracy; anything else surfaces as a singularity).
  std::vector<Eigen::MatrixXd> mats(panel.n_cohorts());
  for (auto& mm : mats) mm = Eigen::MatrixXd::Zero(m, panel.n_periods());
  for (const auto& tr : raw) {
    mats[panel.cohort_index(tr.g)](tr.component, tr.t - 1) += tr.w;
    mats[panel.cohort_index(tr.g_prime)](tr.component, tr.t - 1) -= tr.w;
  }

  std::vector<int> row_map(m, -1);
  std::vector<int> kept;
  for (int j = 0; j < m; ++j) {
    int found = -1;
    for (std::size_t q = 0; q < kept.size() && found < 0; ++q) {
      bool same = true;
      for (int c = 0; c < panel.n_cohorts() && same; ++c)
        same = (mats[c].row(j) - mats[c].row(kept[q])).cwiseAbs().maxCoeff() == 0.0;
      if (same) found = static_cast<int>(q);
    }
    if (found >= 0) {
      row_map[j] = found;
    } else {
      row_map[j] = static_cast<int>(kept.size());
      kept.push_back(j);
    }
  }
  if (static_cast<int>(kept.size()) < m)
    out.warnings.push_back("removed " + std::to_string(m - kept.size()) +
                           " duplicated adjustment rows");

  out.dim = static_cast<int>(kept.size());
  out.a_zero.resize(panel.n_cohorts());
  for (int c = 0; c < panel.n_cohorts(); ++c) {
    out.a_zero[c] = Eigen::MatrixXd::Zero(out.dim, panel.n_periods());
    for (int q = 0; q < out.dim; ++q) out.a_zero[c].row(q) = mats[c].row(kept[q]);
  }
  for (auto tr : raw) {
    tr.component = row_map[tr.component];
    out.weights.push_back(tr);
  }
  if (kind == AdjustmentKind::kCsScalar) {
    out.component_row.resize(w.components);
    for (int k = 0; k < w.components; ++k) out.component_row[k] = row_map[k];
  }
  return out;
}

PanelData shift_for_placebo(const PanelData& panel, int k) {
  if (k < 1) throw ValidationError("placebo shift requires k >= 1");

  bool any_valid = false;
  for (int g : panel.first_treated)
    if (g != kNever && g - k >= 1) any_valid = true;
  bool any_treated = false;
  for (int g : panel.first_treated)
    if (g != kNever) any_treated = true;
  if (any_treated && !any_valid)
    throw ValidationError(
        "placebo shift k = " + std::to_string(k) +
        " moves every treated cohort before the first period");

  PanelData out;
  out.period_labels = panel.period_labels;
  std::vector<int> keep;
  for (int i = 0; i < panel.n_units(); ++i) {
    const int g = panel.first_treated[i];
    if (g != kNever && g - k < 1) continue;
    keep.push_back(i);
  }
  out.outcomes.resize(static_cast<int>(keep.size()), panel.n_periods());
  int row = 0;
  for (int i : keep) {
    out.unit_ids.push_back(panel.unit_ids[i]);
    out.outcomes.row(row++) = panel.outcomes.row(i);
    const int g = panel.first_treated[i];
    out.first_treated.push_back(g == kNever ? kNever : g - k);
    if (panel.has_clusters()) out.cluster_ids.push_back(panel.cluster_ids[i]);
    if (panel.has_strata()) out.stratum_ids.push_back(panel.stratum_ids[i]);
  }
  std::map<int, int> counts;
  for (int g : out.first_treated) counts[g] += 1;
  for (auto& [g, c] : counts) {
    out.cohort_values.push_back(g);
    out.cohort_sizes.push_back(c);
  }
  if (out.cohort_values.size() < 2)
    throw ValidationError("placebo shift leaves fewer than two cohorts");
  return out;
}

}  // namespace staggered
