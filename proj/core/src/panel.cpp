#include "staggered/panel.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "staggered/csv.hpp"
#include "staggered/errors.hpp"

namespace staggered {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) return false;
    out = static_cast<int>(v);
    return true;
  } catch (...) {
    return false;
  }
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

int PanelData::last_finite_cohort() const {
  int best = 0;
  for (int g : cohort_values)
    if (g != kNever) best = std::max(best, g);
  return best;
}

int PanelData::cohort_index(int g) const {
  auto it = std::lower_bound(cohort_values.begin(), cohort_values.end(), g);
  if (it == cohort_values.end() || *it != g) return -1;
  return static_cast<int>(it - cohort_values.begin());
}

std::string PanelData::label_of(int internal) const {
  if (internal == kNever) return "never";
  if (internal >= 1 && internal <= n_periods())
    return std::to_string(period_labels[internal - 1]);
  return std::to_string(internal);
}

PanelData assemble_panel(std::vector<PanelRow> rows) {
  if (rows.empty()) throw ValidationError("panel is empty");

  std::set<int> period_set;
  for (const auto& r : rows) period_set.insert(r.period);
  std::vector<int> periods(period_set.begin(), period_set.end());
  const int t_len = static_cast<int>(periods.size());
  std::unordered_map<int, int> period_index;  // label -> 1..T
  for (int t = 0; t < t_len; ++t) period_index[periods[t]] = t + 1;

  // Canonical unit order: ascending unit id.
  std::set<std::string> unit_set;
  for (const auto& r : rows) unit_set.insert(r.unit);
  std::vector<std::string> units(unit_set.begin(), unit_set.end());
  const int n = static_cast<int>(units.size());
  std::unordered_map<std::string, int> unit_index;
  for (int i = 0; i < n; ++i) unit_index[units[i]] = i;

  PanelData p;
  p.unit_ids = std::move(units);
  p.period_labels = periods;
  p.outcomes.setZero(n, t_len);
  p.first_treated.assign(n, 0);

  std::vector<int> seen_first(n, -1);  // raw first_treated label per unit
  std::vector<std::string> seen_cluster(n), seen_stratum(n);
  std::vector<char> have_cluster(n, 0), have_stratum(n, 0);
  std::vector<char> filled(static_cast<std::size_t>(n) * t_len, 0);
  bool any_cluster = false, any_stratum = false;

  for (const auto& r : rows) {
    const int i = unit_index[r.unit];
    const int t = period_index[r.period];
    auto& cell = filled[static_cast<std::size_t>(i) * t_len + (t - 1)];
    if (cell)
      throw ValidationError("duplicate (unit, period) cell: unit '" + r.unit +
                            "', period " + std::to_string(r.period));
    cell = 1;
    p.outcomes(i, t - 1) = r.outcome;

    if (seen_first[i] == -1) {
      seen_first[i] = r.first_treated_label;
    } else if (seen_first[i] != r.first_treated_label) {
      throw ValidationError("unit '" + r.unit +
                            "' has inconsistent first_treated values");
    }
    if (!r.cluster.empty()) {
      any_cluster = true;
      if (have_cluster[i] && seen_cluster[i] != r.cluster)
        throw ValidationError("unit '" + r.unit + "' has inconsistent cluster ids");
      seen_cluster[i] = r.cluster;
      have_cluster[i] = 1;
    }
    if (!r.stratum.empty()) {
      any_stratum = true;
      if (have_stratum[i] && seen_stratum[i] != r.stratum)
        throw ValidationError("unit '" + r.unit + "' has inconsistent stratum ids");
      seen_stratum[i] = r.stratum;
      have_stratum[i] = 1;
    }
  }

  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t)
      if (!filled[static_cast<std::size_t>(i) * t_len + t])
        throw ValidationError("unbalanced panel: unit '" + p.unit_ids[i] +
                              "' is missing period " +
                              std::to_string(p.period_labels[t]));

  for (int i = 0; i < n; ++i) {
    const int raw = seen_first[i];
    if (raw == kNever) {
      p.first_treated[i] = kNever;
      continue;
    }
    auto it = period_index.find(raw);
    if (it == period_index.end())
      throw ValidationError("unit '" + p.unit_ids[i] + "': first_treated " +
                            std::to_string(raw) +
                            " is not a period label and not never-treated");
    p.first_treated[i] = it->second;
  }

  if (any_cluster) {
    p.cluster_ids.resize(n);
    for (int i = 0; i < n; ++i) {
      if (!have_cluster[i])
        throw ValidationError("unit '" + p.unit_ids[i] + "' is missing a cluster id");
      p.cluster_ids[i] = seen_cluster[i];
    }
    // Clusters must be homogeneous in treatment timing.
    std::map<std::string, int> cluster_g;
    for (int i = 0; i < n; ++i) {
      auto [it, inserted] = cluster_g.emplace(p.cluster_ids[i], p.first_treated[i]);
      if (!inserted && it->second != p.first_treated[i])
        throw ValidationError("cluster '" + p.cluster_ids[i] +
                              "' spans two cohorts");
    }
  }
  if (any_stratum) {
    p.stratum_ids.resize(n);
    for (int i = 0; i < n; ++i) {
      if (!have_stratum[i])
        throw ValidationError("unit '" + p.unit_ids[i] + "' is missing a stratum id");
      p.stratum_ids[i] = seen_stratum[i];
    }
  }

  std::map<int, int> counts;
  for (int g : p.first_treated) counts[g] += 1;
  for (auto& [g, c] : counts) {
    p.cohort_values.push_back(g);
    p.cohort_sizes.push_back(c);
  }
  if (p.cohort_values.size() < 2)
    throw ValidationError(
        "panel needs at least two treatment-timing cohorts; found " +
        std::to_string(p.cohort_values.size()));
  return p;
}

PanelData load_panel(std::istream& in, const LoadOptions& options) {
  std::vector<std::string> fields;
  if (!csv::next_row(in, fields)) throw ValidationError("empty input stream");

  std::map<std::string, int> col;
  for (int j = 0; j < static_cast<int>(fields.size()); ++j)
    col[lower(csv::trim(fields[j]))] = j;
  for (const char* required : {"unit", "period", "first_treated", "outcome"})
    if (!col.count(required))
      throw ValidationError(std::string("missing required column '") + required + "'");
  const int n_cols = static_cast<int>(fields.size());
  const std::string cluster_col = lower(options.cluster_col);
  const std::string stratum_col = lower(options.stratum_col);
  const bool has_cluster = col.count(cluster_col) > 0;
  const bool has_stratum = col.count(stratum_col) > 0;

  std::vector<PanelRow> rows;
  long line_no = 1;
  while (csv::next_row(in, fields)) {
    ++line_no;
    if (static_cast<int>(fields.size()) != n_cols)
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_cols) + " fields, got " +
                            std::to_string(fields.size()));
    PanelRow r;
    r.unit = csv::trim(fields[col["unit"]]);
    if (r.unit.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty unit id");
    if (!parse_int(csv::trim(fields[col["period"]]), r.period))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": period must be an integer");
    const std::string ft = lower(csv::trim(fields[col["first_treated"]]));
    if (ft.empty() || ft == "inf" || ft == "never") {
      r.first_treated_label = kNever;
    } else if (!parse_int(ft, r.first_treated_label)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": first_treated must be a period label, empty, "
                            "\"Inf\", or \"never\"");
    }
    if (!parse_double(csv::trim(fields[col["outcome"]]), r.outcome))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": outcome must be numeric");
    if (has_cluster) r.cluster = csv::trim(fields[col[cluster_col]]);
    if (has_stratum) r.stratum = csv::trim(fields[col[stratum_col]]);
    rows.push_back(std::move(r));
  }
  return assemble_panel(std::move(rows));
}

PanelData load_panel_file(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");
  return load_panel(in, options);
}

std::vector<std::pair<int, int>> identified_pairs(
    const std::vector<int>& cohort_values, int t_len) {
  const bool never = !cohort_values.empty() && cohort_values.back() == kNever;
  int g_max = 0;
  for (int g : cohort_values)
    if (g != kNever) g_max = std::max(g_max, g);

  std::vector<std::pair<int, int>> out;
  for (int t = 1; t <= t_len; ++t)
    for (int g : cohort_values) {
      if (g == kNever || g > t) continue;
      if (!never && t >= g_max) continue;
      out.emplace_back(t, g);
    }
  return out;
}

ValidationReport validate(const PanelData& panel) {
  ValidationReport rep;
  const int n = panel.n_units();
  if (n != panel.outcomes.rows() || panel.n_periods() != panel.outcomes.cols())
    rep.errors.push_back("outcome matrix does not match unit/period counts");
  if (panel.n_cohorts() < 2)
    rep.errors.push_back("fewer than two treatment-timing cohorts");
  if (!panel.outcomes.allFinite())
    rep.errors.push_back("outcomes contain non-finite values");

  long total = 0;
  for (std::size_t k = 0; k < panel.cohort_values.size(); ++k) {
    total += panel.cohort_sizes[k];
    if (panel.cohort_sizes[k] < 2 && panel.cohort_values[k] != kNever)
      rep.warnings.push_back(
          "cohort " + panel.label_of(panel.cohort_values[k]) + " has N_g = " +
          std::to_string(panel.cohort_sizes[k]) +
          ": sample covariance is undefined; cohort unusable for plug-in "
          "adjustment or standard errors");
    else if (panel.cohort_sizes[k] < 2)
      rep.warnings.push_back(
          "never-treated cohort has N_g = 1: sample covariance is undefined");
  }
  if (total != n) rep.errors.push_back("cohort sizes do not sum to N");

  if (!panel.cohort_values.empty() && panel.cohort_values.front() == 1)
    rep.warnings.push_back(
        "cohort first treated in period 1 contributes no pre-treatment "
        "comparisons");
  if (!panel.has_never())
    rep.warnings.push_back(
        "no never-treated cohort: effects are identified only for periods "
        "before " + panel.label_of(panel.last_finite_cohort()));

  rep.identified_set = identified_pairs(panel.cohort_values, panel.n_periods());
  if (rep.identified_set.empty())
    rep.errors.push_back("no (t, g) pair is identified");
  return rep;
}

PanelData collapse_clusters(const PanelData& panel) {
  if (!panel.has_clusters())
    throw ValidationError("collapse_clusters: panel has no cluster ids");

  const int n = panel.n_units();
  const int t_len = panel.n_periods();
  std::map<std::string, std::vector<int>> members;
  for (int i = 0; i < n; ++i) members[panel.cluster_ids[i]].push_back(i);
  const int f = static_cast<int>(members.size());

  PanelData out;
  out.period_labels = panel.period_labels;
  out.outcomes.setZero(f, t_len);
  const double scale = static_cast<double>(f) / n;
  int row = 0;
  for (const auto& [cid, idx] : members) {
    out.unit_ids.push_back(cid);
    int g = panel.first_treated[idx.front()];
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(t_len);
    for (int i : idx) {
      if (panel.first_treated[i] != g)
        throw ValidationError("cluster '" + cid + "' spans two cohorts");
      sum += panel.outcomes.row(i);
    }
    out.outcomes.row(row) = scale * sum;
    out.first_treated.push_back(g);
    if (panel.has_strata()) out.stratum_ids.push_back(panel.stratum_ids[idx.front()]);
    ++row;
  }

  std::map<int, int> counts;
  for (int g : out.first_treated) counts[g] += 1;
  for (auto& [g, c] : counts) {
    out.cohort_values.push_back(g);
    out.cohort_sizes.push_back(c);
  }
  if (out.cohort_values.size() < 2)
    throw ValidationError("collapsed panel has fewer than two cohorts");
  return out;
}

PanelData aggregate_time(const PanelData& panel, int block) {
  if (block < 1) throw ValidationError("aggregate_time: block must be positive");
  const int t_len = panel.n_periods();
  if (t_len % block != 0)
    throw ValidationError("aggregate_time: T = " + std::to_string(t_len) +
                          " is not divisible by block = " + std::to_string(block));
  if (block == 1) return panel;

  const int t_new = t_len / block;
  PanelData out;
  out.unit_ids = panel.unit_ids;
  out.cluster_ids = panel.cluster_ids;
  out.stratum_ids = panel.stratum_ids;
  for (int b = 0; b < t_new; ++b) out.period_labels.push_back(b + 1);

  out.outcomes.setZero(panel.n_units(), t_new);
  for (int b = 0; b < t_new; ++b)
    out.outcomes.col(b) =
        panel.outcomes.middleCols(b * block, block).rowwise().mean();

  out.first_treated.reserve(panel.n_units());
  for (int g : panel.first_treated)
    out.first_treated.push_back(g == kNever ? kNever : (g - 1) / block + 1);

  std::map<int, int> counts;
  for (int g : out.first_treated) counts[g] += 1;
  for (auto& [g, c] : counts) {
    out.cohort_values.push_back(g);
    out.cohort_sizes.push_back(c);
  }
  if (out.cohort_values.size() < 2)
    throw ValidationError("aggregated panel has fewer than two cohorts");
  return out;
}

PanelData exclude_units(const PanelData& panel,
                        const std::vector<std::string>& drop) {
  std::set<std::string> gone(drop.begin(), drop.end());
  std::vector<int> keep;
  for (int i = 0; i < panel.n_units(); ++i)
    if (!gone.count(panel.unit_ids[i])) keep.push_back(i);
  if (keep.empty()) throw ValidationError("exclusion list removes every unit");

  PanelData out;
  out.period_labels = panel.period_labels;
  out.outcomes.resize(static_cast<int>(keep.size()), panel.n_periods());
  int row = 0;
  for (int i : keep) {
    out.unit_ids.push_back(panel.unit_ids[i]);
    out.outcomes.row(row++) = panel.outcomes.row(i);
    out.first_treated.push_back(panel.first_treated[i]);
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
    throw ValidationError("exclusions leave fewer than two cohorts");
  return out;
}

}  // namespace staggered
