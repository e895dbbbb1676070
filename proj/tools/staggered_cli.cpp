// Command-line surface: estimate, event-study, balance, frt, simulate.
//
// Exit codes: 0 success, 2 input/validation failure, 3 numerical failure.
// Errors are emitted as machine-readable JSON on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "staggered/csv.hpp"
#include "staggered/errors.hpp"
#include "staggered/estimands.hpp"
#include "staggered/estimator.hpp"
#include "staggered/inference.hpp"
#include "staggered/montecarlo.hpp"
#include "staggered/panel.hpp"

using nlohmann::json;
using namespace staggered;

namespace {

int default_threads() {
  if (const char* env = std::getenv("STAGGERED_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct CommonOpts {
  std::string input;
  std::string output;
  std::string estimand = "simple";
  std::string adjustment = "cs_scalar";
  std::string preset = "plugin";
  std::string comparison = "auto";
  double alpha = 0.05;
  int frt_draws = 500;
  std::uint64_t seed = 1;
  int threads = default_threads();
  std::string cluster_col = "cluster";
  std::string stratum_col = "stratum";
  std::string exclude_file;
  int aggregate_block = 1;
  bool comparison_explicit = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_estimator = true) {
  cmd->add_option("--input,-i", opts.input, "Panel CSV (long format)")->required();
  cmd->add_option("--output,-o", opts.output, "Output path (default stdout)");
  if (with_estimator) {
    cmd->add_option("--estimand", opts.estimand,
                    "simple | calendar | cohort | es<l> | att:<t>,<g> | custom:<file>");
    cmd->add_option("--preset", opts.preset,
                    "plugin | cs | sa | dchaisemartin | did | dim");
  }
  cmd->add_option("--adjustment", opts.adjustment,
                  "cs_scalar | all_pairs | none | custom:<file>");
  cmd->add_option("--comparison", opts.comparison,
                  "auto | never | notyet | lastcohort")
      ->check([&opts](const std::string&) {
        opts.comparison_explicit = true;
        return std::string();
      });
  cmd->add_option("--alpha", opts.alpha, "Confidence level is 1 - alpha");
  cmd->add_option("--frt-draws", opts.frt_draws,
                  "Randomization-test draws (0 disables)");
  cmd->add_option("--seed", opts.seed, "RNG seed");
  cmd->add_option("--threads", opts.threads,
                  "Worker threads (default: STAGGERED_THREADS or hardware)");
  cmd->add_option("--cluster-col", opts.cluster_col,
                  "Column holding cluster ids (collapses to cluster level)");
  cmd->add_option("--stratum-col", opts.stratum_col,
                  "Column holding randomization strata");
  cmd->add_option("--exclude-units", opts.exclude_file,
                  "File with one unit id per line to drop");
  cmd->add_option("--aggregate-time", opts.aggregate_block,
                  "Average outcomes within blocks of this many periods");
}

Comparison parse_comparison(const std::string& text) {
  if (text == "auto") return Comparison::kAuto;
  if (text == "never") return Comparison::kNeverTreated;
  if (text == "notyet") return Comparison::kNotYetTreated;
  if (text == "lastcohort") return Comparison::kLastCohort;
  throw ValidationError("unknown comparison '" + text + "'");
}

std::vector<std::string> read_unit_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open exclusion file '" + path + "'");
  std::vector<std::string> units;
  std::string line;
  while (std::getline(in, line)) {
    const std::string id = csv::trim(line);
    if (!id.empty()) units.push_back(id);
  }
  return units;
}

struct PreparedPanel {
  PanelData panel;
  std::vector<std::string> warnings;
};

PreparedPanel prepare_panel(const CommonOpts& opts) {
  LoadOptions load;
  load.cluster_col = opts.cluster_col;
  load.stratum_col = opts.stratum_col;
  PanelData panel = load_panel_file(opts.input, load);
  if (!opts.exclude_file.empty())
    panel = exclude_units(panel, read_unit_list(opts.exclude_file));
  if (panel.has_clusters()) panel = collapse_clusters(panel);
  if (opts.aggregate_block > 1) panel = aggregate_time(panel, opts.aggregate_block);

  const ValidationReport report = validate(panel);
  if (!report.ok()) {
    std::string joined;
    for (const auto& e : report.errors) joined += (joined.empty() ? "" : "; ") + e;
    throw ValidationError(joined);
  }
  return {std::move(panel), report.warnings};
}

struct ResolvedEstimator {
  Preset preset;
  Comparison comparison = Comparison::kAuto;
  EstimandWeights w;
  AdjustmentSpec adj;
};

std::string custom_path_of(const std::string& adjustment_text) {
  return adjustment_text.rfind("custom:", 0) == 0 ? adjustment_text.substr(7)
                                                  : std::string();
}

ResolvedEstimator resolve_estimator(const CommonOpts& opts,
                                    const PanelData& panel,
                                    const std::string& estimand_text) {
  ResolvedEstimator out;
  out.preset = resolve_preset(opts.preset);

  std::string estimand = estimand_text;
  if (out.preset.forces_es0) {
    if (estimand != "simple" && estimand != "es0")
      throw ValidationError(
          "preset dchaisemartin estimates the instantaneous event-study "
          "effect; drop --estimand or pass es0");
    estimand = "es0";
  }

  out.comparison = opts.comparison_explicit ? parse_comparison(opts.comparison)
                                            : out.preset.comparison;
  if (opts.preset == "sa" && panel.has_never() && !opts.comparison_explicit)
    throw ValidationError(
        "preset sa compares against the last treated cohort, but this panel "
        "has a never-treated cohort; pass --comparison lastcohort to confirm "
        "or use --preset cs");

  out.w = build_estimand(EstimandSpec::parse(estimand), panel, out.comparison);
  out.adj = build_adjustment(parse_adjustment_kind(opts.adjustment), out.w,
                             panel, custom_path_of(opts.adjustment));
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  out << text;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

// ---------------------------------------------------------------------------
// estimate / frt
// ---------------------------------------------------------------------------

json scalar_report(const CommonOpts& opts, const PreparedPanel& prepared,
                   const ResolvedEstimator& est, const InferenceResult& res) {
  const ComponentResult& c = res.components.at(0);
  json diagnostics;
  diagnostics["warnings"] = prepared.warnings;
  for (const auto& w : res.warnings) diagnostics["warnings"].push_back(w);
  diagnostics["dropped_weight"] = est.w.dropped_weight;
  diagnostics["adjustment_dim"] = est.adj.dim;
  diagnostics["refined_fell_back"] = res.refined_fell_back;
  diagnostics["frt_redraws"] = res.frt_redraws;

  json out;
  out["estimand"] = est.w.name;
  out["preset"] = opts.preset;
  out["comparison"] = to_string(est.w.comparison);
  out["adjustment"] = est.adj.name;
  out["theta_hat"] = c.theta;
  out["theta0"] = res.est.theta0[0];
  out["xhat"] = vector_to_json(res.est.xhat);
  out["beta"] = vector_to_json(res.est.beta.col(0));
  out["se_neyman"] = c.se_neyman;
  out["se_refined"] = c.se_refined;
  out["alpha"] = res.alpha;
  out["ci"] = {c.ci_lo, c.ci_hi};
  if (c.frt_p >= 0)
    out["frt_p"] = c.frt_p;
  else
    out["frt_p"] = nullptr;
  out["frt_draws"] = res.frt_draws;
  out["seed"] = res.seed;
  out["n_units"] = prepared.panel.n_units();
  out["n_periods"] = prepared.panel.n_periods();
  out["n_cohorts"] = prepared.panel.n_cohorts();
  out["diagnostics"] = diagnostics;
  return out;
}

// Per-stratum estimation pooled by population share; the FRT permutes within
// strata and recomputes the pooled studentized statistic.
json stratified_report(const CommonOpts& opts, const PreparedPanel& prepared,
                       const std::string& estimand_text) {
  const PanelData& full = prepared.panel;
  std::map<std::string, std::vector<int>> members;
  for (int i = 0; i < full.n_units(); ++i) members[full.stratum_ids[i]].push_back(i);
  if (members.size() < 2)
    throw ValidationError("stratified run needs at least two strata");

  struct Stratum {
    std::string id;
    PanelData panel;
    ResolvedEstimator est;
    std::vector<int> rows;  // positions in the full panel
    double share = 0;
  };
  std::vector<Stratum> strata;
  for (const auto& [id, rows] : members) {
    std::vector<std::string> drop;
    std::set<int> keep(rows.begin(), rows.end());
    for (int i = 0; i < full.n_units(); ++i)
      if (!keep.count(i)) drop.push_back(full.unit_ids[i]);
    Stratum s;
    s.id = id;
    s.panel = exclude_units(full, drop);
    s.panel.stratum_ids.clear();
    const ValidationReport rep = validate(s.panel);
    if (!rep.ok())
      throw ValidationError("stratum '" + id + "': " + rep.errors.front());
    s.est = resolve_estimator(opts, s.panel, estimand_text);
    if (s.est.w.components != 1)
      throw ValidationError("stratified runs support scalar estimands only");
    s.rows = rows;
    s.share = static_cast<double>(rows.size()) / full.n_units();
    strata.push_back(std::move(s));
  }

  auto pooled_fit = [&](const std::vector<int>& labels)
      -> std::optional<std::pair<double, double>> {
    double theta = 0, var = 0;
    for (const auto& s : strata) {
      std::vector<int> sub_labels(s.rows.size());
      for (std::size_t q = 0; q < s.rows.size(); ++q)
        sub_labels[q] = labels[s.rows[q]];
      PanelView view{&s.panel.outcomes, &sub_labels, &s.panel.cohort_values,
                     &s.panel.cohort_sizes};
      try {
        const FitResult f = fit(view, s.est.w, s.est.adj, s.est.preset.beta, 1);
        theta += s.share * f.est.theta_hat[0];
        var += s.share * s.share * f.se_refined[0] * f.se_refined[0];
      } catch (const NumericError&) {
        return std::nullopt;
      }
    }
    return std::make_pair(theta, std::sqrt(var));
  };

  auto observed = pooled_fit(full.first_treated);
  if (!observed) throw NumericError("singular adjustment variance in a stratum");
  const auto [theta, se] = *observed;
  const auto [ci_lo, ci_hi] = confidence_interval(theta, se, opts.alpha);

  double frt_p = -1;
  long redraws = 0;
  if (opts.frt_draws > 0) {
    Statistic stat =
        [&](const std::vector<int>& labels) -> std::optional<double> {
      auto f = pooled_fit(labels);
      if (!f) return std::nullopt;
      return f->second > 0 ? std::abs(f->first) / f->second
                           : (f->first == 0 ? 0.0
                                            : std::numeric_limits<double>::infinity());
    };
    FrtOptions fo;
    fo.draws = opts.frt_draws;
    fo.seed = opts.seed;
    fo.threads = opts.threads;
    const FrtOutcome out = frt_statistic(full.first_treated, full.stratum_ids,
                                         stat, fo);
    frt_p = out.p;
    redraws = out.redraws;
  }

  json per_stratum = json::array();
  for (const auto& s : strata) {
    const FitResult f = fit(PanelView::of(s.panel), s.est.w, s.est.adj,
                            s.est.preset.beta, opts.threads);
    json row;
    row["stratum"] = s.id;
    row["share"] = s.share;
    row["theta_hat"] = f.est.theta_hat[0];
    row["se_refined"] = f.se_refined[0];
    per_stratum.push_back(row);
  }

  json out;
  out["estimand"] = strata.front().est.w.name;
  out["preset"] = opts.preset;
  out["pooling"] = "stratum population share";
  out["theta_hat"] = theta;
  out["se_refined"] = se;
  out["alpha"] = opts.alpha;
  out["ci"] = {ci_lo, ci_hi};
  if (frt_p >= 0)
    out["frt_p"] = frt_p;
  else
    out["frt_p"] = nullptr;
  out["frt_draws"] = opts.frt_draws > 0 ? opts.frt_draws : 0;
  out["frt_redraws"] = redraws;
  out["seed"] = opts.seed;
  out["strata"] = per_stratum;
  out["diagnostics"] = {{"warnings", prepared.warnings}};
  return out;
}

int cmd_estimate(const CommonOpts& opts, bool frt_only) {
  const PreparedPanel prepared = prepare_panel(opts);
  json report;
  if (prepared.panel.has_strata()) {
    report = stratified_report(opts, prepared, opts.estimand);
  } else {
    const ResolvedEstimator est =
        resolve_estimator(opts, prepared.panel, opts.estimand);
    InferenceOptions io;
    io.alpha = opts.alpha;
    io.frt_draws = frt_only && opts.frt_draws == 0 ? 500 : opts.frt_draws;
    io.seed = opts.seed;
    io.threads = opts.threads;
    const InferenceResult res =
        analyze(prepared.panel, est.w, est.adj, est.preset.beta, io);
    report = scalar_report(opts, prepared, est, res);
  }
  write_text(opts.output, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// event-study
// ---------------------------------------------------------------------------

int cmd_event_study(const CommonOpts& opts, int lags, int leads, int band_draws) {
  if (lags < 0 || leads < 0)
    throw ValidationError("lags and leads must be nonnegative");
  PreparedPanel prepared = prepare_panel(opts);
  if (prepared.panel.has_strata())
    throw ValidationError("event-study does not support stratified panels");

  // Leads come from relabelling treatment k periods early; the whole path is
  // then one stacked estimand on the shifted panel so the components share a
  // variance solve and a simultaneous band.
  PanelData working = prepared.panel;
  if (leads > 0) {
    working = shift_for_placebo(working, leads);
    // A cohort relabelled to period 1 has no base period left for the
    // CS-style adjustment; it cannot contribute a lead contrast either way.
    if (parse_adjustment_kind(opts.adjustment) == AdjustmentKind::kCsScalar &&
        working.cohort_index(1) >= 0) {
      std::vector<std::string> drop;
      for (int i = 0; i < working.n_units(); ++i)
        if (working.first_treated[i] == 1) drop.push_back(working.unit_ids[i]);
      std::cerr << "warning: " << drop.size()
                << " units first treated " << leads
                << " periods after the sample start have no pre-period left "
                   "after the placebo shift; dropped\n";
      working = exclude_units(working, drop);
    }
  }

  const Comparison cmp = opts.comparison_explicit
                             ? parse_comparison(opts.comparison)
                             : resolve_preset(opts.preset).comparison;
  std::vector<int> pseudo_lags;
  std::vector<int> event_times;
  for (int l = 0; l <= leads + lags; ++l) {
    const int event_time = l - leads;
    try {
      build_estimand(EstimandSpec::parse("es" + std::to_string(l)), working, cmp);
    } catch (const ValidationError& e) {
      std::cerr << "warning: event time " << event_time
                << " omitted: " << e.what() << "\n";
      continue;
    }
    pseudo_lags.push_back(l);
    event_times.push_back(event_time);
  }
  if (pseudo_lags.empty())
    throw ValidationError("no identified event time in the requested window");

  const EstimandWeights w = build_event_study(pseudo_lags, working, cmp);
  const AdjustmentSpec adj =
      build_adjustment(parse_adjustment_kind(opts.adjustment), w, working,
                       custom_path_of(opts.adjustment));
  const Preset preset = resolve_preset(opts.preset);

  InferenceOptions io;
  io.alpha = opts.alpha;
  io.frt_draws = 0;  // the CSV carries intervals and bands, not p-values
  io.seed = opts.seed;
  io.threads = opts.threads;
  io.band_draws = band_draws;
  const InferenceResult res = analyze(working, w, adj, preset.beta, io);

  std::ostringstream out;
  out << "event_time,estimate,se_neyman,se_refined,ci_lo,ci_hi,band_lo,band_hi\n";
  for (std::size_t k = 0; k < res.components.size(); ++k) {
    const auto& c = res.components[k];
    out << event_times[k] << ',' << csv::format_double(c.theta) << ','
        << csv::format_double(c.se_neyman) << ','
        << csv::format_double(c.se_refined) << ','
        << csv::format_double(c.ci_lo) << ',' << csv::format_double(c.ci_hi)
        << ',' << csv::format_double(c.band_lo) << ','
        << csv::format_double(c.band_hi) << '\n';
  }
  write_text(opts.output, out.str());
  return 0;
}

// ---------------------------------------------------------------------------
// balance
// ---------------------------------------------------------------------------

json balance_block(const PanelData& panel, const CommonOpts& opts) {
  const ResolvedEstimator est = resolve_estimator(opts, panel, opts.estimand);
  FrtOptions fo;
  fo.draws = opts.frt_draws > 0 ? opts.frt_draws : 500;
  fo.seed = opts.seed;
  fo.threads = opts.threads;
  const BalanceReport rep = balance_test(panel, est.adj, fo);

  json components = json::array();
  for (const auto& c : rep.components) {
    json row;
    row["xhat"] = c.xhat;
    row["se"] = c.se;
    row["t"] = c.t_stat;
    row["p_t"] = c.p_t;
    row["p_frt"] = c.p_frt;
    components.push_back(row);
  }
  json out;
  out["estimand"] = est.w.name;
  out["adjustment"] = est.adj.name;
  out["components"] = components;
  out["joint_p_frt"] = rep.joint_p;
  out["frt_draws"] = rep.draws;
  out["frt_redraws"] = rep.redraws;
  return out;
}

int cmd_balance(const CommonOpts& opts) {
  const PreparedPanel prepared = prepare_panel(opts);
  json report;
  if (prepared.panel.has_strata()) {
    // Balance is checked stratum by stratum; each block's FRT permutes only
    // within that stratum.
    std::set<std::string> ids(prepared.panel.stratum_ids.begin(),
                              prepared.panel.stratum_ids.end());
    json blocks = json::array();
    for (const std::string& id : ids) {
      std::vector<std::string> drop;
      for (int i = 0; i < prepared.panel.n_units(); ++i)
        if (prepared.panel.stratum_ids[i] != id)
          drop.push_back(prepared.panel.unit_ids[i]);
      PanelData sub = exclude_units(prepared.panel, drop);
      sub.stratum_ids.clear();
      json block = balance_block(sub, opts);
      block["stratum"] = id;
      blocks.push_back(block);
    }
    report["strata"] = blocks;
  } else {
    report = balance_block(prepared.panel, opts);
  }
  report["seed"] = opts.seed;
  report["diagnostics"] = {{"warnings", prepared.warnings}};
  write_text(opts.output, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key = value");
    kv[csv::trim(trimmed.substr(0, eq))] = csv::trim(trimmed.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& field : csv::split(text)) {
    const std::string item = csv::trim(field);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& output,
                 int threads) {
  auto kv = read_config(config_path);
  const std::set<std::string> known = {
      "kind",   "n2",        "ninf",    "rho",       "gamma",
      "reps",   "seed",      "alpha",   "frt_draws", "estimators",
      "estimand", "adjustment", "panel", "effect_sd_scale"};
  for (const auto& [key, value] : kv)
    if (!known.count(key))
      throw ValidationError("config key '" + key + "' is not recognized");

  auto get = [&](const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };

  PopulationSpec pop;
  const std::string kind = get("kind", "two_period");
  if (kind == "two_period")
    pop.kind = PopulationSpec::Kind::kTwoPeriod;
  else if (kind == "calibrated_null")
    pop.kind = PopulationSpec::Kind::kCalibratedNull;
  else if (kind == "calibrated_hetero")
    pop.kind = PopulationSpec::Kind::kCalibratedHetero;
  else
    throw ValidationError("unknown population kind '" + kind + "'");
  pop.n2 = std::stoi(get("n2", "1000"));
  pop.ninf = std::stoi(get("ninf", "1000"));
  pop.rho = std::stod(get("rho", "0.5"));
  pop.gamma = std::stod(get("gamma", "0"));
  pop.seed = std::stoull(get("seed", "1"));
  pop.panel_path = get("panel", "");
  pop.effect_sd_scale = std::stod(get("effect_sd_scale", "1"));

  McConfig mc;
  mc.estimand = get("estimand", "simple");
  mc.adjustment = parse_adjustment_kind(get("adjustment", "cs_scalar"));
  mc.estimators = split_list(get("estimators", "plugin,did,dim"));
  mc.reps = std::stoi(get("reps", "1000"));
  mc.alpha = std::stod(get("alpha", "0.05"));
  mc.frt_draws = std::stoi(get("frt_draws", "500"));
  mc.seed = pop.seed;
  mc.threads = threads;

  const PotentialOutcomes po = generate(pop);
  const std::vector<McRow> rows = run_mc(po, mc);

  std::ostringstream out;
  out << "estimator,estimand,kind,n_units,rho,gamma,reps,alpha,frt_draws,"
         "true_theta,bias,sd,mean_se,coverage,frt_size,mean_beta,failures\n";
  for (const auto& row : rows) {
    out << row.estimator << ',' << row.estimand << ',' << kind << ',' << po.n
        << ',' << csv::format_double(pop.rho) << ','
        << csv::format_double(pop.gamma) << ',' << row.reps << ','
        << csv::format_double(mc.alpha) << ',' << mc.frt_draws << ','
        << csv::format_double(row.true_theta) << ','
        << csv::format_double(row.bias) << ',' << csv::format_double(row.sd)
        << ',' << csv::format_double(row.mean_se) << ','
        << csv::format_double(row.coverage) << ','
        << csv::format_double(row.frt_size) << ','
        << csv::format_double(row.mean_beta) << ',' << row.failures << '\n';
  }
  write_text(output, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Efficient estimation for staggered rollouts"};
  app.require_subcommand(1);

  CommonOpts est_opts;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Point estimate with standard errors, CI, and FRT p-value");
  add_common(estimate, est_opts);

  CommonOpts frt_opts;
  CLI::App* frt_cmd = app.add_subcommand(
      "frt", "Studentized Fisher randomization test for the chosen estimator");
  add_common(frt_cmd, frt_opts);

  CommonOpts es_opts;
  int lags = 0, leads = 0, band_draws = 100000;
  CLI::App* es_cmd = app.add_subcommand(
      "event-study", "Per-event-time estimates with pointwise and sup-t bands");
  add_common(es_cmd, es_opts);
  es_cmd->add_option("--lags", lags, "Post-treatment event times 0..lags");
  es_cmd->add_option("--leads", leads, "Placebo lead times 1..leads");
  es_cmd->add_option("--band-draws", band_draws, "Draws for the sup-t critical value");

  CommonOpts bal_opts;
  CLI::App* bal_cmd = app.add_subcommand(
      "balance", "Test that pre-treatment contrasts are mean zero");
  add_common(bal_cmd, bal_opts);

  std::string sim_config, sim_output;
  int sim_threads = default_threads();
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo over assignment draws");
  sim_cmd->add_option("--config", sim_config, "Flat key = value spec file")
      ->required();
  sim_cmd->add_option("--output,-o", sim_output, "CSV output (default stdout)");
  sim_cmd->add_option("--threads", sim_threads, "Worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (estimate->parsed()) return cmd_estimate(est_opts, false);
    if (frt_cmd->parsed()) return cmd_estimate(frt_opts, true);
    if (es_cmd->parsed()) return cmd_event_study(es_opts, lags, leads, band_draws);
    if (bal_cmd->parsed()) return cmd_balance(bal_opts);
    if (sim_cmd->parsed()) return cmd_simulate(sim_config, sim_output, sim_threads);
  } catch (const ValidationError& e) {
    json err = {{"error", {{"type", "validation"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const NumericError& e) {
    json err = {{"error", {{"type", "numeric"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  } catch (const std::exception& e) {
    json err = {{"error", {{"type", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
