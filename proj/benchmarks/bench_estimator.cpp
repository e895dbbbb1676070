#include <benchmark/benchmark.h>

#include "staggered/estimands.hpp"
#include "staggered/estimator.hpp"
#include "staggered/inference.hpp"
#include "staggered/montecarlo.hpp"
#include "staggered/rng.hpp"

using namespace staggered;

namespace {

// Application-scale synthetic panel: 47 cohorts over 72 months.
PanelData large_panel() {
  const int n = 5537, t_len = 72;
  std::vector<int> values;
  for (int g = 17; g < 63; ++g) values.push_back(g);
  values.push_back(72);
  std::vector<int> sizes(values.size(), n / static_cast<int>(values.size()));
  sizes.back() += n - sizes.front() * static_cast<int>(values.size());

  PanelData p;
  Rng rng(4);
  char buf[16];
  int unit = 0;
  for (std::size_t k = 0; k < values.size(); ++k)
    for (int q = 0; q < sizes[k]; ++q) {
      std::snprintf(buf, sizeof(buf), "u%06d", unit++);
      p.unit_ids.push_back(buf);
      p.first_treated.push_back(values[k]);
    }
  for (int t = 1; t <= t_len; ++t) p.period_labels.push_back(t);
  p.outcomes.resize(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < t_len; ++t) p.outcomes(i, t) = rng.normal();
  p.cohort_values = values;
  p.cohort_sizes = sizes;
  return p;
}

void BM_CohortStats(benchmark::State& state) {
  const PanelData panel = large_panel();
  for (auto _ : state) {
    const CohortStats stats =
        cohort_stats(panel, true, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(stats.means.front());
  }
}
BENCHMARK(BM_CohortStats)->Arg(1)->Arg(2)->Arg(4);

void BM_PluginFit(benchmark::State& state) {
  const PanelData panel = large_panel();
  const EstimandWeights w = build_estimand(EstimandSpec::parse("simple"), panel);
  const AdjustmentSpec adj = build_adjustment(AdjustmentKind::kCsScalar, w, panel);
  for (auto _ : state) {
    const FitResult f = fit(PanelView::of(panel), w, adj, BetaSpec::plugin(), 1);
    benchmark::DoNotOptimize(f.est.theta_hat[0]);
  }
}
BENCHMARK(BM_PluginFit);

void BM_FrtDraws(benchmark::State& state) {
  const PanelData panel = large_panel();
  const EstimandWeights w = build_estimand(EstimandSpec::parse("simple"), panel);
  const AdjustmentSpec adj = build_adjustment(AdjustmentKind::kCsScalar, w, panel);
  FrtOptions options;
  options.draws = static_cast<int>(state.range(0));
  options.threads = 2;
  options.seed = 9;
  for (auto _ : state) {
    const FrtOutcome out = frt(panel, w, adj, BetaSpec::plugin(), options);
    benchmark::DoNotOptimize(out.p);
  }
}
BENCHMARK(BM_FrtDraws)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TwoPeriodMcRep(benchmark::State& state) {
  const PotentialOutcomes po = gen_two_period(1000, 1000, 0.5, 0.5, 1);
  McConfig config;
  config.reps = 8;
  config.frt_draws = 0;
  config.threads = 1;
  for (auto _ : state) {
    const auto rows = run_mc(po, config);
    benchmark::DoNotOptimize(rows.front().sd);
  }
}
BENCHMARK(BM_TwoPeriodMcRep);

}  // namespace

BENCHMARK_MAIN();
