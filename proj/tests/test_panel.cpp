#include <doctest.h>

#include <sstream>

#include "staggered/errors.hpp"
#include "staggered/panel.hpp"
#include "oracles.hpp"

using namespace staggered;

namespace {

PanelData from_csv(const std::string& text) {
  std::istringstream in(text);
  return load_panel(in);
}

}  // namespace

TEST_CASE("smallest legal panel loads") {
  const PanelData p = from_csv(
      "unit,period,first_treated,outcome\n"
      "a,1,2,1.0\n"
      "a,2,2,2.0\n"
      "b,1,,0.5\n"
      "b,2,,0.25\n");
  CHECK(p.n_units() == 2);
  CHECK(p.n_periods() == 2);
  CHECK(p.cohort_values == std::vector<int>{2, kNever});
  CHECK(p.cohort_sizes == std::vector<int>{1, 1});
  CHECK(p.outcomes(0, 1) == 2.0);
  CHECK(p.first_treated[0] == 2);
  CHECK(p.first_treated[1] == kNever);
}

TEST_CASE("missing cell is fatal as unbalanced") {
  CHECK_THROWS_WITH_AS(from_csv("unit,period,first_treated,outcome\n"
                                "a,1,2,1.0\n"
                                "b,1,,0.5\n"
                                "b,2,,0.25\n"),
                       doctest::Contains("unbalanced"), ValidationError);
}

TEST_CASE("duplicate cell is fatal") {
  CHECK_THROWS_WITH_AS(from_csv("unit,period,first_treated,outcome\n"
                                "a,1,2,1.0\n"
                                "a,1,2,1.5\n"
                                "b,1,,0.5\n"),
                       doctest::Contains("duplicate"), ValidationError);
}

TEST_CASE("first_treated outside the period labels is fatal") {
  CHECK_THROWS_AS(from_csv("unit,period,first_treated,outcome\n"
                           "a,1,9,1.0\n"
                           "a,2,9,2.0\n"
                           "b,1,,0.5\n"
                           "b,2,,0.25\n"),
                  ValidationError);
}

TEST_CASE("never-treated spellings") {
  for (const char* token : {"", "Inf", "inf", "never", "NEVER"}) {
    const PanelData p = from_csv(std::string("unit,period,first_treated,outcome\n") +
                                 "a,1,2,1\na,2,2,2\n" +
                                 "b,1," + token + ",3\nb,2," + token + ",4\n");
    CHECK(p.first_treated[1] == kNever);
  }
}

TEST_CASE("arbitrary integer period labels are re-indexed with a label map") {
  const PanelData p = from_csv(
      "unit,period,first_treated,outcome\n"
      "a,201501,201506,1\n"
      "a,201506,201506,2\n"
      "b,201501,never,3\n"
      "b,201506,never,4\n");
  CHECK(p.period_labels == std::vector<int>{201501, 201506});
  CHECK(p.first_treated[0] == 2);
  CHECK(p.label_of(2) == "201506");
  CHECK(p.label_of(kNever) == "never");
}

TEST_CASE("input row order does not matter") {
  const std::string header = "unit,period,first_treated,outcome\n";
  const std::vector<std::string> rows = {"a,1,2,1.5\n", "a,2,2,2.5\n",
                                         "c,1,,0.25\n", "c,2,,0.5\n",
                                         "b,1,2,-1\n",  "b,2,2,4\n"};
  std::string forward = header, backward = header;
  for (const auto& r : rows) forward += r;
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) backward += *it;

  const PanelData a = from_csv(forward);
  const PanelData b = from_csv(backward);
  CHECK(a.unit_ids == b.unit_ids);
  CHECK(a.first_treated == b.first_treated);
  CHECK((a.outcomes - b.outcomes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identified set with a never-treated cohort") {
  oracle::Toy toy;
  toy.n = 3;
  toy.t = 3;
  toy.y = {{1, 2, 3}, {0, 1, 0}, {2, 2, 2}};
  toy.g = {2, 3, oracle::kNever};
  const ValidationReport rep = validate(oracle::to_panel(toy));
  CHECK(rep.ok());
  const std::vector<std::pair<int, int>> expected = {{2, 2}, {3, 2}, {3, 3}};
  CHECK(rep.identified_set == expected);
}

TEST_CASE("identified set without a never-treated cohort") {
  oracle::Toy toy;
  toy.n = 2;
  toy.t = 3;
  toy.y = {{1, 2, 3}, {0, 1, 0}};
  toy.g = {2, 3};
  const ValidationReport rep = validate(oracle::to_panel(toy));
  const std::vector<std::pair<int, int>> expected = {{2, 2}};
  CHECK(rep.identified_set == expected);
}

TEST_CASE("singleton cohort draws a warning") {
  oracle::Toy toy;
  toy.n = 3;
  toy.t = 2;
  toy.y = {{1, 2}, {0, 1}, {2, 2}};
  toy.g = {2, oracle::kNever, oracle::kNever};
  const ValidationReport rep = validate(oracle::to_panel(toy));
  REQUIRE(!rep.warnings.empty());
  bool found = false;
  for (const auto& w : rep.warnings)
    if (w.find("covariance") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("collapse_clusters with singleton clusters is the identity") {
  std::vector<PanelRow> rows;
  for (int i = 0; i < 4; ++i)
    for (int t = 1; t <= 2; ++t) {
      PanelRow r;
      r.unit = "u" + std::to_string(i);
      r.period = t;
      r.first_treated_label = i < 2 ? 2 : kNever;
      r.outcome = i + 0.5 * t;
      r.cluster = "c" + std::to_string(i);
      rows.push_back(r);
    }
  const PanelData p = assemble_panel(std::move(rows));
  const PanelData c = collapse_clusters(p);
  CHECK(c.n_units() == 4);
  CHECK((c.outcomes - p.outcomes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("collapse_clusters arithmetic") {
  // Two clusters of two units; F/N = 1/2 so cluster outcomes are half sums.
  std::vector<PanelRow> rows;
  auto add = [&](const std::string& unit, const std::string& cluster, int g,
                 double y1, double y2) {
    for (int t = 1; t <= 2; ++t) {
      PanelRow r;
      r.unit = unit;
      r.period = t;
      r.first_treated_label = g;
      r.outcome = t == 1 ? y1 : y2;
      r.cluster = cluster;
      rows.push_back(r);
    }
  };
  add("u1", "A", 2, 1, 1);
  add("u2", "A", 2, 3, 3);
  add("u3", "B", kNever, 2, 2);
  add("u4", "B", kNever, 2, 2);
  const PanelData collapsed = collapse_clusters(assemble_panel(std::move(rows)));
  CHECK(collapsed.n_units() == 2);
  CHECK(collapsed.outcomes(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(collapsed.outcomes(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("collapse_clusters preserves period averages") {
  std::vector<PanelRow> rows;
  int unit = 0;
  for (int cluster = 0; cluster < 3; ++cluster)
    for (int member = 0; member < 2 + cluster; ++member) {
      for (int t = 1; t <= 3; ++t) {
        PanelRow r;
        r.unit = "u" + std::to_string(unit);
        r.period = t;
        r.first_treated_label = cluster == 0 ? kNever : cluster + 1;
        r.outcome = 0.1 * unit + t * t + 0.01 * cluster;
        r.cluster = "c" + std::to_string(cluster);
        rows.push_back(r);
      }
      ++unit;
    }
  const PanelData p = assemble_panel(std::move(rows));
  const PanelData c = collapse_clusters(p);
  for (int t = 0; t < 3; ++t)
    CHECK(p.outcomes.col(t).mean() ==
          doctest::Approx(c.outcomes.col(t).mean()).epsilon(1e-14));
}

TEST_CASE("cluster spanning two cohorts is fatal") {
  std::vector<PanelRow> rows;
  for (int i = 0; i < 2; ++i) {
    PanelRow r;
    r.unit = "u" + std::to_string(i);
    r.period = 1;
    r.first_treated_label = i == 0 ? 1 : kNever;
    r.outcome = i;
    r.cluster = "same";
    rows.push_back(r);
  }
  CHECK_THROWS_WITH_AS(assemble_panel(std::move(rows)),
                       doctest::Contains("spans two cohorts"), ValidationError);
}

TEST_CASE("aggregate_time basics") {
  oracle::Toy toy;
  toy.n = 2;
  toy.t = 2;
  toy.y = {{1, 3}, {0, 2}};
  toy.g = {2, oracle::kNever};
  const PanelData p = oracle::to_panel(toy);

  SUBCASE("block = 1 is the identity") {
    const PanelData a = aggregate_time(p, 1);
    CHECK((a.outcomes - p.outcomes).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("block = 2 averages within the block") {
    const PanelData a = aggregate_time(p, 2);
    CHECK(a.n_periods() == 1);
    CHECK(a.outcomes(0, 0) == 2.0);
    CHECK(a.first_treated[0] == 1);
  }
  SUBCASE("non-divisible block is fatal") {
    oracle::Toy t3 = toy;
    t3.t = 3;
    t3.y = {{1, 3, 5}, {0, 2, 4}};
    CHECK_THROWS_AS(aggregate_time(oracle::to_panel(t3), 2), ValidationError);
  }
}

TEST_CASE("aggregate_time commutes with cohort means") {
  oracle::Toy toy;
  toy.n = 5;
  toy.t = 6;
  toy.g = {3, 3, 5, oracle::kNever, oracle::kNever};
  for (int i = 0; i < toy.n; ++i) {
    std::vector<double> row;
    for (int t = 0; t < toy.t; ++t) row.push_back(std::sin(i + 1.0) * t + i);
    toy.y.push_back(row);
  }
  const PanelData p = oracle::to_panel(toy);
  const PanelData a = aggregate_time(p, 2);

  for (int k = 0; k < p.n_cohorts(); ++k) {
    const int g = p.cohort_values[k];
    // Cohort means of the aggregated panel equal block-averaged cohort means.
    for (int b = 0; b < 3; ++b) {
      double direct = 0, aggregated = 0;
      int count = 0;
      for (int i = 0; i < p.n_units(); ++i) {
        if (p.first_treated[i] != g) continue;
        direct += (p.outcomes(i, 2 * b) + p.outcomes(i, 2 * b + 1)) / 2.0;
        ++count;
      }
      for (int i = 0; i < a.n_units(); ++i)
        if (a.first_treated[i] == (g == kNever ? kNever : (g - 1) / 2 + 1))
          aggregated += a.outcomes(i, b);
      CHECK(direct / count == doctest::Approx(aggregated / count).epsilon(1e-14));
    }
  }
}

TEST_CASE("aggregate_time merges the month-scale design to six periods") {
  std::vector<PanelRow> rows;
  int unit = 0;
  for (int g = 17; g < 17 + 20; ++g) {
    for (int t = 1; t <= 72; ++t) {
      PanelRow r;
      r.unit = "u" + std::to_string(1000 + unit);
      r.period = t;
      r.first_treated_label = g;
      r.outcome = 0.01 * t;
      rows.push_back(r);
    }
    ++unit;
  }
  for (int i = 0; i < 3; ++i) {
    for (int t = 1; t <= 72; ++t) {
      PanelRow r;
      r.unit = "z" + std::to_string(i);
      r.period = t;
      r.first_treated_label = kNever;
      r.outcome = 0.0;
      rows.push_back(r);
    }
  }
  const PanelData p = assemble_panel(std::move(rows));
  const PanelData a = aggregate_time(p, 12);
  CHECK(a.n_periods() == 6);
  int finite = 0;
  for (int g : a.cohort_values)
    if (g != kNever) ++finite;
  CHECK(finite <= 6);
}

TEST_CASE("exclude_units drops rows and recounts cohorts") {
  oracle::Toy toy;
  toy.n = 4;
  toy.t = 2;
  toy.y = {{1, 2}, {2, 3}, {3, 4}, {4, 5}};
  toy.g = {2, 2, oracle::kNever, oracle::kNever};
  const PanelData p = oracle::to_panel(toy);
  const PanelData q = exclude_units(p, {"u0000"});
  CHECK(q.n_units() == 3);
  CHECK(q.cohort_sizes == std::vector<int>{1, 2});
}
