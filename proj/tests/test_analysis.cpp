#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "distress/analysis.hpp"
#include "distress/error.hpp"
#include "helpers.hpp"

using namespace distress;
using distress::testing::make_record;
using distress::testing::numeric_matrix;

namespace {

struct Slice {
  std::vector<RowKey> rows;
  std::vector<int> labels;
  std::vector<double> scores;
  Panel panel;
};

void add(Slice& s, const std::string& id, int label, double score, int anchor) {
  s.rows.push_back({id, anchor});
  s.labels.push_back(label);
  s.scores.push_back(score);
  s.panel.records.push_back(make_record(id, anchor, label));
}

// Ten false positives at the anchor, three of which turn positive two years later.
Slice planted_fixture(int anchor) {
  Slice s;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "FP" + std::to_string(i);
    add(s, id, 0, 0.9, anchor);
    for (int y = anchor + 1; y <= anchor + 4; ++y) s.panel.records.push_back(make_record(id, y, i < 3 && y == anchor + 2));
  }
  for (int i = 0; i < 4; ++i) add(s, "TP" + std::to_string(i), 1, 0.8, anchor);
  for (int i = 0; i < 20; ++i) {
    const std::string id = "TN" + std::to_string(i);
    add(s, id, 0, 0.1, anchor);
    s.panel.records.push_back(make_record(id, anchor + 1, i % 2));
  }
  add(s, "FN0", 1, 0.2, anchor);
  // Distress outside the horizon does not count.
  s.panel.records.push_back(make_record("FP9", anchor + 5, 1));
  return s;
}

ForwardFpReport run(const Slice& s, int anchor, double threshold = 0.5) {
  return forward_fp_analysis(s.rows, s.labels, s.scores, s.panel, anchor, 4, threshold);
}

}  // namespace

TEST_CASE("forward analysis on a planted fixture") {
  const auto s = planted_fixture(2016);
  const auto r = run(s, 2016);
  CHECK(r.n_false_positive == 10);
  CHECK(r.n_true_positive == 4);
  CHECK(r.n_false_negative == 1);
  CHECK(r.n_true_negative == 20);
  CHECK(r.n_evaluated == 35);
  CHECK(r.n_fp_later_distressed == 3);
  CHECK(r.fraction_later_distressed == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_FALSE(r.degenerate);
  REQUIRE(r.false_positives.size() == 10);
  std::size_t with_year = 0;
  for (const auto& d : r.false_positives) {
    if (d.first_later_distress_year) {
      ++with_year;
      CHECK(*d.first_later_distress_year == 2018);
    }
    CHECK(d.later_years_observed == 4);
  }
  CHECK(with_year == 3);
  CHECK(r.n_fp_partially_observed == 0);

  std::ostringstream out;
  write_fp_csv(out, r);
  CHECK(out.str().rfind("municipality_id,score,first_later_distress_year,later_years_observed\n", 0) == 0);
}

TEST_CASE("forward analysis at the published proportions") {
  Slice s;
  for (int i = 0; i < 13; ++i) add(s, "P" + std::to_string(i), 1, 0.9, 2016);
  for (int i = 0; i < 117; ++i) {
    const std::string id = "F" + std::to_string(i);
    add(s, id, 0, 0.7, 2016);
    s.panel.records.push_back(make_record(id, 2017 + i % 4, i < 72));
  }
  for (int i = 0; i < 1449 - 130; ++i) add(s, "N" + std::to_string(i), 0, 0.2, 2016);
  const auto r = run(s, 2016);
  CHECK(r.n_evaluated == 1449);
  CHECK(r.n_fp_later_distressed == 72);
  CHECK(r.fraction_later_distressed == doctest::Approx(0.615).epsilon(1e-3 / 0.615));
  CHECK(r.n_fp_partially_observed == 117);
}

TEST_CASE("forward analysis with no false positives is flagged") {
  const auto s = planted_fixture(2016);
  const auto r = run(s, 2016, 0.95);
  CHECK(r.n_false_positive == 0);
  CHECK(r.fraction_later_distressed == 0.0);
  CHECK(r.degenerate);
}

TEST_CASE("forward analysis ignores labels at or before the anchor") {
  Rng rng(32);
  const auto base = planted_fixture(2017);
  const auto expected = run(base, 2017).to_json().dump();
  for (int trial = 0; trial < 50; ++trial) {
    auto s = base;
    for (int i = 0; i < 10; ++i) {
      s.panel.records.push_back(make_record("FP" + std::to_string(i), 2016 - static_cast<int>(rng.below(3)),
                                            static_cast<int>(rng.below(2))));
    }
    for (auto& r : s.panel.records) {
      if (r.year == 2017) r.label = static_cast<int>(rng.below(2));
    }
    CHECK(run(s, 2017).to_json().dump() == expected);
  }
}

TEST_CASE("forward analysis conserves predicted positives") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Slice s;
    for (int i = 0; i < 40; ++i) {
      add(s, "M" + std::to_string(i), static_cast<int>(rng.below(2)), rng.uniform(), 2016);
      if (rng.uniform() < 0.5) s.panel.records.push_back(make_record("M" + std::to_string(i), 2018, static_cast<int>(rng.below(2))));
    }
    // Rows from other years are ignored.
    s.rows.push_back({"X", 2019});
    s.labels.push_back(0);
    s.scores.push_back(0.99);
    const double t = rng.uniform(0.2, 0.8);
    const auto r = run(s, 2016, t);
    const auto predicted = static_cast<std::size_t>(
        std::count_if(s.scores.begin(), s.scores.end() - 1, [&](double v) { return v >= t; }));
    CHECK(r.n_true_positive + r.n_false_positive == predicted);
    CHECK(r.n_evaluated == 40);
    CHECK(r.n_fp_later_distressed <= r.n_false_positive);
    CHECK(r.fraction_later_distressed >= 0.0);
    CHECK(r.fraction_later_distressed <= 1.0);
  }
}

TEST_CASE("forward analysis through a fitted pipeline") {
  Rng rng(34);
  Eigen::MatrixXd v(40, 2);
  std::vector<int> y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    y[static_cast<std::size_t>(i)] = i % 4 == 0;
    v(i, 0) = rng.normal() + 2.0 * y[static_cast<std::size_t>(i)];
    v(i, 1) = rng.normal();
  }
  const auto m = numeric_matrix(v, y);
  const auto pipeline = fit_pipeline(m, LogisticParams{}, 1);
  Panel panel;
  for (const auto& k : m.row_keys) panel.records.push_back(make_record(k.municipality_id, k.year));
  const auto r = forward_fp_analysis(pipeline, m, panel, 2016, 4, 0.5);
  CHECK(r.n_evaluated == 40);
  CHECK_THROWS_AS(forward_fp_analysis(pipeline, m, panel, 2019, 4, 0.5), InvalidInput);
}

TEST_CASE("coefficient report") {
  LogisticModel m;
  m.columns = {"rigid_expenditure", "geo_area=south", "off_balance_sheet_debts", "geo_area=islands", "delta_rigid_expenditure"};
  m.coefficients.resize(5);
  m.coefficients << -0.4, 0.3, 1.7, 0.3, -2.0;
  m.intercept = -3.0;
  const auto r = coefficient_report(TrainedModel{m});
  REQUIRE(r.entries.size() == 5);
  CHECK(r.entries[0].name == "off_balance_sheet_debts");
  CHECK(r.entries[1].name == "geo_area=south");
  CHECK(r.entries[2].name == "geo_area=islands");
  CHECK(r.entries[2].parent == "geo_area");
  CHECK(r.entries[2].level == "islands");
  CHECK(r.entries[4].value == -2.0);
  CHECK(r.entries[0].parent == "off_balance_sheet_debts");
  CHECK(r.entries[0].level.empty());
  CHECK(r.intercept == -3.0);
  const auto groups = r.groups();
  CHECK(groups[1].first == "geo_area");
  CHECK(groups[1].second == std::vector<std::size_t>{1, 2});

  std::ostringstream out;
  write_coefficient_csv(out, r);
  CHECK(out.str().rfind("name,parent,level,value\n", 0) == 0);

  LogisticModel zero = m;
  zero.coefficients.setZero();
  const auto z = coefficient_report(TrainedModel{zero});
  for (std::size_t i = 0; i < 5; ++i) CHECK(z.entries[i].name == m.columns[i]);

  CHECK_THROWS_AS(coefficient_report(TrainedModel{ForestModel{}}), UnsupportedModel);
}

TEST_CASE("coefficient report is a sorted permutation of the coefficients") {
  Rng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    LogisticModel m;
    const auto d = 1 + rng.below(30);
    m.coefficients.resize(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      m.columns.push_back("c" + std::to_string(j));
      m.coefficients(static_cast<Eigen::Index>(j)) = static_cast<double>(rng.below(7)) - 3.0;
    }
    const auto r = coefficient_report(TrainedModel{m});
    REQUIRE(r.entries.size() == d);
    std::vector<double> a(m.coefficients.data(), m.coefficients.data() + d), b;
    for (const auto& e : r.entries) {
      b.push_back(e.value);
      const auto j = static_cast<Eigen::Index>(std::stoul(e.name.substr(1)));
      CHECK(m.coefficients(j) == e.value);
    }
    CHECK(std::is_sorted(b.begin(), b.end(), std::greater<>()));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}
