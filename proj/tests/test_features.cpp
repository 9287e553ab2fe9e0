#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "distress/error.hpp"
#include "distress/features.hpp"
#include "helpers.hpp"

using namespace distress;
using distress::testing::make_record;
using distress::testing::numeric_matrix;

namespace {

Panel two_year_panel() {
  Panel p;
  auto a16 = make_record("A", 2016), a17 = make_record("A", 2017), b17 = make_record("B", 2017, 1);
  a16.indicators[Indicator::ExpenseManagementSpeed] = 10;
  a17.indicators[Indicator::ExpenseManagementSpeed] = 12;
  b17.indicators.geo_area = GeoArea::South;
  b17.indicators.bankruptcy_risk = BankruptcyRisk(5);
  p.records = {a16, a17, b17};
  return p;
}

double column_mean(const Eigen::MatrixXd& m, Eigen::Index j) { return m.col(j).mean(); }

double column_std(const Eigen::MatrixXd& m, Eigen::Index j) {
  const double mu = m.col(j).mean();
  return std::sqrt((m.col(j).array() - mu).square().mean());
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal() * static_cast<double>(j + 1) + 0.3 * static_cast<double>(j);
  }
  return m;
}

}  // namespace

TEST_CASE("lagged deltas") {
  const Panel p = two_year_panel();
  const std::vector<std::string> names = {"expense_management_speed"};
  const auto d = lagged_deltas(p, names);
  REQUIRE(d.column_names == std::vector<std::string>{"delta_expense_management_speed"});
  CHECK(d.values(0, 0) == 0.0);
  CHECK(d.values(1, 0) == 2.0);
  CHECK(d.values(2, 0) == 0.0);
  CHECK(d.imputed == 2);

  const auto all = lagged_deltas(p, default_lag_features());
  CHECK(all.values.cols() == 6);
  CHECK(all.values.rows() == 3);

  const std::vector<std::string> bad = {"incidence_of_investment"};
  CHECK_THROWS_AS(lagged_deltas(p, bad), InvalidInput);
  const std::vector<std::string> unknown = {"liquidity"};
  CHECK_THROWS_AS(lagged_deltas(p, unknown), InvalidInput);
}

TEST_CASE("lagged deltas telescope over consecutive years") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Panel p;
    const int first = 2016, last = 2016 + 1 + static_cast<int>(rng.below(4));
    for (int y = last; y >= first; --y) {  // out of order on purpose
      auto r = make_record("T", y);
      for (auto& v : r.indicators.values) v = rng.uniform(0.0, 100.0);
      p.records.push_back(r);
    }
    const auto d = lagged_deltas(p, default_lag_features());
    for (std::size_t c = 0; c < kLaggedIndicators.size(); ++c) {
      const auto ind = kLaggedIndicators[c];
      double sum = 0.0;
      for (Eigen::Index i = 0; i < d.values.rows(); ++i) sum += d.values(i, static_cast<Eigen::Index>(c));
      const double expected = p.records.front().indicators[ind] - p.records.back().indicators[ind];
      CHECK(sum == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("one-hot encoding over the full vocabulary") {
  const Panel p = two_year_panel();
  const Eigen::MatrixXd oh = one_hot(p.records);
  const auto& names = one_hot_columns();
  REQUIRE(names.size() == 22);
  REQUIRE(oh.cols() == 22);
  auto col = [&](const std::string& n) {
    return static_cast<Eigen::Index>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  CHECK(oh(2, col("geo_area=south")) == 1.0);
  CHECK(oh(2, col("geo_area=north-west")) == 0.0);
  CHECK(oh(2, col("bankruptcy_risk=5")) == 1.0);
  for (Eigen::Index i = 0; i < oh.rows(); ++i) {
    CHECK(oh.row(i).segment(0, 12).sum() == 1.0);
    CHECK(oh.row(i).segment(12, 5).sum() == 1.0);
    CHECK(oh.row(i).segment(17, 5).sum() == 1.0);
  }
}

TEST_CASE("feature matrix layout") {
  const FeatureMatrix m = build_feature_matrix(two_year_panel());
  CHECK(m.cols() == 8 + 1 + 6 + 22);
  CHECK(m.rows() == 3);
  CHECK(m.labels == std::vector<int>{0, 0, 1});
  CHECK(m.column_kinds[m.column_index("off_balance_sheet_debts")] == ColumnKind::Binary);
  CHECK(m.column_kinds[m.column_index("delta_rigid_expenditure")] == ColumnKind::Numeric);
  CHECK(m.column_kinds[m.column_index("geo_area=islands")] == ColumnKind::OneHot);
  CHECK_THROWS_AS(m.column_index("nope"), InvalidInput);
  m.check_invariants();

  FeatureMatrix broken = m;
  broken.values(0, 0) = NAN;
  CHECK_THROWS_AS(broken.check_invariants(), InvalidInput);
}

TEST_CASE("standardizer") {
  Eigen::MatrixXd v(2, 1);
  v << 1, 3;
  const auto m = numeric_matrix(v, {0, 1});
  const Standardizer s = fit_standardizer(m);
  CHECK(s.means()[0] == 2.0);
  CHECK(s.stds()[0] == 1.0);
  const auto z = apply_standardizer(s, m);
  CHECK(z.values(0, 0) == -1.0);

  Eigen::MatrixXd c(3, 1);
  c << 5, 5, 5;
  const auto cm = numeric_matrix(c, {0, 1, 0});
  const Standardizer cs = fit_standardizer(cm);
  CHECK(cs.zero_variance()[0]);
  CHECK(apply_standardizer(cs, cm).values(1, 0) == 5.0);

  FeatureMatrix empty = numeric_matrix(Eigen::MatrixXd(0, 1), {});
  CHECK_THROWS_AS(fit_standardizer(empty), EmptyDataset);

  auto renamed = m;
  renamed.column_names[0] = "other";
  CHECK_THROWS_AS(apply_standardizer(s, renamed), InvalidInput);
}

TEST_CASE("standardizing the fit data gives zero mean and unit spread") {
  Rng rng(2);
  const auto m = numeric_matrix(random_matrix(rng, 200, 4), std::vector<int>(200, 0));
  const auto z = apply_standardizer(fit_standardizer(m), m);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(std::abs(column_mean(z.values, j)) < 1e-12);
    CHECK(std::abs(column_std(z.values, j) - 1.0) < 1e-12);
  }
}

TEST_CASE("standardizer leaves categorical columns alone and never refits") {
  Rng rng(4);
  Panel p;
  for (int i = 0; i < 40; ++i) {
    auto r = make_record("M" + std::to_string(i), 2016, i % 5 == 0);
    for (auto& v : r.indicators.values) v = rng.uniform(0.0, 100.0);
    r.indicators.geo_area = kGeoAreas[rng.below(5)];
    p.records.push_back(r);
  }
  const FeatureMatrix m = build_feature_matrix(p);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < m.rows(); ++i) (i < 30 ? train_rows : test_rows).push_back(i);
  const auto train = m.subset(train_rows), test = m.subset(test_rows);
  const Standardizer s = fit_standardizer(train);
  const Standardizer before = s;
  const auto zt = apply_standardizer(s, test);
  CHECK(s == before);
  CHECK(std::abs(column_mean(zt.values, 0)) > 1e-6);
  for (const auto& name : m.columns_of_kind(ColumnKind::OneHot)) {
    const auto j = static_cast<Eigen::Index>(m.column_index(name));
    CHECK(zt.values.col(j) == test.values.col(j));
  }
  const auto j = static_cast<Eigen::Index>(m.column_index("off_balance_sheet_debts"));
  CHECK(zt.values.col(j) == test.values.col(j));

  const auto round = Standardizer::from_json(s.to_json());
  CHECK(round == s);
}

TEST_CASE("pca on rank-one data") {
  Eigen::MatrixXd v(50, 2);
  for (int i = 0; i < 50; ++i) {
    v(i, 0) = i;
    v(i, 1) = 2.0 * i - 3.0;
  }
  const auto p = fit_pca(numeric_matrix(v, std::vector<int>(50, 0)), 2);
  CHECK(std::abs(p.explained_ratio(0) - 1.0) < 1e-9);
  CHECK(std::abs(p.explained_ratio(1)) < 1e-9);
  CHECK_THROWS_AS(fit_pca(numeric_matrix(v, std::vector<int>(50, 0)), 3), InvalidInput);
}

TEST_CASE("pca on isotropic data splits variance evenly") {
  Rng rng(31);
  Eigen::MatrixXd v(100000, 2);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    v(i, 0) = rng.normal();
    v(i, 1) = rng.normal();
  }
  const auto p = fit_pca(numeric_matrix(v, std::vector<int>(100000, 0)), 2);
  CHECK(p.explained_ratio(0) == doctest::Approx(0.5).epsilon(0.02 / 0.5));
  CHECK(p.explained_ratio(1) == doctest::Approx(0.5).epsilon(0.02 / 0.5));
}

TEST_CASE("pca identities on random data") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 30 + static_cast<Eigen::Index>(rng.below(50));
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(6));
    const auto m = numeric_matrix(random_matrix(rng, n, d), std::vector<int>(static_cast<std::size_t>(n), 0));
    const auto p = fit_pca(m, static_cast<std::size_t>(d));

    CHECK(std::abs(p.explained_ratio.sum() - 1.0) < 1e-9);
    const Eigen::MatrixXd gram = p.components.transpose() * p.components;
    CHECK((gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index c = 1; c < d; ++c) CHECK(p.explained_ratio(c) <= p.explained_ratio(c - 1) + 1e-15);

    // Oracle: eigenvalues of the sample covariance from a generic solver.
    const Eigen::MatrixXd centered = m.values.rowwise() - m.values.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::MatrixXd scores = project(p, m);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double expected = es.eigenvalues()(d - 1 - c);
      CHECK(std::abs(p.eigenvalues(c) - expected) < 1e-9 * std::max(1.0, expected));
      const double var = (scores.col(c).array() - scores.col(c).mean()).square().sum() / static_cast<double>(n - 1);
      CHECK(std::abs(var - p.eigenvalues(c)) < 1e-9 * std::max(1.0, expected));
      Eigen::Index arg = 0;
      p.components.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(p.components(arg, c) > 0.0);
    }
    CHECK((reconstruct(p, scores) - m.values).cwiseAbs().maxCoeff() < 1e-9);

    // A row equal to the mean projects to the origin.
    auto mean_row = m.subset(std::vector<std::size_t>{0});
    mean_row.values.row(0) = p.mean.transpose();
    CHECK(project(p, mean_row).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("feature csv round-trip") {
  const FeatureMatrix m = build_feature_matrix(two_year_panel());
  std::ostringstream out;
  write_feature_csv(out, m);
  std::istringstream in(out.str());
  const FeatureMatrix back = read_feature_csv(in);
  CHECK(back.column_names == m.column_names);
  CHECK(back.column_kinds == m.column_kinds);
  CHECK(back.row_keys == m.row_keys);
  CHECK(back.labels == m.labels);
  CHECK(back.values == m.values);
}

TEST_CASE("pca score export header") {
  Rng rng(1);
  const auto m = numeric_matrix(random_matrix(rng, 5, 3), {0, 1, 0, 0, 1});
  const auto p = fit_pca(m, 2);
  std::ostringstream out;
  write_pca_scores_csv(out, m, project(p, m));
  CHECK(out.str().rfind("municipality_id,year,pc1,pc2,label\n", 0) == 0);
}
