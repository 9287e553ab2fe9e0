#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "distress/error.hpp"
#include "distress/eval.hpp"
#include "helpers.hpp"

using namespace distress;
using distress::testing::numeric_matrix;
using distress::testing::random_labels;

namespace {

std::span<const double> as_span(const std::vector<double>& v) { return {v.data(), v.size()}; }

std::vector<int> labels_with(std::size_t pos, std::size_t neg) {
  std::vector<int> y(pos, 1);
  y.resize(pos + neg, 0);
  return y;
}

// Tie-aware pair count: concordant pairs plus half the ties.
double pair_count_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// Average precision by enumerating every distinct cut from the top.
double enumerated_ap(const std::vector<int>& y, const std::vector<double>& s) {
  std::set<double, std::greater<>> cuts(s.begin(), s.end());
  double n_pos = 0.0;
  for (const int v : y) n_pos += v;
  double ap = 0.0, prev_recall = 0.0;
  for (const double t : cuts) {
    double tp = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (s[i] >= t) {
        pp += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / pp);
    prev_recall = recall;
  }
  return ap;
}

struct Instance {
  std::vector<int> y;
  std::vector<double> s;
};

Instance random_instance(Rng& rng, std::size_t n) {
  Instance in;
  in.y = random_labels(rng, n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    in.s.push_back(static_cast<double>(rng.below(12)) / 11.0 + 0.1 * in.y[i]);
  }
  return in;
}

// ROC grid value: top of a vertical run at g, else linear between neighbours.
double roc_at(const Curve& c, double g) {
  double best = -1.0;
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (c.x[i] == g) best = std::max(best, c.y[i]);
  }
  if (best >= 0.0) return best;
  for (std::size_t i = 1; i < c.x.size(); ++i) {
    if (c.x[i - 1] < g && c.x[i] > g) {
      return c.y[i - 1] + (c.y[i] - c.y[i - 1]) * (g - c.x[i - 1]) / (c.x[i] - c.x[i - 1]);
    }
  }
  return NAN;
}

double pr_at(const Curve& c, double g) {
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (c.x[i] >= g) return c.y[i];
  }
  return NAN;
}

FeatureMatrix generic_problem(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd v(n, d);
  auto y = random_labels(rng, static_cast<std::size_t>(n), 15);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) v(i, j) = rng.normal() + (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
  }
  return numeric_matrix(v, y);
}

}  // namespace

TEST_CASE("stratified split") {
  const auto y = labels_with(10, 90);
  const auto split = stratified_split(y, 0.8, 4);
  std::size_t pos = 0;
  for (const auto i : split.train) pos += static_cast<std::size_t>(y[i]);
  CHECK(pos == 8);
  CHECK(split.train.size() - pos == 72);
  CHECK(split.test.size() == 20);
  CHECK(stratified_split(y, 0.8, 4).train == split.train);
  CHECK(stratified_split(y, 0.8, 5).train != split.train);
  CHECK_THROWS_AS(stratified_split(labels_with(1, 20), 0.8, 0), InvalidInput);
  CHECK_THROWS_AS(stratified_split(y, 1.0, 0), InvalidInput);
}

TEST_CASE("stratified split partitions with rounded per-class counts") {
  Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const auto y = random_labels(rng, 4 + rng.below(400), 2);
    const double f = rng.uniform(0.05, 0.95);
    const auto split = stratified_split(y, f, trial);
    std::vector<int> seen(y.size(), 0);
    for (const auto i : split.train) ++seen[i];
    for (const auto i : split.test) ++seen[i];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(std::is_sorted(split.train.begin(), split.train.end()));
    for (const int cls : {0, 1}) {
      const auto n_c = static_cast<std::size_t>(std::count(y.begin(), y.end(), cls));
      const auto in_train = static_cast<std::size_t>(
          std::count_if(split.train.begin(), split.train.end(), [&](std::size_t i) { return y[i] == cls; }));
      const auto expected = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::floor(static_cast<double>(n_c) * f + 0.5)), 1, n_c - 1);
      CHECK(in_train == expected);
    }
  }
}

TEST_CASE("stratified kfold examples") {
  const auto a = stratified_kfold(labels_with(10, 990), 5, 1);
  for (const auto& fold : a) {
    CHECK(std::count_if(fold.begin(), fold.end(), [](std::size_t i) { return i < 10; }) == 2);
  }
  const auto b = stratified_kfold(labels_with(7, 50), 5, 1);
  std::vector<long> counts;
  for (const auto& fold : b) counts.push_back(std::count_if(fold.begin(), fold.end(), [](std::size_t i) { return i < 7; }));
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<long>{1, 1, 1, 2, 2});
  CHECK_THROWS_AS(stratified_kfold(labels_with(3, 50), 5, 1), InvalidInput);
  CHECK_THROWS_AS(stratified_kfold(labels_with(3, 50), 1, 1), InvalidInput);
}

TEST_CASE("stratified kfold partitions within one of the quota") {
  Rng rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 9);
    const auto y = random_labels(rng, 2 * k + rng.below(300), k);
    const auto folds = stratified_kfold(y, k, trial);
    REQUIRE(folds.size() == k);
    std::vector<int> seen(y.size(), 0);
    for (const auto& f : folds) {
      for (const auto i : f) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    for (const int cls : {0, 1}) {
      const double quota = static_cast<double>(std::count(y.begin(), y.end(), cls)) / static_cast<double>(k);
      for (const auto& f : folds) {
        const auto c = static_cast<double>(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == cls; }));
        CHECK(std::abs(c - quota) < 1.0);
      }
    }
  }
}

TEST_CASE("confusion matrix at the published counts") {
  std::vector<int> truth, pred;
  auto add = [&](int t, int p, int n) {
    for (int i = 0; i < n; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(1, 1, 67);
  add(0, 1, 420);
  add(0, 0, 7215);
  const auto cm = confusion(truth, pred);
  CHECK(cm == ConfusionMatrix{67, 0, 420, 7215});
  CHECK(cm.total() == truth.size());
  const auto m = metrics(cm);
  CHECK(m.positive.precision == doctest::Approx(0.1376).epsilon(1e-4 / 0.1376));
  CHECK(m.positive.recall == 1.0);
  CHECK(m.positive.f1 == doctest::Approx(0.2419).epsilon(1e-4 / 0.2419));
  CHECK(std::abs(m.positive.precision - 67.0 / 487.0) < 1e-12);

  CHECK(confusion(truth, truth).fp == 0);
  CHECK(confusion(truth, std::vector<int>(truth.size(), 1)).tn == 0);
  CHECK_THROWS_AS(confusion(truth, std::vector<int>(3, 1)), InvalidInput);
}

TEST_CASE("metrics agree with direct formulas") {
  Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    const auto m = metrics(cm);
    auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
    const double p = ratio(cm.tp, cm.tp + cm.fp), r = ratio(cm.tp, cm.tp + cm.fn);
    const double f = ratio(2 * p * r, p + r);
    const double np = ratio(cm.tn, cm.tn + cm.fn), nr = ratio(cm.tn, cm.tn + cm.fp);
    const double nf = ratio(2 * np * nr, np + nr);
    CHECK(std::abs(m.positive.precision - p) < 1e-12);
    CHECK(std::abs(m.positive.recall - r) < 1e-12);
    CHECK(std::abs(m.positive.f1 - f) < 1e-12);
    CHECK(std::abs(m.negative.f1 - nf) < 1e-12);
    CHECK(std::abs(m.macro_f1 - 0.5 * (f + nf)) < 1e-12);
    CHECK(std::abs(m.accuracy - ratio(cm.tp + cm.tn, cm.total())) < 1e-12);
    CHECK(std::abs(metrics(cm.swapped()).macro_f1 - m.macro_f1) < 1e-12);
  }
}

TEST_CASE("metric edge cases") {
  const auto m = metrics({0, 0, 0, 10});
  CHECK(m.positive.precision == 0.0);
  CHECK(m.positive.f1 == 0.0);
  CHECK(m.positive.degenerate);
  CHECK(m.degenerate);
  const auto eq = metrics({3, 1, 1, 5});
  CHECK(eq.positive.f1 == doctest::Approx(0.75));
}

TEST_CASE("flipping predictions swaps the confusion cells") {
  Rng rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const auto y = random_labels(rng, 50, 1);
    std::vector<int> p(50), flipped(50);
    for (std::size_t i = 0; i < 50; ++i) {
      p[i] = static_cast<int>(rng.below(2));
      flipped[i] = 1 - p[i];
    }
    const auto a = confusion(y, p), b = confusion(y, flipped);
    CHECK(a.tp == b.fn);
    CHECK(a.fn == b.tp);
    CHECK(a.tn == b.fp);
    CHECK(a.fp == b.tn);
  }
}

TEST_CASE("roc curve") {
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(roc_curve(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}).auc == 1.0);
  CHECK(roc_curve(y, std::vector<double>{0.3, 0.3, 0.3, 0.3}).auc == 0.5);
  const auto c = roc_curve(y, std::vector<double>{0.1, 0.4, 0.35, 0.8});
  CHECK(c.x.front() == 0.0);
  CHECK(c.y.front() == 0.0);
  CHECK(c.x.back() == 1.0);
  CHECK(c.y.back() == 1.0);
  CHECK(std::isinf(c.thresholds.front()));
  CHECK(c.auc == doctest::Approx(0.75));
  CHECK_THROWS_AS(roc_curve(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), InvalidInput);
  CHECK_THROWS_AS(roc_curve(y, std::vector<double>{0.1}), InvalidInput);
}

TEST_CASE("curve areas equal brute-force oracles") {
  Rng rng(26);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, 50);
    const auto roc = roc_curve(in.y, as_span(in.s));
    const auto pr = pr_curve(in.y, as_span(in.s));
    CHECK(std::abs(roc.auc - pair_count_auc(in.y, in.s)) < 1e-12);
    CHECK(std::abs(pr.auc - enumerated_ap(in.y, in.s)) < 1e-12);
    CHECK(std::is_sorted(roc.x.begin(), roc.x.end()));
    CHECK(std::is_sorted(pr.x.begin(), pr.x.end()));
    CHECK(roc.auc >= 0.0);
    CHECK(roc.auc <= 1.0);
  }
}

TEST_CASE("pr curve") {
  const std::vector<int> y = {0, 0, 1, 1};
  const auto perfect = pr_curve(y, std::vector<double>{0.1, 0.2, 0.8, 0.9});
  CHECK(perfect.auc == 1.0);
  CHECK(perfect.x.front() == 0.0);
  CHECK(perfect.y.front() == 1.0);
  CHECK(perfect.baseline == 0.5);

  const auto y2 = labels_with(416, 39520 - 416);
  std::vector<double> s(y2.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i % 97);
  CHECK(pr_curve(y2, as_span(s)).baseline == doctest::Approx(0.01053).epsilon(1e-5 / 0.01053));
}

TEST_CASE("averaging curves") {
  Rng rng(27);
  std::vector<Curve> rocs, prs;
  for (int i = 0; i < 4; ++i) {
    const auto in = random_instance(rng, 40);
    rocs.push_back(roc_curve(in.y, as_span(in.s)));
    prs.push_back(pr_curve(in.y, as_span(in.s)));
  }
  const auto mean_roc = average_curves(rocs), mean_pr = average_curves(prs);
  REQUIRE(mean_roc.grid.size() == kCurveGridPoints);
  REQUIRE(mean_pr.mean.size() == kCurveGridPoints);
  for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
    const double x = mean_roc.grid[g];
    CHECK(x == doctest::Approx(static_cast<double>(g) / 100.0).epsilon(1e-15));
    double sr = 0.0, sp = 0.0;
    for (int i = 0; i < 4; ++i) {
      sr += roc_at(rocs[static_cast<std::size_t>(i)], x);
      sp += pr_at(prs[static_cast<std::size_t>(i)], x);
    }
    CHECK(std::abs(mean_roc.mean[g] - sr / 4.0) < 1e-12);
    CHECK(std::abs(mean_pr.mean[g] - sp / 4.0) < 1e-12);
  }

  const std::vector<Curve> same(3, rocs[0]);
  const auto ident = average_curves(same);
  for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
    CHECK(ident.stddev[g] == 0.0);
    CHECK(std::abs(ident.mean[g] - roc_at(rocs[0], ident.grid[g])) < 1e-12);
  }

  Curve perfect{CurveKind::Roc, {0, 0, 1}, {0, 1, 1}, {INFINITY, 1, 0}, 1.0, 0.0};
  Curve random{CurveKind::Roc, {0, 1}, {0, 1}, {INFINITY, 0}, 0.5, 0.0};
  const std::vector<Curve> pair = {perfect, random};
  const auto avg = average_curves(pair);
  CHECK(avg.mean[50] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(avg.stddev[50] == doctest::Approx(0.25).epsilon(1e-12));

  const std::vector<Curve> mixed = {rocs[0], prs[0]};
  CHECK_THROWS_AS(average_curves(mixed), InvalidInput);
  CHECK_THROWS_AS(average_curves(std::span<const Curve>(rocs.data(), 1)), InvalidInput);

  std::ostringstream out;
  write_curve_csv(out, avg);
  CHECK(out.str().rfind("x,y,std\n", 0) == 0);
}

TEST_CASE("published grids expand to the expected candidate counts") {
  CHECK(expand_grid(paper_grid(Family::Logistic)).size() == 10);
  CHECK(expand_grid(paper_grid(Family::Svm)).size() == 20);
  CHECK(expand_grid(paper_grid(Family::Forest)).size() == 36);
  CHECK(expand_grid(paper_grid(Family::Gbt)).size() == 36);

  const auto logistic = expand_grid(paper_grid(Family::Logistic));
  CHECK(std::get<LogisticParams>(logistic[0]) == LogisticParams{Penalty::L1, 0.1});
  CHECK(std::get<LogisticParams>(logistic[1]) == LogisticParams{Penalty::L1, 0.5});
  CHECK(std::get<LogisticParams>(logistic[9]) == LogisticParams{Penalty::L2, 10.0});
}

TEST_CASE("grid files") {
  const auto grids = parse_grid_file(R"({"svm": {"kernel": ["linear", "rbf"], "C": [1, 5], "gamma": [0.1, 0.01]},
                                         "logistic": {"C": [1], "penalty": ["l2", "l1"]}})");
  REQUIRE(grids.size() == 2);
  CHECK(grids[0].family == Family::Svm);
  CHECK(expand_grid(grids[0]).size() == 2 + 4);
  const auto lg = expand_grid(grids[1]);
  CHECK(std::get<LogisticParams>(lg[0]).penalty == Penalty::L2);
  CHECK_THROWS_AS(parse_grid_file("{\"neural\": {}}"), InvalidInput);
  CHECK_THROWS_AS(parse_grid_file("not json"), InvalidInput);
  CHECK_THROWS_AS(parse_grid_file(R"({"logistic": {"C": []}})"), InvalidInput);
}

TEST_CASE("shipped grid file matches the built-in grids") {
  std::ifstream in(std::string(DISTRESS_SOURCE_DIR) + "/grids/published.json");
  REQUIRE(in);
  const std::string text{std::istreambuf_iterator<char>(in), {}};
  const auto grids = parse_grid_file(text);
  REQUIRE(grids.size() == 4);
  for (const auto& g : grids) {
    const auto a = expand_grid(g), b = expand_grid(paper_grid(g.family));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("cross validation refits the standardizer per fold") {
  Rng rng(28);
  const auto m = generic_problem(rng, 150, 3);
  const auto cv = cross_validate(m, LogisticParams{}, {5, 3, std::nullopt, 1});
  REQUIRE(cv.folds.size() == 5);
  std::set<double> means;
  std::size_t validated = 0;
  for (const auto& f : cv.folds) {
    means.insert(f.standardizer.means()[0]);
    validated += f.n_validation;
    CHECK(f.n_train + f.n_validation == m.rows());
    CHECK(f.cm.total() == f.n_validation);
  }
  CHECK(means.size() == 5);
  CHECK(validated == m.rows());
  CHECK(cv.roc.mean.size() == kCurveGridPoints);
}

TEST_CASE("grid search picks the first of the best candidates") {
  Rng rng(29);
  const auto m = generic_problem(rng, 120, 2);
  const std::vector<ModelConfig> same(3, LogisticParams{Penalty::L2, 1.0});
  const auto tied = grid_search(m, same, {4, 1, std::nullopt, 1});
  CHECK(tied.best == 0);
  CHECK(tied.mean_macro_f1[0] == tied.mean_macro_f1[2]);

  const auto candidates = expand_grid(paper_grid(Family::Logistic));
  const auto r = grid_search(m, candidates, {3, 2, std::nullopt, 1});
  CHECK(r.folds == 3);
  CHECK(r.fold_macro_f1.size() == candidates.size());
  const double top = *std::max_element(r.mean_macro_f1.begin(), r.mean_macro_f1.end());
  CHECK(r.mean_macro_f1[r.best] == top);
  for (std::size_t c = 0; c < r.best; ++c) CHECK(r.mean_macro_f1[c] < top);

  const auto parallel = grid_search(m, candidates, {3, 2, std::nullopt, 4});
  CHECK(parallel.to_json().dump() == r.to_json().dump());
  CHECK_THROWS_AS(grid_search(m, {}, {3, 2, std::nullopt, 1}), InvalidInput);
}

TEST_CASE("final fit is deterministic and scores every test row") {
  Rng rng(30);
  const auto m = generic_problem(rng, 200, 3);
  const auto split = stratified_split(m.labels, 0.8, 1);
  const auto train = m.subset(split.train), test = m.subset(split.test);
  const auto a = final_fit_and_test(LogisticParams{}, train, test, std::nullopt, 5);
  const auto b = final_fit_and_test(LogisticParams{}, train, test, std::nullopt, 5);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.test_scores.size() == test.rows());
  CHECK(a.cm.total() == test.rows());
  CHECK(a.threshold == 0.5);
  CHECK(final_fit_and_test(SvmParams{}, train, test, std::nullopt, 5).threshold == 0.0);

  const auto restored = pipeline_from_json(pipeline_to_json(a.pipeline));
  const auto s1 = a.pipeline.scores(test), s2 = restored.scores(test);
  CHECK(s1 == s2);
}

TEST_CASE("stage seeds are distinct") {
  const auto s = stage_seeds(7);
  CHECK(s.split != s.folds);
  CHECK(s.folds != s.model);
  CHECK(stage_seeds(7).model == s.model);
}
