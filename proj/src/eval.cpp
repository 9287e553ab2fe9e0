#include "distress/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "distress/error.hpp"
#include "distress/io.hpp"
#include "distress/random.hpp"
#include "parallel.hpp"

namespace distress {

using nlohmann::json;

StageSeeds stage_seeds(std::uint64_t seed) noexcept {
  return {derive_seed(seed, 0), derive_seed(seed, 1), derive_seed(seed, 2)};
}

namespace {

std::array<std::vector<std::size_t>, 2> rows_by_class(std::span<const int> labels) {
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("labels must be 0 or 1");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return members;
}

}  // namespace

SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("train fraction must lie strictly between 0 and 1");
  }
  auto members = rows_by_class(labels);
  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& rows = members[c];
    if (rows.size() < 2) {
      throw InvalidInput("class " + std::to_string(c) + " has fewer than 2 rows; cannot split");
    }
    rng.shuffle(std::span<std::size_t>(rows));
    const auto n = rows.size();
    auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw InvalidInput("at least 2 folds are required");
  auto members = rows_by_class(labels);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& rows = members[c];
    if (rows.size() < k) {
      throw InvalidInput("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                         " rows, fewer than the " + std::to_string(k) + " folds");
    }
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t j = 0; j < rows.size(); ++j) folds[(offset + j) % k].push_back(rows[j]);
    offset = (offset + rows.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw InvalidInput("label vectors differ in length (" + std::to_string(y_true.size()) + " vs " +
                       std::to_string(y_pred.size()) + ")");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool truth = y_true[i] == 1;
    const bool pred = y_pred[i] == 1;
    if (truth && pred) ++cm.tp;
    else if (truth) ++cm.fn;
    else if (pred) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  m.precision = ratio(cm.tp, cm.tp + cm.fp, m.degenerate);
  m.recall = ratio(cm.tp, cm.tp + cm.fn, m.degenerate);
  const double sum = m.precision + m.recall;
  if (sum > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / sum;
  } else {
    m.f1 = 0.0;
    if (cm.tp + cm.fp + cm.fn == 0) m.degenerate = true;
  }
  return m;
}

}  // namespace

ClassificationMetrics metrics(const ConfusionMatrix& cm) {
  ClassificationMetrics m;
  m.positive = class_metrics(cm);
  m.negative = class_metrics(cm.swapped());
  m.macro_f1 = 0.5 * (m.positive.f1 + m.negative.f1);
  bool empty = false;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), empty);
  m.degenerate = m.positive.degenerate || m.negative.degenerate || empty;
  return m;
}

std::string_view to_string(CurveKind kind) noexcept { return kind == CurveKind::Roc ? "roc" : "pr"; }

namespace {

/// Cumulative (tp, fp, threshold) after each group of tied scores, in
/// descending score order.
struct Sweep {
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
  std::vector<double> thresholds;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

Sweep sweep(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw InvalidInput("labels and scores differ in length");
  Sweep s;
  for (const int y : y_true) {
    if (y == 1) ++s.positives;
    else if (y == 0) ++s.negatives;
    else throw InvalidInput("labels must be 0 or 1");
  }
  if (s.positives == 0 || s.negatives == 0) {
    throw InvalidInput("curves need both classes present");
  }
  for (const double v : scores) {
    if (std::isnan(v)) throw InvalidInput("scores contain NaN");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (y_true[i] == 1) ++tp;
    else ++fp;
    if (k + 1 == order.size() || scores[order[k + 1]] != scores[i]) {
      s.tp.push_back(tp);
      s.fp.push_back(fp);
      s.thresholds.push_back(scores[i]);
    }
  }
  return s;
}

}  // namespace

Curve roc_curve(std::span<const int> y_true, std::span<const double> scores) {
  const Sweep s = sweep(y_true, scores);
  Curve c;
  c.kind = CurveKind::Roc;
  c.x.push_back(0.0);
  c.y.push_back(0.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  const auto P = static_cast<double>(s.positives);
  const auto N = static_cast<double>(s.negatives);
  // Twice the area in units of one positive-negative pair; every term is an
  // exact integer, so the result matches pair counting exactly.
  double doubled = 0.0;
  std::size_t tp_prev = 0, fp_prev = 0;
  for (std::size_t k = 0; k < s.tp.size(); ++k) {
    doubled += static_cast<double>(s.fp[k] - fp_prev) * static_cast<double>(s.tp[k] + tp_prev);
    tp_prev = s.tp[k];
    fp_prev = s.fp[k];
    c.x.push_back(static_cast<double>(s.fp[k]) / N);
    c.y.push_back(static_cast<double>(s.tp[k]) / P);
    c.thresholds.push_back(s.thresholds[k]);
  }
  c.auc = doubled / (2.0 * P * N);
  c.baseline = P / (P + N);
  return c;
}

Curve pr_curve(std::span<const int> y_true, std::span<const double> scores) {
  const Sweep s = sweep(y_true, scores);
  Curve c;
  c.kind = CurveKind::Pr;
  c.x.push_back(0.0);
  c.y.push_back(1.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  const auto P = static_cast<double>(s.positives);
  double ap = 0.0;
  std::size_t tp_prev = 0;
  for (std::size_t k = 0; k < s.tp.size(); ++k) {
    const double precision =
        static_cast<double>(s.tp[k]) / static_cast<double>(s.tp[k] + s.fp[k]);
    ap += static_cast<double>(s.tp[k] - tp_prev) / P * precision;
    tp_prev = s.tp[k];
    c.x.push_back(static_cast<double>(s.tp[k]) / P);
    c.y.push_back(precision);
    c.thresholds.push_back(s.thresholds[k]);
  }
  c.auc = ap;
  c.baseline = P / static_cast<double>(s.positives + s.negatives);
  return c;
}

namespace {

double roc_at(const Curve& c, double x) {
  std::size_t k = 0;
  while (k + 1 < c.x.size() && c.x[k + 1] <= x) ++k;
  if (k + 1 == c.x.size()) return c.y[k];
  const double span = c.x[k + 1] - c.x[k];
  return c.y[k] + (c.y[k + 1] - c.y[k]) * (x - c.x[k]) / span;
}

double pr_at(const Curve& c, double r) {
  for (std::size_t k = 0; k < c.x.size(); ++k) {
    if (c.x[k] >= r) return c.y[k];
  }
  return c.y.back();
}

}  // namespace

AveragedCurve average_curves(std::span<const Curve> curves) {
  if (curves.size() < 2) throw InvalidInput("averaging needs at least 2 curves");
  const CurveKind kind = curves.front().kind;
  for (const auto& c : curves) {
    if (c.kind != kind) throw InvalidInput("cannot average ROC and PR curves together");
    if (c.x.empty() || c.x.size() != c.y.size()) throw InvalidInput("malformed curve");
  }
  AveragedCurve out;
  out.kind = kind;
  const auto m = static_cast<double>(curves.size());
  for (std::size_t g = 0; g < kCurveGridPoints; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(kCurveGridPoints - 1);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> values;
    values.reserve(curves.size());
    for (const auto& c : curves) values.push_back(kind == CurveKind::Roc ? roc_at(c, x) : pr_at(c, x));
    for (const double v : values) sum += v;
    const double mean = sum / m;
    for (const double v : values) sum_sq += (v - mean) * (v - mean);
    out.grid.push_back(x);
    out.mean.push_back(mean);
    out.stddev.push_back(std::sqrt(sum_sq / m));
  }
  return out;
}

void write_curve_csv(std::ostream& out, const Curve& curve) {
  out << "x,y,std\n";
  for (std::size_t k = 0; k < curve.x.size(); ++k) {
    out << io::format_double(curve.x[k]) << ',' << io::format_double(curve.y[k]) << ",0\n";
  }
}

void write_curve_csv(std::ostream& out, const AveragedCurve& curve) {
  out << "x,y,std\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    out << io::format_double(curve.grid[k]) << ',' << io::format_double(curve.mean[k]) << ','
        << io::format_double(curve.stddev[k]) << '\n';
  }
}

json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}};
}

namespace {

json class_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"degenerate", m.degenerate}};
}

}  // namespace

json to_json(const ClassificationMetrics& m) {
  return {{"positive", class_json(m.positive)},
          {"negative", class_json(m.negative)},
          {"macro_f1", m.macro_f1},
          {"accuracy", m.accuracy},
          {"degenerate", m.degenerate}};
}

json to_json(const Curve& c) {
  json j = {{"kind", to_string(c.kind)}, {"x", c.x}, {"y", c.y}, {"auc", c.auc}};
  if (c.kind == CurveKind::Pr) j["baseline"] = c.baseline;
  return j;
}

json to_json(const AveragedCurve& c) {
  return {{"kind", to_string(c.kind)}, {"grid", c.grid}, {"mean", c.mean}, {"std", c.stddev}};
}

namespace {

const std::vector<std::string>& axis_names(Family family) {
  static const std::vector<std::string> logistic = {"penalty", "C"};
  static const std::vector<std::string> svm = {"kernel", "C", "gamma"};
  static const std::vector<std::string> forest = {"n_trees", "max_depth", "min_samples_split"};
  static const std::vector<std::string> gbt = {"n_estimators", "max_depth", "learning_rate"};
  switch (family) {
    case Family::Logistic: return logistic;
    case Family::Svm: return svm;
    case Family::Forest: return forest;
    case Family::Gbt: return gbt;
  }
  return logistic;
}

ModelConfig normalized(ModelConfig config) {
  if (auto* svm = std::get_if<SvmParams>(&config); svm && svm->kernel == Kernel::Linear) {
    svm->gamma = SvmParams{}.gamma;
  }
  return config;
}

}  // namespace

std::vector<ModelConfig> expand_grid(const GridSpec& grid) {
  const auto& known = axis_names(grid.family);
  for (const auto& [name, values] : grid.axes) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw InvalidInput("unknown " + std::string(to_string(grid.family)) + " hyperparameter '" +
                         name + "'");
    }
    if (values.empty()) throw InvalidInput("hyperparameter '" + name + "' has no values");
  }
  std::vector<ModelConfig> out;
  std::vector<std::size_t> pos(grid.axes.size(), 0);
  while (true) {
    json candidate = json::object();
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      candidate[grid.axes[a].first] = grid.axes[a].second[pos[a]];
    }
    const ModelConfig config = normalized(config_from_json(grid.family, candidate));
    if (std::find(out.begin(), out.end(), config) == out.end()) out.push_back(config);
    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < grid.axes[a].second.size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
    if (grid.axes.empty()) return out;
  }
}

GridSpec paper_grid(Family family) {
  GridSpec g;
  g.family = family;
  switch (family) {
    case Family::Logistic:
      g.axes = {{"penalty", {"l1", "l2"}}, {"C", {0.1, 0.5, 1.0, 5.0, 10.0}}};
      break;
    case Family::Svm:
      g.axes = {{"kernel", {"linear", "rbf"}},
                {"C", {0.1, 0.5, 1.0, 5.0, 10.0}},
                {"gamma", {0.001, 0.01, 0.1}}};
      break;
    case Family::Forest:
      g.axes = {{"n_trees", {100, 200, 300, 400}},
                {"max_depth", {3, 5, 7}},
                {"min_samples_split", {2, 5, 10}}};
      break;
    case Family::Gbt:
      g.axes = {{"max_depth", {3, 5, 7}},
                {"learning_rate", {0.1, 0.01, 0.001}},
                {"n_estimators", {100, 200, 300, 400}}};
      break;
  }
  return g;
}

std::vector<GridSpec> parse_grid_file(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(std::string("grid file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("grid file must be an object keyed by model family");
  std::vector<GridSpec> out;
  for (const auto& [family, axes] : doc.items()) {
    GridSpec g;
    g.family = parse_family(family);
    if (!axes.is_object()) throw ParseError("grid for '" + family + "' must be an object");
    for (const auto& [name, values] : axes.items()) {
      if (!values.is_array() || values.empty()) {
        throw ParseError("grid values for '" + name + "' must be a nonempty list");
      }
      std::vector<json> list;
      for (const auto& v : values) list.push_back(json::parse(v.dump()));
      g.axes.emplace_back(name, std::move(list));
    }
    out.push_back(std::move(g));
  }
  return out;
}

Eigen::VectorXd FittedPipeline::scores(const FeatureMatrix& raw) const {
  return predict_scores(model, apply_standardizer(standardizer, raw));
}

FittedPipeline fit_pipeline(const FeatureMatrix& train, const ModelConfig& config, std::uint64_t seed,
                            std::vector<std::string> lag_features) {
  FittedPipeline p;
  p.standardizer = fit_standardizer(train);
  p.weights = class_weights(train.labels);
  p.model = train_model(apply_standardizer(p.standardizer, train), p.weights, config, seed);
  p.lag_features = std::move(lag_features);
  return p;
}

json pipeline_to_json(const FittedPipeline& p) {
  return {{"format_version", kModelFormatVersion},
          {"standardizer", p.standardizer.to_json()},
          {"class_weights", {{"negative", p.weights.negative}, {"positive", p.weights.positive}}},
          {"lag_features", p.lag_features},
          {"model", model_to_json(p.model)}};
}

FittedPipeline pipeline_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw ParseError("unsupported pipeline format version");
    }
    FittedPipeline p;
    p.standardizer = Standardizer::from_json(j.at("standardizer"));
    p.weights = {j.at("class_weights").at("negative").get<double>(),
                 j.at("class_weights").at("positive").get<double>()};
    p.lag_features = j.at("lag_features").get<std::vector<std::string>>();
    p.model = model_from_json(j.at("model"));
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed pipeline file: ") + e.what());
  }
}

namespace {

/// Training and validation matrices of one fold, standardized on the
/// training part only.
struct PreparedFold {
  FeatureMatrix train;
  FeatureMatrix validation;
  Standardizer standardizer;
  ClassWeights weights;
};

std::vector<PreparedFold> prepare_folds(const FeatureMatrix& data, const EvalOptions& options) {
  const auto folds = stratified_kfold(data.labels, options.folds, stage_seeds(options.seed).folds);
  std::vector<PreparedFold> out(folds.size());
  detail::run_tasks(folds.size(), options.jobs, [&](std::size_t f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    const FeatureMatrix raw_train = data.subset(train_rows);
    auto& p = out[f];
    p.standardizer = fit_standardizer(raw_train);
    p.weights = class_weights(raw_train.labels);
    p.train = apply_standardizer(p.standardizer, raw_train);
    p.validation = apply_standardizer(p.standardizer, data.subset(folds[f]));
  });
  return out;
}

std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold) {
  return derive_seed(stage_seeds(seed).model, fold + 1);
}

}  // namespace

CrossValidationResult cross_validate(const FeatureMatrix& train, const ModelConfig& config,
                                     const EvalOptions& options) {
  const auto prepared = prepare_folds(train, options);
  const double threshold = options.threshold.value_or(default_threshold(family_of(config)));
  CrossValidationResult result;
  result.config = config;
  result.folds.resize(prepared.size());
  detail::run_tasks(prepared.size(), options.jobs, [&](std::size_t f) {
    const auto& p = prepared[f];
    const auto model = train_model(p.train, p.weights, config, fold_model_seed(options.seed, f));
    const Eigen::VectorXd scores = predict_scores(model, p.validation);
    const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
    auto& r = result.folds[f];
    r.fold = f;
    r.n_train = p.train.rows();
    r.n_validation = p.validation.rows();
    r.cm = confusion(p.validation.labels, predict_labels(s, threshold));
    r.metrics = metrics(r.cm);
    r.roc = roc_curve(p.validation.labels, s);
    r.pr = pr_curve(p.validation.labels, s);
    r.standardizer = p.standardizer;
  });
  std::vector<Curve> rocs, prs;
  double sum = 0.0;
  for (const auto& r : result.folds) {
    sum += r.metrics.macro_f1;
    rocs.push_back(r.roc);
    prs.push_back(r.pr);
  }
  result.mean_macro_f1 = sum / static_cast<double>(result.folds.size());
  result.roc = average_curves(rocs);
  result.pr = average_curves(prs);
  return result;
}

json CrossValidationResult::to_json() const {
  json folds_json = json::array();
  for (const auto& r : folds) {
    folds_json.push_back({{"fold", r.fold},
                          {"n_train", r.n_train},
                          {"n_validation", r.n_validation},
                          {"confusion_matrix", distress::to_json(r.cm)},
                          {"metrics", distress::to_json(r.metrics)},
                          {"roc_auc", r.roc.auc},
                          {"average_precision", r.pr.auc},
                          {"pr_baseline", r.pr.baseline},
                          {"standardizer_means", r.standardizer.means()}});
  }
  return {{"family", to_string(family_of(config))},
          {"hyperparameters", distress::to_json(config)},
          {"folds", folds_json},
          {"mean_macro_f1", mean_macro_f1},
          {"mean_roc", distress::to_json(roc)},
          {"mean_pr", distress::to_json(pr)}};
}

GridSearchResult grid_search(const FeatureMatrix& train, const std::vector<ModelConfig>& candidates,
                             const EvalOptions& options) {
  if (candidates.empty()) throw InvalidInput("grid has no candidates");
  const auto prepared = prepare_folds(train, options);
  const std::size_t k = prepared.size();
  GridSearchResult result;
  result.candidates = candidates;
  result.folds = k;
  result.fold_macro_f1.assign(candidates.size(), std::vector<double>(k, 0.0));
  detail::run_tasks(candidates.size() * k, options.jobs, [&](std::size_t task) {
    const std::size_t c = task / k, f = task % k;
    const auto& p = prepared[f];
    const auto& config = candidates[c];
    const double threshold = options.threshold.value_or(default_threshold(family_of(config)));
    const auto model = train_model(p.train, p.weights, config, fold_model_seed(options.seed, f));
    const Eigen::VectorXd scores = predict_scores(model, p.validation);
    const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
    result.fold_macro_f1[c][f] = metrics(confusion(p.validation.labels, predict_labels(s, threshold))).macro_f1;
  });
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& row = result.fold_macro_f1[c];
    result.mean_macro_f1.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(k));
    if (result.mean_macro_f1[c] > result.mean_macro_f1[result.best]) result.best = c;
  }
  return result;
}

json GridSearchResult::to_json() const {
  json rows = json::array();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    rows.push_back({{"index", c},
                    {"family", to_string(family_of(candidates[c]))},
                    {"hyperparameters", distress::to_json(candidates[c])},
                    {"fold_macro_f1", fold_macro_f1[c]},
                    {"mean_macro_f1", mean_macro_f1[c]}});
  }
  return {{"candidates", rows},
          {"best", best},
          {"best_hyperparameters", distress::to_json(candidates[best])},
          {"folds", folds}};
}

void write_grid_csv(std::ostream& out, const GridSearchResult& result) {
  out << "candidate,family,hyperparameters,mean_macro_f1";
  for (std::size_t f = 0; f < result.folds; ++f) out << ",fold_" << (f + 1);
  out << '\n';
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    out << c << ',' << to_string(family_of(result.candidates[c])) << ','
        << io::quote_field(distress::to_json(result.candidates[c]).dump(), ',') << ','
        << io::format_double(result.mean_macro_f1[c]);
    for (const double v : result.fold_macro_f1[c]) out << ',' << io::format_double(v);
    out << '\n';
  }
}

EvaluationReport final_fit_and_test(const ModelConfig& config, const FeatureMatrix& train,
                                    const FeatureMatrix& test, std::optional<double> threshold,
                                    std::uint64_t seed) {
  {
    std::vector<RowKey> a = train.row_keys, b = test.row_keys;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<RowKey> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    if (!shared.empty()) {
      throw InvalidInput("train and test share row " + shared.front().municipality_id + "/" +
                         std::to_string(shared.front().year));
    }
  }
  EvaluationReport r;
  r.config = config;
  r.threshold = threshold.value_or(default_threshold(family_of(config)));
  r.seed = seed;
  r.n_train = train.rows();
  r.n_test = test.rows();
  r.pipeline = fit_pipeline(train, config, stage_seeds(seed).model);
  const Eigen::VectorXd scores = r.pipeline.scores(test);
  r.test_scores.assign(scores.data(), scores.data() + scores.size());
  r.cm = confusion(test.labels, predict_labels(r.test_scores, r.threshold));
  r.metrics = metrics(r.cm);
  r.roc = roc_curve(test.labels, r.test_scores);
  r.pr = pr_curve(test.labels, r.test_scores);
  return r;
}

json EvaluationReport::to_json() const {
  return {{"family", to_string(family_of(config))},
          {"hyperparameters", distress::to_json(config)},
          {"threshold", threshold},
          {"seed", seed},
          {"n_train", n_train},
          {"n_test", n_test},
          {"confusion_matrix", distress::to_json(cm)},
          {"metrics", distress::to_json(metrics)},
          {"roc", distress::to_json(roc)},
          {"pr", distress::to_json(pr)},
          {"pipeline", pipeline_to_json(pipeline)}};
}

}  // namespace distress
