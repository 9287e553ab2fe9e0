#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/features.hpp"
#include "distress/models.hpp"

namespace distress {

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Per class, round(n_c * train_fraction) rows (half up, clamped so both
/// sides keep the class) go to train after a seeded shuffle. Throws
/// InvalidInput when a class has fewer than 2 rows.
SplitIndices stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

/// k disjoint folds of row indices, each sorted. Each class is shuffled and
/// dealt round-robin, the dealing position carrying over between classes,
/// so every fold holds floor or ceil of its per-class quota.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fn + fp + tn; }
  /// Same predictions scored with the negative class as "positive".
  ConfusionMatrix swapped() const noexcept { return {tn, fp, fn, tp}; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some ratio was 0/0 and set to 0
};

struct ClassificationMetrics {
  ClassMetrics positive;
  ClassMetrics negative;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  bool degenerate = false;
};

ClassificationMetrics metrics(const ConfusionMatrix& cm);

enum class CurveKind : std::uint8_t { Roc, Pr };
std::string_view to_string(CurveKind kind) noexcept;

/// ROC: x = false positive rate, y = true positive rate.
/// PR: x = recall, y = precision, starting at (0, 1).
/// thresholds[i] is the score cut behind point i (+inf for the origin).
struct Curve {
  CurveKind kind = CurveKind::Roc;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> thresholds;
  double auc = 0.0;       // trapezoid for ROC, average precision for PR
  double baseline = 0.0;  // positive prevalence (PR only)
};

/// Throws InvalidInput on length mismatch or single-class labels.
Curve roc_curve(std::span<const int> y_true, std::span<const double> scores);
Curve pr_curve(std::span<const int> y_true, std::span<const double> scores);

struct AveragedCurve {
  CurveKind kind = CurveKind::Roc;
  std::vector<double> grid;  // 0, 0.01, ..., 1
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation across curves
};

inline constexpr std::size_t kCurveGridPoints = 101;

/// ROC: linear interpolation of TPR at each FPR grid point (upper end of
/// vertical runs). PR: precision of the first point reaching the grid
/// recall. Throws InvalidInput for fewer than 2 curves or mixed kinds.
AveragedCurve average_curves(std::span<const Curve> curves);

/// `x,y,std` table; std is 0 for a single curve.
void write_curve_csv(std::ostream& out, const Curve& curve);
void write_curve_csv(std::ostream& out, const AveragedCurve& curve);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const Curve& c);
nlohmann::json to_json(const AveragedCurve& c);

/// Hyperparameter lists for one family, in declaration order. The first
/// axis varies slowest in the expansion.
struct GridSpec {
  Family family = Family::Logistic;
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
};

/// Cartesian product in declaration order. Candidates that coincide after
/// normalization (gamma under a linear kernel) keep their first position.
std::vector<ModelConfig> expand_grid(const GridSpec& grid);

/// The published search grids.
GridSpec paper_grid(Family family);

/// Grid file: an object keyed by family, each mapping hyperparameter names
/// to value lists. Key order in the file is the declaration order.
std::vector<GridSpec> parse_grid_file(const std::string& text);

/// Standardizer and model fitted together on one training portion.
struct FittedPipeline {
  Standardizer standardizer;
  ClassWeights weights;
  TrainedModel model;
  std::vector<std::string> lag_features;

  Eigen::VectorXd scores(const FeatureMatrix& raw) const;
};

/// Fits the standardizer and class weights on `train` only, then trains.
FittedPipeline fit_pipeline(const FeatureMatrix& train, const ModelConfig& config, std::uint64_t seed,
                            std::vector<std::string> lag_features = default_lag_features());

nlohmann::json pipeline_to_json(const FittedPipeline& p);
FittedPipeline pipeline_from_json(const nlohmann::json& j);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  ConfusionMatrix cm;
  ClassificationMetrics metrics;
  Curve roc;
  Curve pr;
  Standardizer standardizer;
};

struct EvalOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::optional<double> threshold;  // family default when empty
  unsigned jobs = 1;
};

struct CrossValidationResult {
  ModelConfig config;
  std::vector<FoldResult> folds;
  double mean_macro_f1 = 0.0;
  AveragedCurve roc;
  AveragedCurve pr;

  nlohmann::json to_json() const;
};

/// Stratified k-fold evaluation of one configuration on `train`.
CrossValidationResult cross_validate(const FeatureMatrix& train, const ModelConfig& config,
                                     const EvalOptions& options);

struct GridSearchResult {
  std::vector<ModelConfig> candidates;
  std::vector<std::vector<double>> fold_macro_f1;  // [candidate][fold]
  std::vector<double> mean_macro_f1;
  std::size_t best = 0;
  std::size_t folds = 0;

  nlohmann::json to_json() const;
};

/// Evaluates every candidate on shared folds. The best candidate has the
/// highest mean macro F1, ties going to the earliest. Throws InvalidInput
/// for an empty candidate list.
GridSearchResult grid_search(const FeatureMatrix& train, const std::vector<ModelConfig>& candidates,
                             const EvalOptions& options);

/// Writes `candidate,family,hyperparameters,mean_macro_f1,fold_1..k` rows.
void write_grid_csv(std::ostream& out, const GridSearchResult& result);

struct EvaluationReport {
  ModelConfig config;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix cm;
  ClassificationMetrics metrics;
  Curve roc;
  Curve pr;
  FittedPipeline pipeline;
  std::vector<double> test_scores;

  nlohmann::json to_json() const;
};

/// Refits on the whole training portion and scores the held-out rows.
EvaluationReport final_fit_and_test(const ModelConfig& config, const FeatureMatrix& train,
                                    const FeatureMatrix& test, std::optional<double> threshold,
                                    std::uint64_t seed);

/// Seeds of the pipeline stages, all derived from one run seed.
struct StageSeeds {
  std::uint64_t split;
  std::uint64_t folds;
  std::uint64_t model;
};
StageSeeds stage_seeds(std::uint64_t seed) noexcept;

}  // namespace distress
