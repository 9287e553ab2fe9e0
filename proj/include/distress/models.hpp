#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/features.hpp"

namespace distress {

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;

  double of(int label) const noexcept { return label == 1 ? positive : negative; }
  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

/// Balanced inverse-frequency weights n / (2 n_c). Throws InvalidInput
/// unless both classes are present.
ClassWeights class_weights(std::span<const int> labels);

enum class Penalty : std::uint8_t { L1, L2 };
enum class Kernel : std::uint8_t { Linear, Rbf };
enum class Family : std::uint8_t { Logistic, Svm, Forest, Gbt };

std::string_view to_string(Penalty p) noexcept;
std::string_view to_string(Kernel k) noexcept;
std::string_view to_string(Family f) noexcept;
Family parse_family(std::string_view name);

/// C is inverse regularization strength: larger means weaker penalty.
struct LogisticParams {
  Penalty penalty = Penalty::L2;
  double C = 5.0;
  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct SvmParams {
  Kernel kernel = Kernel::Linear;
  double C = 1.0;
  double gamma = 0.01;  // radial-basis only
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 7;
  int min_samples_split = 5;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct GbtParams {
  int n_estimators = 100;
  int max_depth = 5;
  double learning_rate = 0.1;
  friend bool operator==(const GbtParams&, const GbtParams&) = default;
};

using ModelConfig = std::variant<LogisticParams, SvmParams, ForestParams, GbtParams>;

Family family_of(const ModelConfig& config) noexcept;
nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(Family family, const nlohmann::json& j);
std::string describe(const ModelConfig& config);

struct TrainingInfo {
  bool converged = true;
  int iterations = 0;
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_rows = 0;
  ClassWeights weights;
  std::vector<double> loss_history;  // per boosting round (gbt only)
};

struct LogisticModel {
  std::vector<std::string> columns;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  LogisticParams params;
  TrainingInfo info;
};

struct SvmModel {
  std::vector<std::string> columns;
  SvmParams params;
  Eigen::VectorXd weights;          // linear kernel
  Eigen::MatrixXd support_vectors;  // radial-basis kernel, one row per vector
  Eigen::VectorXd dual_coef;        // alpha_i * y_i for each support vector
  double bias = 0.0;
  TrainingInfo info;
};

/// Flat binary tree; a node with feature < 0 is a leaf. Rows with
/// x[feature] <= threshold descend left.
struct DecisionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output
    int depth = 0;
    double n_samples = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const noexcept;
};

struct ForestModel {
  std::vector<std::string> columns;
  ForestParams params;
  std::vector<DecisionTree> trees;  // leaf value = weighted positive frequency
  TrainingInfo info;
};

struct BoostedModel {
  std::vector<std::string> columns;
  GbtParams params;
  double base_score = 0.0;          // log-odds
  std::vector<DecisionTree> trees;  // leaf value = -G / (H + lambda)
  double lambda = 1.0;
  TrainingInfo info;
};

using TrainedModel = std::variant<LogisticModel, SvmModel, ForestModel, BoostedModel>;

Family family_of(const TrainedModel& model) noexcept;
const std::vector<std::string>& model_columns(const TrainedModel& model) noexcept;

/// Weighted, regularized logistic objective over theta = [beta, intercept]:
///   (1/N) sum_i s_i w_{y_i} logloss_i + (1/(C N)) R(beta),  N = sum_i s_i
/// where s_i are sample multiplicities (all 1 by default).
class LogisticObjective {
 public:
  LogisticObjective(const Eigen::MatrixXd& X, std::span<const int> y, ClassWeights weights,
                    LogisticParams params, Eigen::VectorXd multiplicity = {});

  double value(const Eigen::VectorXd& theta) const;
  double smooth_value(const Eigen::VectorXd& theta) const;
  /// Exact gradient for L2; for L1 the penalty contributes lambda * sign(beta).
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd smooth_gradient(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd smooth_hessian(const Eigen::VectorXd& theta) const;
  double penalty_weight() const noexcept { return lambda_; }
  Eigen::Index dimension() const noexcept { return X_.cols() + 1; }

 private:
  Eigen::VectorXd margins(const Eigen::VectorXd& theta) const;

  const Eigen::MatrixXd& X_;
  Eigen::VectorXd y_;
  Eigen::VectorXd sample_weight_;  // s_i * w_{y_i} / N
  LogisticParams params_;
  double lambda_ = 0.0;            // 1 / (C N)
};

LogisticModel train_logistic(const FeatureMatrix& X, const ClassWeights& w,
                             const LogisticParams& params);

struct SvmTrainResult {
  SvmModel model;
  Eigen::VectorXd alpha;  // one per training row
};

SvmTrainResult train_svm_detailed(const FeatureMatrix& X, const ClassWeights& w,
                                  const SvmParams& params);
SvmModel train_svm(const FeatureMatrix& X, const ClassWeights& w, const SvmParams& params);

/// Largest per-sample KKT violation of a dual solution on its training data.
double svm_max_kkt_violation(const SvmTrainResult& result, const FeatureMatrix& X,
                             const ClassWeights& w);

ForestModel train_random_forest(const FeatureMatrix& X, const ClassWeights& w,
                                const ForestParams& params, std::uint64_t seed);

BoostedModel train_gbt(const FeatureMatrix& X, const ClassWeights& w, const GbtParams& params,
                       std::uint64_t seed);

/// Trains whichever family `config` holds.
TrainedModel train_model(const FeatureMatrix& X, const ClassWeights& w, const ModelConfig& config,
                         std::uint64_t seed);

/// Probability in [0, 1] for logistic, forest, boosted; signed margin for svm.
/// Columns are matched by name; throws InvalidInput naming a missing column.
Eigen::VectorXd predict_scores(const TrainedModel& model, const FeatureMatrix& X);

/// label = [score >= threshold]
std::vector<int> predict_labels(std::span<const double> scores, double threshold);

/// 0.5 for probabilistic families, 0 for svm margins.
double default_threshold(Family family) noexcept;

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

double sigmoid(double z) noexcept;

}  // namespace distress
