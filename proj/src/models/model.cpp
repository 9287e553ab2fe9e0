#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "distress/error.hpp"
#include "distress/models.hpp"

namespace distress {

using nlohmann::json;

ClassWeights class_weights(std::span<const int> labels) {
  std::size_t positives = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw InvalidInput("labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  const std::size_t n = labels.size();
  if (positives == 0 || positives == n) {
    throw InvalidInput("class weights need both classes present");
  }
  const double total = static_cast<double>(n);
  return {total / (2.0 * static_cast<double>(n - positives)),
          total / (2.0 * static_cast<double>(positives))};
}

std::string_view to_string(Penalty p) noexcept { return p == Penalty::L1 ? "l1" : "l2"; }

std::string_view to_string(Kernel k) noexcept { return k == Kernel::Linear ? "linear" : "rbf"; }

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::Logistic: return "logistic";
    case Family::Svm: return "svm";
    case Family::Forest: return "forest";
    case Family::Gbt: return "gbt";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "logistic" || lower == "lr" || lower == "logistic_regression") return Family::Logistic;
  if (lower == "svm") return Family::Svm;
  if (lower == "forest" || lower == "rf" || lower == "random_forest") return Family::Forest;
  if (lower == "gbt" || lower == "boosting" || lower == "gradient_boosting") return Family::Gbt;
  throw UnsupportedModel("unknown model family '" + std::string(name) + "'");
}

namespace {

Penalty parse_penalty(const std::string& s) {
  if (s == "l1" || s == "L1") return Penalty::L1;
  if (s == "l2" || s == "L2") return Penalty::L2;
  throw InvalidInput("unknown penalty '" + s + "'");
}

Kernel parse_kernel(const std::string& s) {
  if (s == "linear") return Kernel::Linear;
  if (s == "rbf" || s == "radial-basis" || s == "radial_basis") return Kernel::Rbf;
  throw InvalidInput("unknown kernel '" + s + "'");
}

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(std::string("hyperparameter '") + key + "' has the wrong type");
  }
}

}  // namespace

Family family_of(const ModelConfig& config) noexcept {
  return static_cast<Family>(config.index());
}

json to_json(const ModelConfig& config) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LogisticParams>) {
          return {{"penalty", to_string(p.penalty)}, {"C", p.C}};
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          json j = {{"kernel", to_string(p.kernel)}, {"C", p.C}};
          if (p.kernel == Kernel::Rbf) j["gamma"] = p.gamma;
          return j;
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          return {{"n_trees", p.n_trees},
                  {"max_depth", p.max_depth},
                  {"min_samples_split", p.min_samples_split}};
        } else {
          return {{"n_estimators", p.n_estimators},
                  {"max_depth", p.max_depth},
                  {"learning_rate", p.learning_rate}};
        }
      },
      config);
}

ModelConfig config_from_json(Family family, const json& j) {
  if (!j.is_object()) throw InvalidInput("hyperparameters must be an object");
  switch (family) {
    case Family::Logistic: {
      LogisticParams p;
      p.penalty = parse_penalty(field<std::string>(j, "penalty", std::string(to_string(p.penalty))));
      p.C = field(j, "C", p.C);
      if (!(p.C > 0.0)) throw InvalidInput("C must be positive");
      return p;
    }
    case Family::Svm: {
      SvmParams p;
      p.kernel = parse_kernel(field<std::string>(j, "kernel", std::string(to_string(p.kernel))));
      p.C = field(j, "C", p.C);
      p.gamma = field(j, "gamma", p.gamma);
      if (!(p.C > 0.0) || !(p.gamma > 0.0)) throw InvalidInput("C and gamma must be positive");
      return p;
    }
    case Family::Forest: {
      ForestParams p;
      p.n_trees = field(j, "n_trees", p.n_trees);
      p.max_depth = field(j, "max_depth", p.max_depth);
      p.min_samples_split = field(j, "min_samples_split", p.min_samples_split);
      if (p.n_trees < 1 || p.max_depth < 0 || p.min_samples_split < 2) {
        throw InvalidInput("invalid forest hyperparameters");
      }
      return p;
    }
    case Family::Gbt: {
      GbtParams p;
      p.n_estimators = field(j, "n_estimators", p.n_estimators);
      p.max_depth = field(j, "max_depth", p.max_depth);
      p.learning_rate = field(j, "learning_rate", p.learning_rate);
      if (p.n_estimators < 0 || p.max_depth < 0 || !(p.learning_rate > 0.0)) {
        throw InvalidInput("invalid boosting hyperparameters");
      }
      return p;
    }
  }
  throw InvalidInput("unknown model family");
}

std::string describe(const ModelConfig& config) {
  return std::string(to_string(family_of(config))) + " " + to_json(config).dump();
}

Family family_of(const TrainedModel& model) noexcept { return static_cast<Family>(model.index()); }

const std::vector<std::string>& model_columns(const TrainedModel& model) noexcept {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.columns; },
                    model);
}

TrainedModel train_model(const FeatureMatrix& X, const ClassWeights& w, const ModelConfig& config,
                         std::uint64_t seed) {
  return std::visit(
      [&](const auto& p) -> TrainedModel {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LogisticParams>) {
          auto m = train_logistic(X, w, p);
          m.info.seed = seed;
          return m;
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          auto m = train_svm(X, w, p);
          m.info.seed = seed;
          return m;
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          return train_random_forest(X, w, p, seed);
        } else {
          return train_gbt(X, w, p, seed);
        }
      },
      config);
}

namespace {

/// X restricted and reordered to the model's training columns.
Eigen::MatrixXd aligned(const std::vector<std::string>& columns, const FeatureMatrix& X) {
  if (columns == X.column_names) return X.values;
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t c = 0; c < X.column_names.size(); ++c) {
    index.emplace(X.column_names[c], static_cast<Eigen::Index>(c));
  }
  Eigen::MatrixXd out(X.values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto it = index.find(columns[c]);
    if (it == index.end()) throw InvalidInput("feature column '" + columns[c] + "' is missing");
    out.col(static_cast<Eigen::Index>(c)) = X.values.col(it->second);
  }
  return out;
}

double forest_score(const ForestModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (m.trees.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& tree : m.trees) sum += tree.predict(row);
  return sum / static_cast<double>(m.trees.size());
}

double boosted_margin(const BoostedModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double sum = 0.0;
  for (const auto& tree : m.trees) sum += tree.predict(row);
  return m.base_score + m.params.learning_rate * sum;
}

}  // namespace

Eigen::VectorXd predict_scores(const TrainedModel& model, const FeatureMatrix& X) {
  const Eigen::MatrixXd A = aligned(model_columns(model), X);
  const Eigen::Index n = A.rows();
  Eigen::VectorXd scores(n);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          const Eigen::VectorXd z = (A * m.coefficients).array() + m.intercept;
          for (Eigen::Index i = 0; i < n; ++i) scores(i) = sigmoid(z(i));
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          if (m.params.kernel == Kernel::Linear) {
            scores = (A * m.weights).array() + m.bias;
          } else {
            const Eigen::VectorXd sv_norms = m.support_vectors.rowwise().squaredNorm();
            const Eigen::MatrixXd cross = A * m.support_vectors.transpose();
            for (Eigen::Index i = 0; i < n; ++i) {
              const double own = A.row(i).squaredNorm();
              double s = m.bias;
              for (Eigen::Index k = 0; k < cross.cols(); ++k) {
                const double dist = std::max(0.0, own + sv_norms(k) - 2.0 * cross(i, k));
                s += m.dual_coef(k) * std::exp(-m.params.gamma * dist);
              }
              scores(i) = s;
            }
          }
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          for (Eigen::Index i = 0; i < n; ++i) scores(i) = forest_score(m, A.row(i));
        } else {
          for (Eigen::Index i = 0; i < n; ++i) scores(i) = sigmoid(boosted_margin(m, A.row(i)));
        }
      },
      model);
  return scores;
}

std::vector<int> predict_labels(std::span<const double> scores, double threshold) {
  std::vector<int> labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) labels[i] = scores[i] >= threshold ? 1 : 0;
  return labels;
}

double default_threshold(Family family) noexcept { return family == Family::Svm ? 0.0 : 0.5; }

namespace {

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json info_json(const TrainingInfo& info) {
  json j = {{"converged", info.converged},
            {"iterations", info.iterations},
            {"objective", info.objective},
            {"seed", info.seed},
            {"n_rows", info.n_rows},
            {"class_weights", {{"negative", info.weights.negative}, {"positive", info.weights.positive}}}};
  if (!info.loss_history.empty()) j["loss_history"] = info.loss_history;
  return j;
}

TrainingInfo info_from(const json& j) {
  TrainingInfo info;
  info.converged = j.at("converged").get<bool>();
  info.iterations = j.at("iterations").get<int>();
  info.objective = j.at("objective").get<double>();
  info.seed = j.at("seed").get<std::uint64_t>();
  info.n_rows = j.at("n_rows").get<std::size_t>();
  info.weights = {j.at("class_weights").at("negative").get<double>(),
                  j.at("class_weights").at("positive").get<double>()};
  if (j.contains("loss_history")) info.loss_history = j.at("loss_history").get<std::vector<double>>();
  return info;
}

// Node layout: [feature, threshold, left, right, value, depth, n_samples].
json tree_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.depth, n.n_samples});
  }
  return nodes;
}

DecisionTree tree_from(const json& j) {
  DecisionTree tree;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 7) throw ParseError("malformed tree node");
    tree.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                          n[4].get<double>(), n[5].get<int>(), n[6].get<double>()});
  }
  const auto size = static_cast<int>(tree.nodes.size());
  if (size == 0) throw ParseError("empty tree");
  for (const auto& n : tree.nodes) {
    if (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
      throw ParseError("tree node references a missing child");
    }
  }
  return tree;
}

json trees_json(const std::vector<DecisionTree>& trees) {
  json out = json::array();
  for (const auto& t : trees) out.push_back(tree_json(t));
  return out;
}

std::vector<DecisionTree> trees_from(const json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j) trees.push_back(tree_from(t));
  return trees;
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["family"] = to_string(family_of(model));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        j["columns"] = m.columns;
        j["training"] = info_json(m.info);
        if constexpr (std::is_same_v<T, LogisticModel>) {
          j["hyperparameters"] = to_json(ModelConfig{m.params});
          j["coefficients"] = vector_json(m.coefficients);
          j["intercept"] = m.intercept;
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          json params = to_json(ModelConfig{m.params});
          params["gamma"] = m.params.gamma;
          j["hyperparameters"] = params;
          j["bias"] = m.bias;
          if (m.params.kernel == Kernel::Linear) {
            j["weights"] = vector_json(m.weights);
          } else {
            json rows = json::array();
            for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r) {
              rows.push_back(vector_json(m.support_vectors.row(r).transpose()));
            }
            j["support_vectors"] = rows;
            j["dual_coef"] = vector_json(m.dual_coef);
          }
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["hyperparameters"] = to_json(ModelConfig{m.params});
          j["trees"] = trees_json(m.trees);
        } else {
          j["hyperparameters"] = to_json(ModelConfig{m.params});
          j["base_score"] = m.base_score;
          j["lambda"] = m.lambda;
          j["trees"] = trees_json(m.trees);
        }
      },
      model);
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format version " + std::to_string(version));
    }
    const Family family = parse_family(j.at("family").get<std::string>());
    const ModelConfig config = config_from_json(family, j.at("hyperparameters"));
    const auto columns = j.at("columns").get<std::vector<std::string>>();
    const TrainingInfo info = info_from(j.at("training"));
    switch (family) {
      case Family::Logistic: {
        LogisticModel m{columns, vector_from(j.at("coefficients")), j.at("intercept").get<double>(),
                        std::get<LogisticParams>(config), info};
        if (static_cast<std::size_t>(m.coefficients.size()) != columns.size()) {
          throw ParseError("coefficient count differs from column count");
        }
        return m;
      }
      case Family::Svm: {
        SvmModel m;
        m.columns = columns;
        m.params = std::get<SvmParams>(config);
        m.bias = j.at("bias").get<double>();
        m.info = info;
        if (m.params.kernel == Kernel::Linear) {
          m.weights = vector_from(j.at("weights"));
          if (static_cast<std::size_t>(m.weights.size()) != columns.size()) {
            throw ParseError("weight count differs from column count");
          }
        } else {
          const auto& rows = j.at("support_vectors");
          m.support_vectors.resize(static_cast<Eigen::Index>(rows.size()),
                                   static_cast<Eigen::Index>(columns.size()));
          for (std::size_t r = 0; r < rows.size(); ++r) {
            const Eigen::VectorXd row = vector_from(rows[r]);
            if (static_cast<std::size_t>(row.size()) != columns.size()) {
              throw ParseError("support vector width differs from column count");
            }
            m.support_vectors.row(static_cast<Eigen::Index>(r)) = row.transpose();
          }
          m.dual_coef = vector_from(j.at("dual_coef"));
          if (m.dual_coef.size() != m.support_vectors.rows()) {
            throw ParseError("dual coefficient count differs from support vector count");
          }
        }
        return m;
      }
      case Family::Forest:
        return ForestModel{columns, std::get<ForestParams>(config), trees_from(j.at("trees")), info};
      case Family::Gbt: {
        BoostedModel m;
        m.columns = columns;
        m.params = std::get<GbtParams>(config);
        m.base_score = j.at("base_score").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.trees = trees_from(j.at("trees"));
        m.info = info;
        return m;
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
  throw ParseError("unknown model family");
}

}  // namespace distress
