#include <algorithm>
#include <cmath>
#include <numeric>

#include "distress/error.hpp"
#include "distress/models.hpp"
#include "distress/random.hpp"

namespace distress {

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(k)];
    k = row(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

int DecisionTree::depth() const noexcept {
  int deepest = 0;
  for (const auto& node : nodes) deepest = std::max(deepest, node.depth);
  return deepest;
}

namespace {

constexpr double kMinGain = 1e-12;

using SortedColumns = std::vector<std::vector<std::uint32_t>>;

SortedColumns presort(const Eigen::MatrixXd& X) {
  SortedColumns sorted(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
  }
  return sorted;
}

/// Level-wise exact greedy tree growth over presorted columns. Each level
/// costs one pass over every allowed column. `Rules` supplies the split
/// criterion, stopping rule, per-node feature subsets, and leaf values.
template <class Stats, class Rules>
DecisionTree grow_tree(const Eigen::MatrixXd& X, const SortedColumns& sorted,
                       const std::vector<Stats>& sample_stats, std::vector<int>& node_of,
                       Rules& rules) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<int>(X.cols());
  DecisionTree tree;
  std::vector<Stats> node_stats;

  auto sum_stats = [&](int first_node) {
    node_stats.resize(tree.nodes.size());
    for (std::size_t k = static_cast<std::size_t>(first_node); k < node_stats.size(); ++k) {
      node_stats[k] = Stats{};
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] >= first_node) node_stats[static_cast<std::size_t>(node_of[i])] += sample_stats[i];
    }
    for (std::size_t k = static_cast<std::size_t>(first_node); k < node_stats.size(); ++k) {
      tree.nodes[k].n_samples = rules.count(node_stats[k]);
      tree.nodes[k].value = rules.leaf_value(node_stats[k]);
    }
  };

  tree.nodes.push_back({});
  sum_stats(0);
  std::vector<int> frontier = {0};

  struct Best {
    double gain = kMinGain;
    int feature = -1;
    double threshold = 0.0;
  };

  while (!frontier.empty()) {
    std::vector<int> active;
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (const int node : frontier) {
      if (rules.splittable(node_stats[static_cast<std::size_t>(node)],
                           tree.nodes[static_cast<std::size_t>(node)].depth)) {
        slot_of[static_cast<std::size_t>(node)] = static_cast<int>(active.size());
        active.push_back(node);
      }
    }
    if (active.empty()) break;
    rules.prepare(active.size(), d);

    std::vector<Best> best(active.size());
    std::vector<Stats> running(active.size());
    std::vector<double> last(active.size());
    std::vector<char> has_last(active.size());
    for (int f = 0; f < d; ++f) {
      if (!rules.any_allowed(f)) continue;
      std::fill(running.begin(), running.end(), Stats{});
      std::fill(has_last.begin(), has_last.end(), 0);
      for (const auto i : sorted[static_cast<std::size_t>(f)]) {
        const int node = node_of[i];
        if (node < 0) continue;
        const int s = slot_of[static_cast<std::size_t>(node)];
        if (s < 0 || !rules.allowed(static_cast<std::size_t>(s), f)) continue;
        const double v = X(i, f);
        const auto su = static_cast<std::size_t>(s);
        if (has_last[su] && v > last[su]) {
          const auto& parent = node_stats[static_cast<std::size_t>(node)];
          const Stats right = parent - running[su];
          const double gain = rules.gain(parent, running[su], right);
          if (gain > best[su].gain) {
            double threshold = 0.5 * (last[su] + v);
            if (!(threshold < v)) threshold = last[su];
            best[su] = {gain, f, threshold};
          }
        }
        running[su] += sample_stats[i];
        last[su] = v;
        has_last[su] = 1;
      }
    }

    std::vector<int> next;
    std::vector<int> split_feature(tree.nodes.size() + 2 * active.size(), -1);
    const int first_child = static_cast<int>(tree.nodes.size());
    for (std::size_t s = 0; s < active.size(); ++s) {
      if (best[s].feature < 0) continue;
      const int node = active[s];
      const int depth = tree.nodes[static_cast<std::size_t>(node)].depth + 1;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({-1, 0.0, -1, -1, 0.0, depth, 0.0});
      tree.nodes.push_back({-1, 0.0, -1, -1, 0.0, depth, 0.0});
      auto& parent = tree.nodes[static_cast<std::size_t>(node)];
      parent.feature = best[s].feature;
      parent.threshold = best[s].threshold;
      parent.left = left;
      parent.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      if (nd.feature < 0 || nd.left < first_child) continue;
      node_of[i] = X(static_cast<Eigen::Index>(i), nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    sum_stats(first_child);
    frontier = std::move(next);
  }
  return tree;
}

struct ClassStats {
  double w0 = 0.0;
  double w1 = 0.0;
  double count = 0.0;

  ClassStats& operator+=(const ClassStats& o) {
    w0 += o.w0;
    w1 += o.w1;
    count += o.count;
    return *this;
  }
  friend ClassStats operator-(const ClassStats& a, const ClassStats& b) {
    return {a.w0 - b.w0, a.w1 - b.w1, a.count - b.count};
  }
};

double weighted_gini_mass(const ClassStats& s) {
  const double total = s.w0 + s.w1;
  if (!(total > 0.0)) return 0.0;
  return total - (s.w0 * s.w0 + s.w1 * s.w1) / total;
}

class ForestRules {
 public:
  ForestRules(const ForestParams& params, int n_features, Rng& rng)
      : params_(params),
        mtry_(std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))))),
        rng_(rng) {}

  bool splittable(const ClassStats& s, int depth) const {
    return depth < params_.max_depth && s.count >= params_.min_samples_split && s.w0 > 0.0 &&
           s.w1 > 0.0;
  }
  double gain(const ClassStats& parent, const ClassStats& left, const ClassStats& right) const {
    return weighted_gini_mass(parent) - weighted_gini_mass(left) - weighted_gini_mass(right);
  }
  double leaf_value(const ClassStats& s) const {
    const double total = s.w0 + s.w1;
    return total > 0.0 ? s.w1 / total : 0.0;
  }
  double count(const ClassStats& s) const { return s.count; }

  /// Draws a fresh feature subset for every node of the level, in node order.
  void prepare(std::size_t slots, int n_features) {
    allowed_.assign(slots, std::vector<char>(static_cast<std::size_t>(n_features), 0));
    any_.assign(static_cast<std::size_t>(n_features), 0);
    std::vector<int> pool(static_cast<std::size_t>(n_features));
    for (auto& mask : allowed_) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int k = 0; k < mtry_ && k < n_features; ++k) {
        const auto pick = static_cast<std::size_t>(k) +
                          static_cast<std::size_t>(rng_.below(static_cast<std::uint64_t>(n_features - k)));
        std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
        mask[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
        any_[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = 1;
      }
    }
  }
  bool any_allowed(int f) const { return any_[static_cast<std::size_t>(f)] != 0; }
  bool allowed(std::size_t slot, int f) const { return allowed_[slot][static_cast<std::size_t>(f)] != 0; }

 private:
  ForestParams params_;
  int mtry_;
  Rng& rng_;
  std::vector<std::vector<char>> allowed_;
  std::vector<char> any_;
};

struct GradStats {
  double g = 0.0;
  double h = 0.0;
  double count = 0.0;

  GradStats& operator+=(const GradStats& o) {
    g += o.g;
    h += o.h;
    count += o.count;
    return *this;
  }
  friend GradStats operator-(const GradStats& a, const GradStats& b) {
    return {a.g - b.g, a.h - b.h, a.count - b.count};
  }
};

class BoostRules {
 public:
  BoostRules(int max_depth, double lambda) : max_depth_(max_depth), lambda_(lambda) {}

  bool splittable(const GradStats&, int depth) const { return depth < max_depth_; }
  double gain(const GradStats& parent, const GradStats& left, const GradStats& right) const {
    return 0.5 * (score(left) + score(right) - score(parent));
  }
  double leaf_value(const GradStats& s) const { return -s.g / (s.h + lambda_); }
  double count(const GradStats& s) const { return s.count; }
  void prepare(std::size_t, int) {}
  bool any_allowed(int) const { return true; }
  bool allowed(std::size_t, int) const { return true; }

 private:
  double score(const GradStats& s) const { return s.g * s.g / (s.h + lambda_); }

  int max_depth_;
  double lambda_;
};

void check_trainable(const FeatureMatrix& X) {
  if (X.rows() == 0) throw EmptyDataset("cannot train on an empty matrix");
  if (static_cast<std::size_t>(X.values.rows()) != X.rows() || X.labels.size() != X.rows()) {
    throw InvalidInput("feature matrix shape mismatch");
  }
}

}  // namespace

ForestModel train_random_forest(const FeatureMatrix& X, const ClassWeights& w,
                                const ForestParams& params, std::uint64_t seed) {
  check_trainable(X);
  if (params.n_trees < 1 || params.max_depth < 0 || params.min_samples_split < 2) {
    throw InvalidInput("invalid forest hyperparameters");
  }
  const auto sorted = presort(X.values);
  const auto n = X.rows();
  ForestModel model;
  model.columns = X.column_names;
  model.params = params;
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> multiplicity(n, 0.0);
    for (std::size_t draw = 0; draw < n; ++draw) multiplicity[rng.below(n)] += 1.0;
    std::vector<ClassStats> stats(n);
    std::vector<int> node_of(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (multiplicity[i] == 0.0) continue;
      node_of[i] = 0;
      const double weight = multiplicity[i] * w.of(X.labels[i]);
      stats[i] = X.labels[i] == 1 ? ClassStats{0.0, weight, multiplicity[i]}
                                  : ClassStats{weight, 0.0, multiplicity[i]};
    }
    ForestRules rules(params, static_cast<int>(X.values.cols()), rng);
    model.trees.push_back(grow_tree(X.values, sorted, stats, node_of, rules));
  }
  model.info.seed = seed;
  model.info.n_rows = n;
  model.info.weights = w;
  model.info.iterations = params.n_trees;
  return model;
}

BoostedModel train_gbt(const FeatureMatrix& X, const ClassWeights& w, const GbtParams& params,
                       std::uint64_t seed) {
  check_trainable(X);
  if (params.n_estimators < 0 || params.max_depth < 0 || !(params.learning_rate > 0.0)) {
    throw InvalidInput("invalid boosting hyperparameters");
  }
  const auto n = X.rows();
  std::vector<double> weight(n);
  double total = 0.0, positive = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = w.of(X.labels[i]);
    total += weight[i];
    if (X.labels[i] == 1) positive += weight[i];
  }
  const double rate = positive / total;
  if (!(rate > 0.0 && rate < 1.0)) throw InvalidInput("boosting needs both classes present");

  BoostedModel model;
  model.columns = X.column_names;
  model.params = params;
  model.base_score = std::log(rate / (1.0 - rate));

  auto loss = [&](const std::vector<double>& margin) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = margin[i];
      const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
      sum += weight[i] * (softplus - X.labels[i] * z);
    }
    return sum / total;
  };

  std::vector<double> margin(n, model.base_score);
  model.info.loss_history.push_back(loss(margin));
  if (params.n_estimators > 0) {
    const auto sorted = presort(X.values);
    BoostRules rules(params.max_depth, model.lambda);
    std::vector<GradStats> stats(n);
    for (int round = 0; round < params.n_estimators; ++round) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(margin[i]);
        stats[i] = {weight[i] * (p - X.labels[i]), weight[i] * p * (1.0 - p), 1.0};
      }
      std::vector<int> node_of(n, 0);
      auto tree = grow_tree(X.values, sorted, stats, node_of, rules);
      for (std::size_t i = 0; i < n; ++i) {
        margin[i] += params.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[i])].value;
      }
      model.trees.push_back(std::move(tree));
      model.info.loss_history.push_back(loss(margin));
    }
  }
  model.info.seed = seed;
  model.info.n_rows = n;
  model.info.weights = w;
  model.info.iterations = params.n_estimators;
  model.info.objective = model.info.loss_history.back();
  return model;
}

}  // namespace distress
