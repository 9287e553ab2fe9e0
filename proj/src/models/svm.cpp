#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "distress/error.hpp"
#include "distress/models.hpp"

namespace distress {

namespace {

constexpr double kKktTolerance = 1e-3;
constexpr int kMaxEpochs = 100;
constexpr double kTau = 1e-12;
constexpr std::size_t kCacheBytes = std::size_t{256} << 20;

/// Kernel rows K(x_i, .) with an LRU cache sized by kCacheBytes.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& X, const SvmParams& params)
      : X_(X), params_(params), sq_norms_(X.rowwise().squaredNorm()) {
    const auto n = static_cast<std::size_t>(X.rows());
    capacity_ = std::max<std::size_t>(2, kCacheBytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
  }

  double diagonal(Eigen::Index i) const {
    return params_.kernel == Kernel::Linear ? sq_norms_(i) : 1.0;
  }

  const Eigen::VectorXd& row(Eigen::Index i) {
    if (const auto it = index_.find(i); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    if (order_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    Eigen::VectorXd k = X_ * X_.row(i).transpose();
    if (params_.kernel == Kernel::Rbf) {
      const double own = sq_norms_(i);
      for (Eigen::Index j = 0; j < k.size(); ++j) {
        const double dist = std::max(0.0, own + sq_norms_(j) - 2.0 * k(j));
        k(j) = std::exp(-params_.gamma * dist);
      }
    }
    order_.emplace_front(i, std::move(k));
    index_[i] = order_.begin();
    return order_.front().second;
  }

 private:
  const Eigen::MatrixXd& X_;
  SvmParams params_;
  Eigen::VectorXd sq_norms_;
  std::size_t capacity_;
  std::list<std::pair<Eigen::Index, Eigen::VectorXd>> order_;
  std::unordered_map<Eigen::Index, std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator>
      index_;
};

}  // namespace

SvmTrainResult train_svm_detailed(const FeatureMatrix& X, const ClassWeights& w,
                                  const SvmParams& params) {
  const auto n = static_cast<Eigen::Index>(X.rows());
  if (n == 0) throw EmptyDataset("cannot train on an empty matrix");
  if (!(params.C > 0.0)) throw InvalidInput("C must be positive");
  if (params.kernel == Kernel::Rbf && !(params.gamma > 0.0)) {
    throw InvalidInput("gamma must be positive for the radial-basis kernel");
  }

  Eigen::VectorXd y(n), upper(n), alpha = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = X.labels[static_cast<std::size_t>(i)];
    y(i) = label == 1 ? 1.0 : -1.0;
    upper(i) = params.C * w.of(label);
  }
  // Gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij.
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  KernelRows kernel(X.values, params);

  auto is_upper = [&](Eigen::Index t) { return alpha(t) >= upper(t); };
  auto is_lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

  const long long max_iter = static_cast<long long>(kMaxEpochs) * n;
  long long iter = 0;
  bool converged = false;
  while (iter < max_iter) {
    // Working-set selection with second-order information.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!is_upper(t) && -grad(t) >= gmax) { gmax = -grad(t); i = t; }
      } else {
        if (!is_lower(t) && grad(t) >= gmax) { gmax = grad(t); i = t; }
      }
    }
    if (i < 0) { converged = true; break; }
    const Eigen::VectorXd& ki = kernel.row(i);
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (is_lower(t)) continue;
        const double diff = gmax + grad(t);
        gmax2 = std::max(gmax2, grad(t));
        if (diff > 0) {
          const double quad = kernel.diagonal(i) + kernel.diagonal(t) - 2.0 * ki(t);
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best_obj) { best_obj = obj; j = t; }
        }
      } else {
        if (is_upper(t)) continue;
        const double diff = gmax - grad(t);
        gmax2 = std::max(gmax2, -grad(t));
        if (diff > 0) {
          const double quad = kernel.diagonal(i) + kernel.diagonal(t) - 2.0 * ki(t);
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best_obj) { best_obj = obj; j = t; }
        }
      }
    }
    if (gmax + gmax2 < kKktTolerance || j < 0) { converged = true; break; }
    ++iter;

    const Eigen::VectorXd ki_copy = ki;  // the next row() call may evict it
    const Eigen::VectorXd& kj = kernel.row(j);
    const double qij = y(i) * y(j) * ki_copy(j);
    const double ci = upper(i), cj = upper(j);
    const double old_i = alpha(i), old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = kernel.diagonal(i) + kernel.diagonal(j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = -diff; }
      }
      if (diff > ci - cj) {
        if (alpha(i) > ci) { alpha(i) = ci; alpha(j) = ci - diff; }
      } else {
        if (alpha(j) > cj) { alpha(j) = cj; alpha(i) = cj + diff; }
      }
    } else {
      double quad = kernel.diagonal(i) + kernel.diagonal(j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > ci) {
        if (alpha(i) > ci) { alpha(i) = ci; alpha(j) = sum - ci; }
      } else {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = sum; }
      }
      if (sum > cj) {
        if (alpha(j) > cj) { alpha(j) = cj; alpha(i) = sum - cj; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = sum; }
      }
    }
    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    grad.array() += (y.array() * (y(i) * di * ki_copy.array() + y(j) * dj * kj.array()));
  }

  // Offset from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (is_upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  SvmTrainResult result;
  auto& model = result.model;
  model.columns = X.column_names;
  model.params = params;
  model.bias = -rho;
  std::vector<Eigen::Index> support;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 0.0) support.push_back(t);
  }
  if (params.kernel == Kernel::Linear) {
    model.weights = Eigen::VectorXd::Zero(X.values.cols());
    for (const auto t : support) model.weights += alpha(t) * y(t) * X.values.row(t).transpose();
  } else {
    model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), X.values.cols());
    model.dual_coef.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) {
      model.support_vectors.row(static_cast<Eigen::Index>(s)) = X.values.row(support[s]);
      model.dual_coef(static_cast<Eigen::Index>(s)) = alpha(support[s]) * y(support[s]);
    }
  }
  double dual = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) dual += 0.5 * alpha(t) * (grad(t) - 1.0);
  model.info.converged = converged;
  model.info.iterations = static_cast<int>(std::min<long long>(iter, std::numeric_limits<int>::max()));
  model.info.objective = dual;
  model.info.n_rows = static_cast<std::size_t>(n);
  model.info.weights = w;
  result.alpha = std::move(alpha);
  return result;
}

SvmModel train_svm(const FeatureMatrix& X, const ClassWeights& w, const SvmParams& params) {
  return train_svm_detailed(X, w, params).model;
}

double svm_max_kkt_violation(const SvmTrainResult& result, const FeatureMatrix& X,
                             const ClassWeights& w) {
  const Eigen::VectorXd f = predict_scores(result.model, X);
  double worst = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double y = X.labels[i] == 1 ? 1.0 : -1.0;
    const double margin = y * f(static_cast<Eigen::Index>(i)) - 1.0;
    const double a = result.alpha(static_cast<Eigen::Index>(i));
    const double c = result.model.params.C * w.of(X.labels[i]);
    double violation;
    if (a <= 0.0) {
      violation = std::max(0.0, -margin);
    } else if (a >= c) {
      violation = std::max(0.0, margin);
    } else {
      violation = std::abs(margin);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace distress
