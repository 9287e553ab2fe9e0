#include <cmath>
#include <limits>

#include "distress/error.hpp"
#include "distress/models.hpp"

namespace distress {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kDecreaseTolerance = 1e-8;
constexpr double kGradientTolerance = 1e-6;
constexpr double kArmijo = 1e-4;

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double soft_threshold(double x, double t) noexcept {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Minimum-norm subgradient of the L1 objective, infinity norm.
double l1_optimality(const Eigen::VectorXd& theta, const Eigen::VectorXd& g, double lambda) {
  const Eigen::Index d = theta.size() - 1;
  double worst = std::abs(g(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double v = theta(j) != 0.0 ? std::abs(g(j) + lambda * (theta(j) > 0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::abs(g(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Coordinate descent on  g.d + 0.5 d'Hd + lambda * ||beta + d_beta||_1
/// (intercept, the last coordinate, unpenalized).
Eigen::VectorXd proximal_newton_direction(const Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                                          const Eigen::MatrixXd& H, double lambda) {
  const Eigen::Index p = theta.size();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd Hd = Eigen::VectorXd::Zero(p);
  for (int sweep = 0; sweep < 500; ++sweep) {
    double largest = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double hjj = H(j, j);
      if (!(hjj > 0.0)) continue;
      const double c = g(j) + Hd(j) - hjj * d(j);
      double next;
      if (j == p - 1) {
        next = -c / hjj;
      } else {
        next = soft_threshold(hjj * theta(j) - c, lambda) / hjj - theta(j);
      }
      const double delta = next - d(j);
      if (delta != 0.0) {
        d(j) = next;
        Hd += delta * H.col(j);
        largest = std::max(largest, std::abs(delta));
      }
    }
    if (largest < 1e-12) break;
  }
  return d;
}

}  // namespace

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& X, std::span<const int> y,
                                     ClassWeights weights, LogisticParams params,
                                     Eigen::VectorXd multiplicity)
    : X_(X), params_(params) {
  const auto n = X.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw InvalidInput("label count mismatch");
  if (n == 0) throw EmptyDataset("logistic objective over zero rows");
  if (!(params.C > 0.0)) throw InvalidInput("C must be positive");
  if (multiplicity.size() == 0) multiplicity = Eigen::VectorXd::Ones(n);
  if (multiplicity.size() != n) throw InvalidInput("multiplicity length mismatch");
  const double total = multiplicity.sum();
  y_.resize(n);
  sample_weight_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y_(i) = y[static_cast<std::size_t>(i)];
    sample_weight_(i) = multiplicity(i) * weights.of(y[static_cast<std::size_t>(i)]) / total;
  }
  lambda_ = 1.0 / (params.C * total);
}

Eigen::VectorXd LogisticObjective::margins(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = X_.cols();
  return (X_ * theta.head(d)).array() + theta(d);
}

double LogisticObjective::smooth_value(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd z = margins(theta);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += sample_weight_(i) * (softplus(z(i)) - y_(i) * z(i));
  }
  return total;
}

double LogisticObjective::value(const Eigen::VectorXd& theta) const {
  const auto beta = theta.head(X_.cols());
  const double reg = params_.penalty == Penalty::L1 ? beta.lpNorm<1>() : 0.5 * beta.squaredNorm();
  return smooth_value(theta) + lambda_ * reg;
}

Eigen::VectorXd LogisticObjective::smooth_gradient(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd z = margins(theta);
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sample_weight_(i) * (sigmoid(z(i)) - y_(i));
  Eigen::VectorXd g(dimension());
  g.head(X_.cols()) = X_.transpose() * r;
  g(X_.cols()) = r.sum();
  return g;
}

Eigen::VectorXd LogisticObjective::gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g = smooth_gradient(theta);
  const Eigen::Index d = X_.cols();
  if (params_.penalty == Penalty::L2) {
    g.head(d) += lambda_ * theta.head(d);
  } else {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (theta(j) > 0) g(j) += lambda_;
      if (theta(j) < 0) g(j) -= lambda_;
    }
  }
  return g;
}

Eigen::MatrixXd LogisticObjective::smooth_hessian(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd z = margins(theta);
  const Eigen::Index d = X_.cols();
  Eigen::VectorXd curvature(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double p = sigmoid(z(i));
    curvature(i) = sample_weight_(i) * p * (1.0 - p);
  }
  Eigen::MatrixXd H(d + 1, d + 1);
  const Eigen::MatrixXd weighted = X_.transpose() * curvature.asDiagonal();
  H.topLeftCorner(d, d).noalias() = weighted * X_;
  H.topRightCorner(d, 1) = weighted.rowwise().sum();
  H.bottomLeftCorner(1, d) = H.topRightCorner(d, 1).transpose();
  H(d, d) = curvature.sum();
  return H;
}

LogisticModel train_logistic(const FeatureMatrix& X, const ClassWeights& w,
                             const LogisticParams& params) {
  if (X.rows() == 0) throw EmptyDataset("cannot train on an empty matrix");
  const LogisticObjective objective(X.values, X.labels, w, params);
  const Eigen::Index d = X.values.cols();
  const double lambda = objective.penalty_weight();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  double f = objective.value(theta);
  bool converged = false;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    const Eigen::VectorXd g_smooth = objective.smooth_gradient(theta);
    double optimality;
    if (params.penalty == Penalty::L2) {
      Eigen::VectorXd g = g_smooth;
      g.head(d) += lambda * theta.head(d);
      optimality = g.lpNorm<Eigen::Infinity>();
    } else {
      optimality = l1_optimality(theta, g_smooth, lambda);
    }
    if (optimality < kGradientTolerance) {
      converged = true;
      break;
    }

    Eigen::MatrixXd H = objective.smooth_hessian(theta);
    Eigen::VectorXd direction;
    double predicted;  // directional decrease estimate, negative
    if (params.penalty == Penalty::L2) {
      H.topLeftCorner(d, d).diagonal().array() += lambda;
      Eigen::VectorXd g = g_smooth;
      g.head(d) += lambda * theta.head(d);
      H.diagonal().array() += 1e-12;
      direction = H.ldlt().solve(-g);
      predicted = g.dot(direction);
      if (!(predicted < 0.0)) {
        direction = -g;
        predicted = -g.squaredNorm();
      }
    } else {
      direction = proximal_newton_direction(theta, g_smooth, H, lambda);
      const auto beta = theta.head(d);
      predicted = g_smooth.dot(direction) +
                  lambda * ((beta + direction.head(d)).lpNorm<1>() - beta.lpNorm<1>());
      if (!(predicted < 0.0)) {
        converged = true;  // no descent direction left at working precision
        break;
      }
    }

    double step = 1.0;
    double f_next = objective.value(theta + direction);
    int halvings = 0;
    while (f_next > f + kArmijo * step * predicted && halvings < 60) {
      step *= 0.5;
      ++halvings;
      f_next = objective.value(theta + step * direction);
    }
    if (!(f_next <= f)) {
      converged = true;  // line search stalled: at the optimum to rounding
      break;
    }
    theta += step * direction;
    const double decrease = f - f_next;
    f = f_next;
    if (decrease < kDecreaseTolerance && halvings == 0) {
      converged = true;
      ++iter;
      break;
    }
  }

  LogisticModel model;
  model.columns = X.column_names;
  model.coefficients = theta.head(d);
  model.intercept = theta(d);
  model.params = params;
  model.info.converged = converged;
  model.info.iterations = iter;
  model.info.objective = f;
  model.info.n_rows = X.rows();
  model.info.weights = w;
  return model;
}

}  // namespace distress
