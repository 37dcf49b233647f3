#pragma once

// Dense linear learners used by the prediction and style experiments:
// class-weighted L2-regularized logistic regression and L2-regularized
// (squared epsilon-insensitive loss) support-vector regression, both solved
// by damped Newton iterations on the primal, plus the [0,1] feature scaler
// and the evaluation metrics.
//
// Objectives (w excludes the intercept b, which is not penalized):
//   logistic:  0.5 |w|^2 + C sum_i c_i log(1 + exp(-y_i (x_i.w + b))),  y_i in {-1,+1}
//   svr:       0.5 |w|^2 + C sum_i max(0, |y_i - x_i.w - b| - eps)^2

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace commtraj {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LinearModel {
  VectorX<Scalar> weights;
  Scalar bias = 0;
  Scalar loss = 0;
  std::size_t iterations = 0;
  bool converged = false;

  template <typename Derived>
  VectorX<Scalar> decision(const Eigen::MatrixBase<Derived>& X) const {
    return (X * weights).array() + bias;
  }
};

template <typename Scalar>
struct SolverOptions {
  Scalar regularization = 1;     // C
  Scalar tolerance = 1e-8;       // relative objective change
  std::size_t max_iterations = 10000;
};

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar m) {
  // log(1 + exp(-m))
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) return 1 / (1 + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (1 + e);
}

// Generic damped Newton loop. `eval` fills objective, gradient and Hessian
// for the stacked parameter [w; b].
template <typename Scalar, typename Eval, typename Objective>
LinearModel<Scalar> newton(std::size_t dim, const SolverOptions<Scalar>& opts, Eval&& eval, Objective&& objective) {
  VectorX<Scalar> theta = VectorX<Scalar>::Zero(static_cast<Eigen::Index>(dim + 1));
  VectorX<Scalar> grad(theta.size());
  MatrixX<Scalar> hess(theta.size(), theta.size());
  LinearModel<Scalar> out;
  Scalar f = eval(theta, grad, hess);
  for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    const VectorX<Scalar> step = hess.ldlt().solve(-grad);
    const Scalar slope = grad.dot(step);
    if (!(slope < 0)) {
      out.converged = true;
      break;
    }
    Scalar alpha = 1;
    Scalar f_new = objective(theta + alpha * step);
    while (f_new > f + Scalar(1e-4) * alpha * slope && alpha > Scalar(1e-10)) {
      alpha /= 2;
      f_new = objective(theta + alpha * step);
    }
    if (!(f_new <= f)) {
      out.converged = true;
      break;
    }
    theta += alpha * step;
    const Scalar change = (f - f_new) / std::max<Scalar>(std::abs(f), std::numeric_limits<Scalar>::min());
    f = eval(theta, grad, hess);
    if (change < opts.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.weights = theta.head(static_cast<Eigen::Index>(dim));
  out.bias = theta(static_cast<Eigen::Index>(dim));
  out.loss = f;
  return out;
}

}  // namespace detail

/// Inverse-class-frequency weights n / (2 n_c) for positive and negative labels.
template <typename Scalar, typename DerivedY>
std::pair<Scalar, Scalar> balanced_class_weights(const Eigen::MatrixBase<DerivedY>& positive) {
  const Scalar n = static_cast<Scalar>(positive.size());
  Scalar n_pos = 0;
  for (Eigen::Index i = 0; i < positive.size(); ++i) n_pos += positive(i) > 0 ? 1 : 0;
  const Scalar n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("training labels contain a single class");
  return {n / (2 * n_pos), n / (2 * n_neg)};
}

/// `positive` holds 1 for the target class and 0 otherwise. Class weights are
/// per-class multipliers on the loss (positive, negative).
template <typename Scalar, typename DerivedX, typename DerivedY>
LinearModel<Scalar> fit_logistic(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& positive,
                                 std::pair<Scalar, Scalar> class_weights, const SolverOptions<Scalar>& opts) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n == 0) throw std::invalid_argument("empty training set");
  MatrixX<Scalar> Xa(n, d + 1);
  Xa.leftCols(d) = X;
  Xa.col(d).setOnes();
  VectorX<Scalar> sign(n), cost(n);
  bool seen_pos = false, seen_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool pos = positive(i) > 0;
    seen_pos = seen_pos || pos;
    seen_neg = seen_neg || !pos;
    sign(i) = pos ? 1 : -1;
    cost(i) = opts.regularization * (pos ? class_weights.first : class_weights.second);
  }
  if (!seen_pos || !seen_neg) throw std::invalid_argument("training labels contain a single class");

  auto objective = [&](const VectorX<Scalar>& theta) {
    const VectorX<Scalar> margin = (Xa * theta).cwiseProduct(sign);
    Scalar f = Scalar(0.5) * theta.head(d).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) f += cost(i) * detail::softplus(margin(i));
    return f;
  };
  auto eval = [&](const VectorX<Scalar>& theta, VectorX<Scalar>& grad, MatrixX<Scalar>& hess) {
    const VectorX<Scalar> margin = (Xa * theta).cwiseProduct(sign);
    VectorX<Scalar> coef(n), curv(n);
    Scalar f = Scalar(0.5) * theta.head(d).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      f += cost(i) * detail::softplus(margin(i));
      const Scalar s = detail::sigmoid(margin(i));
      coef(i) = cost(i) * (s - 1) * sign(i);
      curv(i) = cost(i) * s * (1 - s);
    }
    grad = Xa.transpose() * coef;
    grad.head(d) += theta.head(d);
    hess.noalias() = Xa.transpose() * curv.asDiagonal() * Xa;
    hess.diagonal().head(d).array() += 1;
    hess(d, d) += Scalar(1e-10);
    return f;
  };
  return detail::newton<Scalar>(static_cast<std::size_t>(d), opts, eval, objective);
}

template <typename Scalar, typename DerivedX, typename DerivedY>
LinearModel<Scalar> fit_svr(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y, Scalar epsilon,
                            const SolverOptions<Scalar>& opts) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n == 0) throw std::invalid_argument("empty training set");
  MatrixX<Scalar> Xa(n, d + 1);
  Xa.leftCols(d) = X;
  Xa.col(d).setOnes();
  const Scalar C = opts.regularization;

  auto objective = [&](const VectorX<Scalar>& theta) {
    const VectorX<Scalar> r = y - Xa * theta;
    Scalar f = Scalar(0.5) * theta.head(d).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar excess = std::abs(r(i)) - epsilon;
      if (excess > 0) f += C * excess * excess;
    }
    return f;
  };
  auto eval = [&](const VectorX<Scalar>& theta, VectorX<Scalar>& grad, MatrixX<Scalar>& hess) {
    const VectorX<Scalar> r = y - Xa * theta;
    VectorX<Scalar> coef = VectorX<Scalar>::Zero(n);
    VectorX<Scalar> active = VectorX<Scalar>::Zero(n);
    Scalar f = Scalar(0.5) * theta.head(d).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar excess = std::abs(r(i)) - epsilon;
      if (excess > 0) {
        f += C * excess * excess;
        coef(i) = -2 * C * excess * (r(i) > 0 ? 1 : -1);
        active(i) = 2 * C;
      }
    }
    grad = Xa.transpose() * coef;
    grad.head(d) += theta.head(d);
    hess.noalias() = Xa.transpose() * active.asDiagonal() * Xa;
    hess.diagonal().head(d).array() += 1;
    hess(d, d) += Scalar(1e-10);
    return f;
  };
  return detail::newton<Scalar>(static_cast<std::size_t>(d), opts, eval, objective);
}

/// Per-column affine map of the training range onto [0,1]. Constant columns
/// map to 0; values outside the training range are not clipped.
template <typename Scalar>
struct MinMaxScaler {
  VectorX<Scalar> min;
  VectorX<Scalar> range;

  template <typename Derived>
  static MinMaxScaler fit(const Eigen::MatrixBase<Derived>& X) {
    if (X.rows() == 0) throw std::invalid_argument("cannot fit scaler on an empty training set");
    MinMaxScaler s;
    s.min = X.colwise().minCoeff().transpose();
    s.range = X.colwise().maxCoeff().transpose() - s.min;
    return s;
  }

  template <typename Derived>
  MatrixX<Scalar> transform(const Eigen::MatrixBase<Derived>& X) const {
    MatrixX<Scalar> out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (range(j) > 0) out.col(j) = (X.col(j).array() - min(j)) / range(j);
      else out.col(j).setZero();
    }
    return out;
  }
};

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

template <typename DerivedP, typename DerivedY>
Confusion confusion(const Eigen::MatrixBase<DerivedP>& predicted, const Eigen::MatrixBase<DerivedY>& actual) {
  Confusion c;
  for (Eigen::Index i = 0; i < predicted.size(); ++i) {
    const bool p = predicted(i) > 0, a = actual(i) > 0;
    if (p && a) ++c.tp;
    else if (p) ++c.fp;
    else if (a) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// F1 on the positive class; 0 when precision + recall = 0.
inline double f1_score(const Confusion& c) {
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

template <typename DerivedP, typename DerivedY>
double f1_score(const Eigen::MatrixBase<DerivedP>& predicted, const Eigen::MatrixBase<DerivedY>& actual) {
  return f1_score(confusion(predicted, actual));
}

template <typename DerivedP, typename DerivedY>
double rmse(const Eigen::MatrixBase<DerivedP>& predicted, const Eigen::MatrixBase<DerivedY>& actual) {
  if (predicted.size() == 0) return 0.0;
  return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(predicted.size()));
}

}  // namespace commtraj
