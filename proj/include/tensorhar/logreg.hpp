#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"

namespace tensorhar {

using RowViews = std::vector<std::span<const double>>;

inline RowViews row_views(const Dataset& d) {
  RowViews rows;
  rows.reserve(d.size());
  for (const auto& s : d.samples) rows.push_back(s.values());
  return rows;
}

// Multinomial logistic regression parameters: scores = W x + b.
struct LinearParams {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> weights;  // n_classes x n_features, row-major
  std::vector<double> bias;     // n_classes

  static LinearParams zeros(std::size_t k, std::size_t d) {
    return {k, d, std::vector<double>(k * d, 0.0), std::vector<double>(k, 0.0)};
  }

  std::size_t size() const { return weights.size() + bias.size(); }

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

// θ = [W (row-major), b]
inline std::vector<double> flatten(const LinearParams& p) {
  std::vector<double> theta(p.weights);
  theta.insert(theta.end(), p.bias.begin(), p.bias.end());
  return theta;
}

inline LinearParams unflatten(std::span<const double> theta, std::size_t k, std::size_t d) {
  require(theta.size() == k * d + k, ErrorKind::dimension_mismatch,
          "parameter vector of length ", theta.size(), " does not fit ", k, "x", d);
  LinearParams p;
  p.n_classes = k;
  p.n_features = d;
  p.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * d));
  p.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * d), theta.end());
  return p;
}

inline std::vector<double> softmax_scores(const LinearParams& p, std::span<const double> x) {
  require(x.size() == p.n_features, ErrorKind::dimension_mismatch, "input has ", x.size(),
          " features, model expects ", p.n_features);
  std::vector<double> z(p.n_classes);
  for (std::size_t c = 0; c < p.n_classes; ++c) {
    const double* w = p.weights.data() + c * p.n_features;
    double s = p.bias[c];
    for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
    z[c] = s;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

inline int predict_linear(const LinearParams& p, std::span<const double> x) {
  const auto s = softmax_scores(p, x);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

// L(θ) = (1/n) Σ −log softmax(W x_i + b)[y_i] + (λ/2)‖W‖².
// Fills `grad` (same layout as θ) when non-empty.
inline double logreg_objective(const LinearParams& p, const RowViews& x,
                               std::span<const int> y, double l2,
                               std::vector<double>* grad = nullptr) {
  require(!x.empty(), ErrorKind::empty_input, "logistic loss over an empty sample");
  const std::size_t k = p.n_classes, d = p.n_features;
  if (grad) grad->assign(k * d + k, 0.0);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto prob = softmax_scores(p, x[i]);
    loss -= std::log(std::max(prob[static_cast<std::size_t>(y[i])],
                              std::numeric_limits<double>::min()));
    if (!grad) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const double r = (prob[c] - (static_cast<int>(c) == y[i] ? 1.0 : 0.0)) * inv_n;
      double* g = grad->data() + c * d;
      for (std::size_t j = 0; j < d; ++j) g[j] += r * x[i][j];
      (*grad)[k * d + c] += r;
    }
  }
  loss *= inv_n;
  double reg = 0.0;
  for (std::size_t t = 0; t < k * d; ++t) {
    reg += p.weights[t] * p.weights[t];
    if (grad) (*grad)[t] += l2 * p.weights[t];
  }
  return loss + 0.5 * l2 * reg;
}

struct LogRegConfig {
  double C = 1.0;               // inverse regularization strength
  std::size_t max_iters = 500;
  double grad_tol = 1e-6;       // on the max-abs gradient entry
  std::size_t history = 10;
};

// λ = 1 / (C · n): the same minimizer as Σ cross-entropy + ‖W‖² / (2C).
inline double l2_strength(double C, std::size_t n) {
  return 1.0 / (C * static_cast<double>(n));
}

struct LogRegModel {
  LinearParams params;
  double C = 1.0;
  double l2 = 0.0;
  std::vector<double> loss_trace;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

// L-BFGS with Armijo backtracking; every accepted step lowers the loss.
inline LogRegModel train_logreg(const RowViews& x, std::span<const int> y,
                                std::size_t n_classes, const LogRegConfig& cfg,
                                const LinearParams* init = nullptr) {
  require(cfg.C > 0.0, ErrorKind::invalid_argument, "logistic regression C must be positive");
  require(n_classes >= 2, ErrorKind::invalid_argument,
          "logistic regression needs at least 2 classes");
  require(!x.empty(), ErrorKind::empty_input, "no training samples");
  require(x.size() == y.size(), ErrorKind::dimension_mismatch, x.size(), " samples but ",
          y.size(), " labels");
  const std::size_t d = x.front().size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i].size() == d, ErrorKind::dimension_mismatch, "sample ", i, " has ",
            x[i].size(), " features, expected ", d);
    for (const double v : x[i]) {
      require(std::isfinite(v), ErrorKind::invalid_argument, "sample ", i,
              " has a non-finite feature");
    }
    require(y[i] >= 0 && static_cast<std::size_t>(y[i]) < n_classes,
            ErrorKind::out_of_range, "label ", y[i], " outside 0..", n_classes - 1);
  }

  LogRegModel model;
  model.C = cfg.C;
  model.l2 = l2_strength(cfg.C, x.size());
  LinearParams p = init ? *init : LinearParams::zeros(n_classes, d);
  std::vector<double> theta = flatten(p);
  std::vector<double> grad;
  double loss = logreg_objective(p, x, y, model.l2, &grad);
  model.loss_trace.push_back(loss);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    if (detail::max_abs(grad) < cfg.grad_tol) {
      model.converged = true;
      break;
    }
    // Two-loop recursion for the search direction.
    std::vector<double> q = grad;
    std::vector<double> a(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      a[h] = rho_hist[h] * detail::dot(s_hist[h], q);
      for (std::size_t t = 0; t < q.size(); ++t) q[t] -= a[h] * y_hist[h][t];
    }
    double scale = 1.0;
    if (!s_hist.empty()) {
      scale = detail::dot(s_hist.back(), y_hist.back()) /
              detail::dot(y_hist.back(), y_hist.back());
    } else {
      scale = 1.0 / std::max(1.0, std::sqrt(detail::dot(grad, grad)));
    }
    for (auto& v : q) v *= scale;
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double b = rho_hist[h] * detail::dot(y_hist[h], q);
      for (std::size_t t = 0; t < q.size(); ++t) q[t] += s_hist[h][t] * (a[h] - b);
    }
    std::vector<double> dir(q.size());
    for (std::size_t t = 0; t < q.size(); ++t) dir[t] = -q[t];
    double slope = detail::dot(grad, dir);
    if (slope >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t t = 0; t < dir.size(); ++t) dir[t] = -grad[t];
      slope = -detail::dot(grad, grad);
    }

    double step = 1.0;
    std::vector<double> trial(theta.size()), trial_grad;
    double trial_loss = loss;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t t = 0; t < theta.size(); ++t) trial[t] = theta[t] + step * dir[t];
      trial_loss = logreg_objective(unflatten(trial, n_classes, d), x, y, model.l2, &trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || trial_loss >= loss) break;

    std::vector<double> s(theta.size()), yv(theta.size());
    for (std::size_t t = 0; t < theta.size(); ++t) {
      s[t] = trial[t] - theta[t];
      yv[t] = trial_grad[t] - grad[t];
    }
    const double sy = detail::dot(s, yv);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > cfg.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta = std::move(trial);
    grad = std::move(trial_grad);
    loss = trial_loss;
    model.loss_trace.push_back(loss);
  }
  if (!model.converged && detail::max_abs(grad) < cfg.grad_tol) model.converged = true;
  model.params = unflatten(theta, n_classes, d);
  return model;
}

inline LogRegModel train_logreg(const Dataset& d, const LogRegConfig& cfg) {
  validate(d);
  return train_logreg(row_views(d), d.labels, d.n_classes(), cfg);
}

// One full-batch gradient step on the objective above.
inline LinearParams gradient_step(const LinearParams& p, const RowViews& x,
                                  std::span<const int> y, double l2, double learning_rate) {
  std::vector<double> grad;
  logreg_objective(p, x, y, l2, &grad);
  auto theta = flatten(p);
  for (std::size_t t = 0; t < theta.size(); ++t) theta[t] -= learning_rate * grad[t];
  return unflatten(theta, p.n_classes, p.n_features);
}

}  // namespace tensorhar
