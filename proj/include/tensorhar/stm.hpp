#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/random.hpp"
#include "tensorhar/svm.hpp"
#include "tensorhar/tensor.hpp"

namespace tensorhar {

// Support Tensor Machine: f(X) = X ×_1 w^(1) ×_2 … ×_N w^(N) + b.
//
// Training alternates over modes. With every w^(k), k ≠ n, fixed, the
// contracted samples x̂_i = X_i ∏_{k≠n} ×_k w^(k) turn the problem into
//
//   min ½ γ ‖w^(n)‖² + Σ C_i ξ_i,   γ = ∏_{k≠n} ‖w^(k)‖²,
//
// which is a standard soft-margin SVM with C'_i = C_i / γ.

enum class StmWeighting {
  none,      // plain STM
  distance,  // s_i = exp(−d_i² / 2σ_w²), d_i = tensor distance to the class mean
  explicit_, // caller-provided per-sample weights
};

struct StmConfig {
  double C = 1.0;
  std::size_t max_outer_iters = 50;
  double convergence_tol = 1e-4;
  double inner_tolerance = 1e-3;
  std::size_t inner_max_passes = 1000;
  StmWeighting weighting = StmWeighting::none;
  std::vector<double> sample_weights;  // explicit_ only, one per training sample
  double distance_sigma2 = 1.0;        // σ² of the tensor distance used for weights
};

inline void validate(const StmConfig& cfg) {
  require(cfg.C > 0.0 && std::isfinite(cfg.C), ErrorKind::invalid_argument,
          "STM C must be positive, got ", cfg.C);
  require(cfg.max_outer_iters >= 1, ErrorKind::invalid_argument,
          "STM max_outer_iters must be positive");
  require(cfg.convergence_tol > 0.0, ErrorKind::invalid_argument,
          "STM convergence_tol must be positive");
  for (const double w : cfg.sample_weights) {
    require(w > 0.0, ErrorKind::invalid_argument, "STM sample weights must be positive");
  }
}

struct StmBinaryModel {
  Shape shape;
  std::vector<std::vector<double>> modes;  // w^(n), length I_n
  double bias = 0.0;
  std::size_t last_mode = 0;               // mode optimized last
  std::vector<double> gamma_trace;         // γ used by every mode subproblem
  std::vector<double> objective_trace;     // pooled objective after every subproblem
  std::vector<std::string> events;
  std::size_t outer_iterations = 0;
  bool converged = false;
};

// x̂ = X ∏_{k≠n} ×_k w^(k), a vector of length I_n.
inline std::vector<double> contract_except(const Tensor& x,
                                           std::span<const std::vector<double>> modes,
                                           std::size_t n) {
  require(modes.size() == x.order(), ErrorKind::dimension_mismatch, "model has ",
          modes.size(), " mode vectors, tensor has order ", x.order());
  require(n < x.order(), ErrorKind::out_of_range, "mode ", n,
          " out of range for tensor of order ", x.order());
  Tensor cur = x;
  // Highest modes first so the remaining indices keep their positions.
  for (std::size_t k = x.order(); k-- > 0;) {
    if (k == n) continue;
    cur = mode_product(cur, std::span<const double>(modes[k]), k);
  }
  return std::vector<double>(cur.values().begin(), cur.values().end());
}

inline std::vector<double> contract_except(const Tensor& x, const StmBinaryModel& m,
                                           std::size_t n) {
  require(x.shape() == m.shape, ErrorKind::dimension_mismatch, "tensor shape ",
          shape_string(x.shape()), " does not match model shape ", shape_string(m.shape));
  return contract_except(x, std::span<const std::vector<double>>(m.modes), n);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Full contraction plus bias.
inline double stm_decision(const StmBinaryModel& m, const Tensor& x) {
  const auto xhat = contract_except(x, m, m.last_mode);
  return dot(xhat, m.modes[m.last_mode]) + m.bias;
}

struct StmPrediction {
  int label = 1;         // ±1
  double decision = 0.0; // f(X)
  double margin = 0.0;   // |f(X)| / ‖w^(last)‖
};

inline StmPrediction predict_stm(const StmBinaryModel& m, const Tensor& x) {
  StmPrediction p;
  p.decision = stm_decision(m, x);
  p.label = p.decision > 0.0 ? 1 : -1;
  const double norm = frobenius_norm(std::span<const double>(m.modes[m.last_mode]));
  p.margin = norm > 0.0 ? std::abs(p.decision) / norm : 0.0;
  return p;
}

inline double weight_tensor_norm2(std::span<const std::vector<double>> modes) {
  double prod = 1.0;
  for (const auto& w : modes) {
    const double n = frobenius_norm(std::span<const double>(w));
    prod *= n * n;
  }
  return prod;
}

// ½ ∏‖w^(n)‖² + Σ C_i max(0, 1 − y_i f(X_i)).
inline double stm_objective(const StmBinaryModel& m, std::span<const Tensor> xs,
                            std::span<const int> y, double C,
                            std::span<const double> sample_weights = {}) {
  double slack = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = sample_weights.empty() ? C : C * sample_weights[i];
    slack += c * std::max(0.0, 1.0 - y[i] * stm_decision(m, xs[i]));
  }
  return 0.5 * weight_tensor_norm2(m.modes) + slack;
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

}  // namespace detail

// Outlier down-weighting: samples far (in tensor distance) from their class
// mean receive smaller penalties. σ_w is the median distance.
inline std::vector<double> distance_based_weights(std::span<const Tensor> xs,
                                                  std::span<const int> y, double sigma2) {
  require(!xs.empty(), ErrorKind::empty_input, "no samples to weight");
  const Shape shape = xs.front().shape();
  std::vector<int> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<double> dist(xs.size(), 0.0);
  for (const int c : classes) {
    Tensor mean(shape);
    std::size_t count = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (y[i] != c) continue;
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += xs[i][k];
      ++count;
    }
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] /= static_cast<double>(count);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (y[i] == c) dist[i] = tensor_distance(xs[i], mean, sigma2);
    }
  }
  const double sigma_w = detail::median(dist);
  std::vector<double> s(xs.size(), 1.0);
  if (sigma_w <= 0.0) return s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s[i] = std::exp(-dist[i] * dist[i] / (2.0 * sigma_w * sigma_w));
    // Keep every weight strictly positive for the box constraints.
    s[i] = std::max(s[i], 1e-12);
  }
  return s;
}

inline StmBinaryModel train_stm_binary(std::span<const Tensor> xs, std::span<const int> y,
                                       const StmConfig& cfg) {
  validate(cfg);
  require(!xs.empty(), ErrorKind::empty_input, "no training tensors");
  require(xs.size() == y.size(), ErrorKind::dimension_mismatch, xs.size(),
          " tensors but ", y.size(), " labels");
  const Shape shape = xs.front().shape();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i].shape() == shape, ErrorKind::dimension_mismatch, "tensor ", i,
            " has shape ", shape_string(xs[i].shape()), ", expected ", shape_string(shape));
  }
  const std::size_t order = shape.size();

  std::vector<double> weights;
  switch (cfg.weighting) {
    case StmWeighting::none:
      break;
    case StmWeighting::distance:
      weights = distance_based_weights(xs, y, cfg.distance_sigma2);
      break;
    case StmWeighting::explicit_:
      require(cfg.sample_weights.size() == xs.size(), ErrorKind::dimension_mismatch,
              cfg.sample_weights.size(), " sample weights for ", xs.size(), " tensors");
      weights = cfg.sample_weights;
      break;
  }

  StmBinaryModel m;
  m.shape = shape;
  m.last_mode = order - 1;
  for (std::size_t n = 0; n < order; ++n) {
    m.modes.emplace_back(shape[n], 1.0 / std::sqrt(static_cast<double>(shape[n])));
  }
  double current = stm_objective(m, xs, y, cfg.C, weights);

  SvmConfig inner;
  inner.kernel = KernelType::linear;
  inner.tolerance = cfg.inner_tolerance;
  inner.max_passes = cfg.inner_max_passes;

  for (std::size_t outer = 1; outer <= cfg.max_outer_iters; ++outer) {
    m.outer_iterations = outer;
    const auto previous = m.modes;
    for (std::size_t n = 0; n < order; ++n) {
      double gamma = 1.0;
      for (std::size_t k = 0; k < order; ++k) {
        if (k == n) continue;
        const double norm = frobenius_norm(std::span<const double>(m.modes[k]));
        if (norm == 0.0) {
          m.modes[k].assign(shape[k], 1.0 / std::sqrt(static_cast<double>(shape[k])));
          m.events.push_back("outer " + std::to_string(outer) + ": mode " +
                             std::to_string(k) + " was zero, reinitialized to a uniform unit vector");
          current = stm_objective(m, xs, y, cfg.C, weights);
        } else {
          gamma *= norm * norm;
        }
      }
      m.gamma_trace.push_back(gamma);

      FeatureRows xhat;
      xhat.reserve(xs.size());
      for (const auto& x : xs) {
        xhat.push_back(contract_except(x, std::span<const std::vector<double>>(m.modes), n));
      }
      inner.C = cfg.C / gamma;
      BinaryTrainOptions opts;
      opts.sample_weights = weights;
      const auto sub = train_binary_svm(xhat, y, inner, opts);

      StmBinaryModel candidate = m;
      candidate.modes[n] = sub.weights;
      candidate.bias = sub.bias;
      const double obj = stm_objective(candidate, xs, y, cfg.C, weights);
      // The current point is feasible for this subproblem, so an exact solve
      // can't be worse; an inexact one that is gets discarded.
      if (obj <= current) {
        m.modes[n] = std::move(candidate.modes[n]);
        m.bias = candidate.bias;
        current = obj;
      }
      m.objective_trace.push_back(current);
    }

    // Gauge: unit norm on every mode but the last, which absorbs the scale.
    for (std::size_t n = 0; n + 1 < order; ++n) {
      const double norm = frobenius_norm(std::span<const double>(m.modes[n]));
      if (norm == 0.0) continue;
      for (auto& v : m.modes[n]) v /= norm;
      for (auto& v : m.modes[order - 1]) v *= norm;
    }

    double change = 0.0;
    for (std::size_t n = 0; n < order; ++n) {
      double diff = 0.0;
      for (std::size_t k = 0; k < shape[n]; ++k) {
        const double d = m.modes[n][k] - previous[n][k];
        diff += d * d;
      }
      const double base = frobenius_norm(std::span<const double>(previous[n]));
      change = std::max(change, base > 0.0 ? std::sqrt(diff) / base : std::sqrt(diff));
    }
    if (change < cfg.convergence_tol || order == 1) {
      m.converged = true;
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// One-vs-one STM ensemble

struct StmEnsemble {
  std::size_t n_classes = 0;
  std::vector<ClassPair> pairs;
  std::vector<StmBinaryModel> models;
};

inline StmEnsemble train_stm_ovo(const Dataset& data, const StmConfig& cfg, int jobs = 1) {
  validate(data);
  validate(cfg);
  require_all_classes_present(data);
  if (cfg.weighting == StmWeighting::explicit_) {
    require(cfg.sample_weights.size() == data.size(), ErrorKind::dimension_mismatch,
            cfg.sample_weights.size(), " sample weights for ", data.size(), " samples");
  }
  StmEnsemble e;
  e.n_classes = data.n_classes();
  e.pairs = class_pairs(e.n_classes);
  e.models.resize(e.pairs.size());
  parallel_for(e.pairs.size(), jobs, [&](std::size_t p) {
    const auto subset = pair_subset(data.labels, e.pairs[p]);
    std::vector<Tensor> xs;
    xs.reserve(subset.indices.size());
    StmConfig pair_cfg = cfg;
    pair_cfg.sample_weights.clear();
    for (const auto i : subset.indices) {
      xs.push_back(data.samples[i]);
      if (cfg.weighting == StmWeighting::explicit_) {
        pair_cfg.sample_weights.push_back(cfg.sample_weights[i]);
      }
    }
    e.models[p] = train_stm_binary(xs, subset.signs, pair_cfg);
  });
  return e;
}

inline std::vector<double> pairwise_decisions(const StmEnsemble& e, const Tensor& x) {
  std::vector<double> d(e.models.size());
  for (std::size_t p = 0; p < e.models.size(); ++p) d[p] = stm_decision(e.models[p], x);
  return d;
}

inline int predict_stm_ovo(const StmEnsemble& e, const Tensor& x) {
  const auto d = pairwise_decisions(e, x);
  return ovo_vote(e.pairs, d, e.n_classes);
}

}  // namespace tensorhar
