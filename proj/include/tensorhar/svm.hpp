#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/random.hpp"

namespace tensorhar {

enum class KernelType { linear, rbf };

struct SvmConfig {
  double C = 1.0;
  KernelType kernel = KernelType::linear;
  // RBF width; nullopt means "scale": 1 / (d · Var(X)) on the training data.
  std::optional<double> gamma;
  double tolerance = 1e-3;         // stop when the maximal KKT violation <= tolerance
  std::size_t max_passes = 1000;   // iteration cap = max_passes · n
  std::size_t cache_bytes = std::size_t{256} << 20;
};

inline void validate(const SvmConfig& cfg) {
  require(cfg.C > 0.0 && std::isfinite(cfg.C), ErrorKind::invalid_argument,
          "SVM C must be positive, got ", cfg.C);
  require(cfg.tolerance > 0.0, ErrorKind::invalid_argument,
          "SVM tolerance must be positive");
  require(cfg.max_passes >= 1, ErrorKind::invalid_argument,
          "SVM max_passes must be positive");
  if (cfg.gamma) {
    require(*cfg.gamma > 0.0, ErrorKind::invalid_argument, "RBF gamma must be positive");
  }
}

struct Kernel {
  KernelType type = KernelType::linear;
  double gamma = 0.0;  // resolved value, unused for linear

  double operator()(std::span<const double> a, std::span<const double> b) const {
    if (type == KernelType::linear) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::exp(-gamma * s);
  }
};

using FeatureRows = std::vector<std::vector<double>>;

// gamma = 1 / (d · Var(X)), variance over every entry of X.
inline double gamma_scale(const FeatureRows& x) {
  require(!x.empty(), ErrorKind::empty_input, "cannot compute gamma on empty data");
  const std::size_t d = x.front().size();
  double sum = 0.0, sq = 0.0;
  for (const auto& r : x) {
    for (const double v : r) {
      sum += v;
      sq += v * v;
    }
  }
  const double n = static_cast<double>(x.size() * d);
  const double var = sq / n - (sum / n) * (sum / n);
  return var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
}

// ---------------------------------------------------------------------------
// Dual solver
//
//   min_α  ½ αᵀQα − Σα    s.t.  0 ≤ α_i ≤ C_i,  Σ y_i α_i = 0,
//   Q_ij = y_i y_j K(x_i, x_j).
//
// Each iteration picks the maximal violating pair and takes the exact
// two-variable step, clipped to the box.

struct DualProblem {
  std::size_t n = 0;
  std::span<const double> y;            // ±1
  std::span<const double> upper;        // C_i
  std::function<void(std::size_t, std::span<double>)> kernel_row;  // K(i, ·)
  std::span<const double> kernel_diag;  // K(i, i)
};

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double max_violation = 0.0;
};

using DualObserver = std::function<void(std::size_t iteration, std::span<const double> alpha)>;

namespace detail {

class KernelRowCache {
 public:
  KernelRowCache(const DualProblem& p, std::size_t budget_bytes)
      : problem_(p), rows_(p.n), scratch_{std::vector<double>(p.n), std::vector<double>(p.n)} {
    const std::size_t row_bytes = std::max<std::size_t>(p.n * sizeof(double), 1);
    max_rows_ = budget_bytes / row_bytes;
  }

  // Valid until the next call with the same slot.
  std::span<const double> row(std::size_t i, int slot) {
    if (!rows_[i].empty()) return rows_[i];
    if (cached_ < max_rows_) {
      rows_[i].resize(problem_.n);
      problem_.kernel_row(i, rows_[i]);
      ++cached_;
      return rows_[i];
    }
    auto& buf = scratch_[static_cast<std::size_t>(slot)];
    problem_.kernel_row(i, buf);
    return buf;
  }

 private:
  const DualProblem& problem_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> scratch_[2];
  std::size_t max_rows_ = 0;
  std::size_t cached_ = 0;
};

}  // namespace detail

inline DualSolution solve_dual(const DualProblem& p, double tolerance,
                               std::size_t max_iterations, std::size_t cache_bytes,
                               const DualObserver& observer = {}) {
  const std::size_t n = p.n;
  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Qα − e
  detail::KernelRowCache cache(p, cache_bytes);
  auto& alpha = sol.alpha;

  const auto in_up = [&](std::size_t t) {
    return p.y[t] > 0 ? alpha[t] < p.upper[t] : alpha[t] > 0.0;
  };
  const auto in_low = [&](std::size_t t) {
    return p.y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < p.upper[t];
  };

  constexpr double kTau = 1e-12;
  while (true) {
    // Maximal violating pair: i maximizes −y G over I_up, j minimizes it over I_low.
    double m = -std::numeric_limits<double>::infinity();
    double big_m = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -p.y[t] * grad[t];
      if (in_up(t) && v > m) {
        m = v;
        i = t;
      }
      if (in_low(t) && v < big_m) {
        big_m = v;
        j = t;
      }
    }
    sol.max_violation = (i == n || j == n) ? 0.0 : m - big_m;
    if (i == n || j == n || m - big_m <= tolerance) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iterations) break;

    const auto ki = cache.row(i, 0);
    const auto kj = cache.row(j, 1);
    double curvature = p.kernel_diag[i] + p.kernel_diag[j] - 2.0 * ki[j];
    if (curvature <= 0.0) curvature = kTau;
    double step = (m - big_m) / curvature;

    // α_i += y_i·step, α_j −= y_j·step; both must stay inside their box.
    const double room_i = p.y[i] > 0 ? p.upper[i] - alpha[i] : alpha[i];
    const double room_j = p.y[j] > 0 ? alpha[j] : p.upper[j] - alpha[j];
    bool clip_i = false, clip_j = false;
    if (step >= room_i) {
      step = room_i;
      clip_i = true;
    }
    if (step >= room_j) {
      if (step > room_j) clip_i = false;
      step = room_j;
      clip_j = true;
    }

    alpha[i] += p.y[i] * step;
    alpha[j] -= p.y[j] * step;
    if (clip_i) alpha[i] = p.y[i] > 0 ? p.upper[i] : 0.0;
    if (clip_j) alpha[j] = p.y[j] > 0 ? 0.0 : p.upper[j];
    alpha[i] = std::clamp(alpha[i], 0.0, p.upper[i]);
    alpha[j] = std::clamp(alpha[j], 0.0, p.upper[j]);

    // ΔG_k = y_k · step · (K_ki − K_kj)
    for (std::size_t k = 0; k < n; ++k) grad[k] += p.y[k] * step * (ki[k] - kj[k]);

    ++sol.iterations;
    if (observer) observer(sol.iterations, alpha);
  }

  // b from free vectors; otherwise the midpoint of the feasible interval.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double v = -p.y[t] * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < p.upper[t]) {
      free_sum += v;
      ++free_count;
    } else {
      if (in_up(t)) lo = std::max(lo, v);
      if (in_low(t)) hi = std::min(hi, v);
    }
  }
  if (free_count > 0) {
    sol.bias = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lo) && std::isfinite(hi)) {
    sol.bias = (lo + hi) / 2.0;
  } else {
    sol.bias = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Binary model

struct BinarySvmModel {
  Kernel kernel;
  double C = 1.0;
  std::size_t dim = 0;
  std::vector<std::size_t> support_indices;
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> alphas;
  std::vector<int> support_labels;  // ±1
  double bias = 0.0;
  std::vector<double> weights;      // explicit w, linear kernel only
  std::size_t iterations = 0;
  bool converged = false;
};

// Σ α_i y_i k(x_i, x) + b, always through the kernel expansion.
inline double decision_value_kernel_form(const BinarySvmModel& m,
                                         std::span<const double> x) {
  require(x.size() == m.dim, ErrorKind::dimension_mismatch, "input has ", x.size(),
          " features, model expects ", m.dim);
  double s = m.bias;
  for (std::size_t k = 0; k < m.alphas.size(); ++k) {
    s += m.alphas[k] * m.support_labels[k] * m.kernel(m.support_vectors[k], x);
  }
  return s;
}

inline double decision_value(const BinarySvmModel& m, std::span<const double> x) {
  if (m.kernel.type != KernelType::linear || m.weights.empty()) {
    return decision_value_kernel_form(m, x);
  }
  require(x.size() == m.dim, ErrorKind::dimension_mismatch, "input has ", x.size(),
          " features, model expects ", m.dim);
  double s = m.bias;
  for (std::size_t k = 0; k < x.size(); ++k) s += m.weights[k] * x[k];
  return s;
}

inline int predict_sign(const BinarySvmModel& m, std::span<const double> x) {
  return decision_value(m, x) > 0.0 ? 1 : -1;
}

struct BinaryTrainOptions {
  // Per-sample multipliers of C (weighted soft margin); empty = all ones.
  std::span<const double> sample_weights;
  DualObserver observer;
};

inline BinarySvmModel train_binary_svm(const FeatureRows& x, std::span<const int> y,
                                       const SvmConfig& cfg,
                                       const BinaryTrainOptions& opts = {}) {
  validate(cfg);
  require(!x.empty(), ErrorKind::empty_input, "no training samples");
  require(x.size() == y.size(), ErrorKind::dimension_mismatch, x.size(),
          " samples but ", y.size(), " labels");
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    require(x[i].size() == dim, ErrorKind::dimension_mismatch, "sample ", i, " has ",
            x[i].size(), " features, expected ", dim);
    for (const double v : x[i]) {
      require(std::isfinite(v), ErrorKind::invalid_argument, "sample ", i,
              " has a non-finite feature");
    }
    require(y[i] == 1 || y[i] == -1, ErrorKind::invalid_argument,
            "binary labels must be +1 or -1, got ", y[i]);
    (y[i] > 0 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, ErrorKind::invalid_argument,
          "binary SVM training needs samples of both classes");

  Kernel kernel{cfg.kernel, 0.0};
  if (cfg.kernel == KernelType::rbf) kernel.gamma = cfg.gamma ? *cfg.gamma : gamma_scale(x);

  std::vector<double> yd(n), upper(n, cfg.C), diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    yd[i] = static_cast<double>(y[i]);
    diag[i] = kernel(x[i], x[i]);
  }
  if (!opts.sample_weights.empty()) {
    require(opts.sample_weights.size() == n, ErrorKind::dimension_mismatch,
            opts.sample_weights.size(), " sample weights for ", n, " samples");
    for (std::size_t i = 0; i < n; ++i) {
      require(opts.sample_weights[i] > 0.0, ErrorKind::invalid_argument,
              "sample weights must be positive");
      upper[i] = cfg.C * opts.sample_weights[i];
    }
  }

  DualProblem problem;
  problem.n = n;
  problem.y = yd;
  problem.upper = upper;
  problem.kernel_diag = diag;
  problem.kernel_row = [&](std::size_t i, std::span<double> out) {
    for (std::size_t k = 0; k < n; ++k) out[k] = kernel(x[i], x[k]);
  };
  const std::size_t max_iter = cfg.max_passes * std::max<std::size_t>(n, 1);
  auto sol = solve_dual(problem, cfg.tolerance, max_iter, cfg.cache_bytes, opts.observer);

  BinarySvmModel m;
  m.kernel = kernel;
  m.C = cfg.C;
  m.dim = dim;
  m.bias = sol.bias;
  m.iterations = sol.iterations;
  m.converged = sol.converged;
  if (kernel.type == KernelType::linear) m.weights.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.alpha[i] <= 0.0) continue;
    m.support_indices.push_back(i);
    m.support_vectors.push_back(x[i]);
    m.alphas.push_back(sol.alpha[i]);
    m.support_labels.push_back(y[i]);
    if (kernel.type == KernelType::linear) {
      const double c = sol.alpha[i] * yd[i];
      for (std::size_t k = 0; k < dim; ++k) m.weights[k] += c * x[i][k];
    }
  }
  return m;
}

// ½‖w‖² + Σ C_i · max(0, 1 − y_i f(x_i)); ‖w‖² through the kernel expansion.
inline double primal_objective(const BinarySvmModel& m, const FeatureRows& x,
                               std::span<const int> y,
                               std::span<const double> sample_weights = {}) {
  double norm2 = 0.0;
  if (m.kernel.type == KernelType::linear && !m.weights.empty()) {
    for (const double w : m.weights) norm2 += w * w;
  } else {
    for (std::size_t a = 0; a < m.alphas.size(); ++a) {
      for (std::size_t b = 0; b < m.alphas.size(); ++b) {
        norm2 += m.alphas[a] * m.alphas[b] * m.support_labels[a] * m.support_labels[b] *
                 m.kernel(m.support_vectors[a], m.support_vectors[b]);
      }
    }
  }
  double slack = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = sample_weights.empty() ? m.C : m.C * sample_weights[i];
    slack += c * std::max(0.0, 1.0 - y[i] * decision_value(m, x[i]));
  }
  return 0.5 * norm2 + slack;
}

// ---------------------------------------------------------------------------
// One-vs-one reduction, shared by the SVM and STM ensembles.

struct ClassPair {
  int positive;  // smaller class id, mapped to +1
  int negative;
};

inline std::vector<ClassPair> class_pairs(std::size_t n_classes) {
  std::vector<ClassPair> pairs;
  for (std::size_t a = 0; a < n_classes; ++a) {
    for (std::size_t b = a + 1; b < n_classes; ++b) {
      pairs.push_back({static_cast<int>(a), static_cast<int>(b)});
    }
  }
  return pairs;
}

// Majority vote over pairwise decisions (> 0 votes for the positive class).
// Ties: larger Σ|decision| over the pairs a class won, then the lower id.
inline int ovo_vote(std::span<const ClassPair> pairs, std::span<const double> decisions,
                    std::size_t n_classes, std::vector<double>* votes_out = nullptr) {
  std::vector<int> votes(n_classes, 0);
  std::vector<double> strength(n_classes, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int winner = decisions[p] > 0.0 ? pairs[p].positive : pairs[p].negative;
    ++votes[static_cast<std::size_t>(winner)];
    strength[static_cast<std::size_t>(winner)] += std::abs(decisions[p]);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < n_classes; ++c) {
    if (votes[c] > votes[best] ||
        (votes[c] == votes[best] && strength[c] > strength[best])) {
      best = c;
    }
  }
  if (votes_out) votes_out->assign(votes.begin(), votes.end());
  return static_cast<int>(best);
}

// Indices and ±1 labels of the samples belonging to one class pair.
struct PairSubset {
  std::vector<std::size_t> indices;
  std::vector<int> signs;
};

inline PairSubset pair_subset(std::span<const int> labels, ClassPair pair) {
  PairSubset s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == pair.positive || labels[i] == pair.negative) {
      s.indices.push_back(i);
      s.signs.push_back(labels[i] == pair.positive ? 1 : -1);
    }
  }
  return s;
}

inline void require_all_classes_present(const Dataset& d) {
  require(d.n_classes() >= 2, ErrorKind::invalid_argument,
          "one-vs-one training needs at least 2 classes");
  const auto counts = d.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] > 0, ErrorKind::invalid_argument, "class ", c, " ('",
            d.label_map.name(static_cast<int>(c)), "') has no training samples");
  }
}

struct OvoEnsemble {
  std::size_t n_classes = 0;
  std::vector<ClassPair> pairs;
  std::vector<BinarySvmModel> models;
};

inline OvoEnsemble train_ovo(const Dataset& data, const SvmConfig& cfg, int jobs = 1) {
  validate(data);
  require_all_classes_present(data);
  OvoEnsemble e;
  e.n_classes = data.n_classes();
  e.pairs = class_pairs(e.n_classes);
  e.models.resize(e.pairs.size());
  parallel_for(e.pairs.size(), jobs, [&](std::size_t p) {
    const auto subset = pair_subset(data.labels, e.pairs[p]);
    FeatureRows rows;
    rows.reserve(subset.indices.size());
    for (const auto i : subset.indices) {
      const auto v = data.samples[i].values();
      rows.emplace_back(v.begin(), v.end());
    }
    e.models[p] = train_binary_svm(rows, subset.signs, cfg);
  });
  return e;
}

inline std::vector<double> pairwise_decisions(const OvoEnsemble& e,
                                              std::span<const double> x) {
  std::vector<double> d(e.models.size());
  for (std::size_t p = 0; p < e.models.size(); ++p) d[p] = decision_value(e.models[p], x);
  return d;
}

inline int predict_ovo(const OvoEnsemble& e, std::span<const double> x) {
  const auto d = pairwise_decisions(e, x);
  return ovo_vote(e.pairs, d, e.n_classes);
}

}  // namespace tensorhar
