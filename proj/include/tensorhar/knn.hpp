#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/tensor.hpp"

namespace tensorhar {

enum class KnnMetric { euclidean, tensor };

struct KnnConfig {
  std::size_t k = 5;
  KnnMetric metric = KnnMetric::euclidean;
  double sigma2 = 1.0;  // tensor metric only
};

struct KnnModel {
  KnnConfig config;
  std::vector<Tensor> samples;
  std::vector<int> labels;
  std::size_t n_classes = 0;
};

inline KnnModel train_knn(const Dataset& d, const KnnConfig& cfg) {
  validate(d);
  require(!d.empty(), ErrorKind::empty_input, "k-NN needs at least one training sample");
  require(cfg.k >= 1 && cfg.k <= d.size(), ErrorKind::invalid_argument, "k = ", cfg.k,
          " must be between 1 and the training size ", d.size());
  if (cfg.metric == KnnMetric::tensor) check_sigma2(cfg.sigma2);
  return KnnModel{cfg, d.samples, d.labels, d.n_classes()};
}

inline double knn_distance(const KnnModel& m, const Tensor& a, const Tensor& b) {
  if (m.config.metric == KnnMetric::tensor) return tensor_distance(a, b, m.config.sigma2);
  require(a.shape() == b.shape(), ErrorKind::dimension_mismatch, "query shape ",
          shape_string(a.shape()), " differs from training shape ", shape_string(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct KnnVote {
  int label = 0;
  std::vector<double> fractions;  // share of the k neighbours per class
};

// Majority among the k nearest (distance ties resolved by training index);
// vote ties go to the smaller mean distance, then the lower class id.
inline KnnVote knn_vote(const KnnModel& m, const Tensor& x) {
  require(!m.samples.empty(), ErrorKind::empty_input, "k-NN model is empty");
  std::vector<std::pair<double, std::size_t>> dist(m.samples.size());
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    dist[i] = {knn_distance(m, x, m.samples[i]), i};
  }
  const std::size_t k = std::min(m.config.k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<std::size_t> votes(m.n_classes, 0);
  std::vector<double> dist_sum(m.n_classes, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const auto c = static_cast<std::size_t>(m.labels[dist[r].second]);
    ++votes[c];
    dist_sum[c] += dist[r].first;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.n_classes; ++c) {
    if (votes[c] > votes[best]) {
      best = c;
    } else if (votes[c] == votes[best] && votes[c] > 0 &&
               dist_sum[c] / votes[c] < dist_sum[best] / votes[best]) {
      best = c;
    }
  }
  KnnVote out;
  out.label = static_cast<int>(best);
  out.fractions.resize(m.n_classes);
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    out.fractions[c] = static_cast<double>(votes[c]) / static_cast<double>(k);
  }
  return out;
}

inline int predict_knn(const KnnModel& m, const Tensor& x) { return knn_vote(m, x).label; }

}  // namespace tensorhar
