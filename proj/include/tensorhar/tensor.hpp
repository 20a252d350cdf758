#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "tensorhar/error.hpp"

namespace tensorhar {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Dense N-order array stored row-major (last index fastest). Modes are
// addressed 0-based. An order-1 tensor doubles as a plain vector, and a
// fully contracted tensor is represented with shape {1}.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : shape_{1}, data_(1, T{}) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), T{});
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    require(data_.size() == shape_size(shape_), ErrorKind::dimension_mismatch,
            "tensor data length ", data_.size(), " does not match shape ",
            shape_string(shape_), " (", shape_size(shape_), " elements)");
  }

  static BasicTensor vector(std::vector<T> values) {
    Shape shape{values.size()};
    return BasicTensor(std::move(shape), std::move(values));
  }

  std::size_t order() const noexcept { return shape_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  const T& operator[](std::size_t flat) const { return data_[flat]; }
  T& operator[](std::size_t flat) { return data_[flat]; }

  const T& at(std::span<const std::size_t> index) const {
    return data_[flat_index(index)];
  }
  T& at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }

  std::size_t flat_index(std::span<const std::size_t> index) const {
    require(index.size() == shape_.size(), ErrorKind::dimension_mismatch,
            "index has ", index.size(), " coordinates, tensor order is ",
            shape_.size());
    std::size_t flat = 0;
    for (std::size_t n = 0; n < shape_.size(); ++n) {
      require(index[n] < shape_[n], ErrorKind::out_of_range, "coordinate ",
              index[n], " out of range for mode ", n, " of extent ", shape_[n]);
      flat = flat * shape_[n] + index[n];
    }
    return flat;
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void validate_shape() const {
    require(!shape_.empty(), ErrorKind::invalid_argument,
            "tensor order must be at least 1");
    for (std::size_t n = 0; n < shape_.size(); ++n) {
      require(shape_[n] >= 1, ErrorKind::invalid_argument, "extent of mode ", n,
              " must be positive");
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;

// Row-major flat index -> multi-index.
inline std::vector<std::size_t> unflatten(std::size_t flat, const Shape& shape) {
  require(flat < shape_size(shape), ErrorKind::out_of_range, "flat index ", flat,
          " out of range for shape ", shape_string(shape));
  std::vector<std::size_t> index(shape.size());
  for (std::size_t n = shape.size(); n-- > 0;) {
    index[n] = flat % shape[n];
    flat /= shape[n];
  }
  return index;
}

// x ×_mode w: contracts `mode` against w and drops it from the shape.
template <typename T>
BasicTensor<T> mode_product(const BasicTensor<T>& x, std::span<const T> w,
                            std::size_t mode) {
  require(mode < x.order(), ErrorKind::out_of_range, "mode ", mode,
          " out of range for tensor of order ", x.order());
  const std::size_t extent = x.extent(mode);
  require(w.size() == extent, ErrorKind::dimension_mismatch, "mode ", mode,
          " has extent ", extent, " but the vector has length ", w.size());

  const auto& shape = x.shape();
  std::size_t outer = 1;
  for (std::size_t n = 0; n < mode; ++n) outer *= shape[n];
  std::size_t inner = 1;
  for (std::size_t n = mode + 1; n < shape.size(); ++n) inner *= shape[n];

  Shape out_shape;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (n != mode) out_shape.push_back(shape[n]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<T> out(outer * inner, T{});
  const auto src = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    T* dst = out.data() + o * inner;
    const T* block = src.data() + o * extent * inner;
    for (std::size_t k = 0; k < extent; ++k) {
      const T wk = w[k];
      const T* row = block + k * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += wk * row[i];
    }
  }
  return BasicTensor<T>(std::move(out_shape), std::move(out));
}

template <typename T>
BasicTensor<T> mode_product(const BasicTensor<T>& x, const std::vector<T>& w,
                            std::size_t mode) {
  return mode_product(x, std::span<const T>(w), mode);
}

// Mode-n product with a square matrix (row-major, extent x extent); keeps the
// shape. Used by the separable tensor-distance path.
template <typename T>
BasicTensor<T> mode_matrix_product(const BasicTensor<T>& x, std::span<const T> m,
                                   std::size_t mode) {
  const std::size_t extent = x.extent(mode);
  require(m.size() == extent * extent, ErrorKind::dimension_mismatch,
          "mode ", mode, " matrix must be ", extent, "x", extent);
  const auto& shape = x.shape();
  std::size_t outer = 1;
  for (std::size_t n = 0; n < mode; ++n) outer *= shape[n];
  std::size_t inner = 1;
  for (std::size_t n = mode + 1; n < shape.size(); ++n) inner *= shape[n];

  std::vector<T> out(x.size(), T{});
  const auto src = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    const T* block = src.data() + o * extent * inner;
    T* dst_block = out.data() + o * extent * inner;
    for (std::size_t r = 0; r < extent; ++r) {
      T* dst = dst_block + r * inner;
      for (std::size_t k = 0; k < extent; ++k) {
        const T mk = m[r * extent + k];
        if (mk == T{}) continue;
        const T* row = block + k * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += mk * row[i];
      }
    }
  }
  return BasicTensor<T>(shape, std::move(out));
}

template <typename T>
T frobenius_norm(const BasicTensor<T>& x) {
  T sum{};
  for (const T v : x.values()) sum += v * v;
  return std::sqrt(sum);
}

template <typename T>
T frobenius_norm(std::span<const T> x) {
  T sum{};
  for (const T v : x) sum += v * v;
  return std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// Tensor distance.
//
// G_lm = 1/(2πσ²) · exp(−‖p_l − p_m‖² / (2σ²)), where p_l is the multi-index of
// flat position l and ‖·‖ is the Euclidean distance between multi-indices.
// D(x, y) = sqrt((x − y)ᵀ G (x − y)).

inline constexpr std::size_t kMetricMaterializeCap = 4096;

inline double squared_location_distance(std::size_t l, std::size_t m,
                                        const Shape& shape) {
  const std::size_t total = shape_size(shape);
  require(l < total && m < total, ErrorKind::out_of_range, "flat indices (", l,
          ", ", m, ") out of range for shape ", shape_string(shape));
  double sum = 0.0;
  for (std::size_t n = shape.size(); n-- > 0;) {
    const double d = static_cast<double>(l % shape[n]) -
                     static_cast<double>(m % shape[n]);
    sum += d * d;
    l /= shape[n];
    m /= shape[n];
  }
  return sum;
}

inline double location_distance(std::size_t l, std::size_t m, const Shape& shape) {
  return std::sqrt(squared_location_distance(l, m, shape));
}

inline void check_sigma2(double sigma2) {
  require(sigma2 > 0.0 && std::isfinite(sigma2), ErrorKind::invalid_argument,
          "sigma2 must be a positive finite number, got ", sigma2);
}

inline double metric_diagonal(double sigma2) {
  return 1.0 / (2.0 * std::numbers::pi * sigma2);
}

struct MetricCoefficients {
  double sigma2 = 1.0;
  Shape shape;
  std::size_t dim = 0;
  std::vector<double> values;  // dim x dim, row-major

  double operator()(std::size_t l, std::size_t m) const {
    return values[l * dim + m];
  }
};

inline MetricCoefficients metric_coefficients(const Shape& shape, double sigma2,
                                              std::size_t cap = kMetricMaterializeCap) {
  check_sigma2(sigma2);
  const std::size_t dim = shape_size(shape);
  require(dim <= cap, ErrorKind::invalid_argument, "shape ", shape_string(shape),
          " has ", dim, " elements, above the materialization cap of ", cap,
          "; use tensor_distance_streaming instead");
  MetricCoefficients g{sigma2, shape, dim, std::vector<double>(dim * dim)};
  const double scale = metric_diagonal(sigma2);
  for (std::size_t l = 0; l < dim; ++l) {
    g.values[l * dim + l] = scale;
    for (std::size_t m = l + 1; m < dim; ++m) {
      const double v =
          scale * std::exp(-squared_location_distance(l, m, shape) / (2.0 * sigma2));
      g.values[l * dim + m] = v;
      g.values[m * dim + l] = v;
    }
  }
  return g;
}

namespace detail {

inline void check_same_shape(const Tensor& x, const Tensor& y) {
  require(x.shape() == y.shape(), ErrorKind::dimension_mismatch,
          "tensor distance needs equal shapes, got ", shape_string(x.shape()),
          " and ", shape_string(y.shape()));
}

// Tiny negative radicands are round-off; |dᵀGd| <= G_diag · ‖d‖₁².
inline double finish_distance(double radicand, double diag, double l1) {
  const double slack = 1e-12 * std::max(1.0, diag * l1 * l1);
  if (radicand < 0.0) {
    require(radicand >= -slack, ErrorKind::invalid_argument,
            "tensor distance radicand ", radicand, " is negative beyond round-off");
    return 0.0;
  }
  return std::sqrt(radicand);
}

inline std::vector<double> difference(const Tensor& x, const Tensor& y, double& l1) {
  std::vector<double> d(x.size());
  l1 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = x[i] - y[i];
    l1 += std::abs(d[i]);
  }
  return d;
}

}  // namespace detail

inline double tensor_distance(const Tensor& x, const Tensor& y,
                              const MetricCoefficients& g) {
  detail::check_same_shape(x, y);
  require(x.shape() == g.shape, ErrorKind::dimension_mismatch,
          "metric coefficients were built for shape ", shape_string(g.shape),
          ", tensors have shape ", shape_string(x.shape()));
  double l1 = 0.0;
  const auto d = detail::difference(x, y, l1);
  double sum = 0.0;
  for (std::size_t l = 0; l < g.dim; ++l) {
    if (d[l] == 0.0) continue;
    const double* row = g.values.data() + l * g.dim;
    double acc = 0.0;
    for (std::size_t m = 0; m < g.dim; ++m) acc += row[m] * d[m];
    sum += d[l] * acc;
  }
  return detail::finish_distance(sum, metric_diagonal(g.sigma2), l1);
}

// Materializes G for this call. Subject to the size cap.
inline double tensor_distance_materialized(const Tensor& x, const Tensor& y,
                                           double sigma2) {
  detail::check_same_shape(x, y);
  return tensor_distance(x, y, metric_coefficients(x.shape(), sigma2));
}

// Double loop over (l, m) computing G_lm on the fly; O(P²) time, O(P) memory.
inline double tensor_distance_streaming(const Tensor& x, const Tensor& y,
                                        double sigma2) {
  check_sigma2(sigma2);
  detail::check_same_shape(x, y);
  double l1 = 0.0;
  const auto d = detail::difference(x, y, l1);
  const auto& shape = x.shape();
  const double scale = metric_diagonal(sigma2);
  double sum = 0.0;
  for (std::size_t l = 0; l < d.size(); ++l) {
    if (d[l] == 0.0) continue;
    double acc = 0.0;
    for (std::size_t m = 0; m < d.size(); ++m) {
      if (d[m] == 0.0) continue;
      acc += std::exp(-squared_location_distance(l, m, shape) / (2.0 * sigma2)) * d[m];
    }
    sum += d[l] * acc;
  }
  return detail::finish_distance(scale * sum, scale, l1);
}

// The Gaussian of a sum of squared coordinate offsets factors over modes, so
// G = c · K_1 ⊗ … ⊗ K_N with K_n(i, i') = exp(−(i − i')² / 2σ²). Applying the
// factors one mode at a time costs O(P · Σ I_n).
inline double tensor_distance_separable(const Tensor& x, const Tensor& y,
                                        double sigma2) {
  check_sigma2(sigma2);
  detail::check_same_shape(x, y);
  double l1 = 0.0;
  auto d = detail::difference(x, y, l1);
  const Tensor diff(x.shape(), d);
  Tensor gd = diff;
  for (std::size_t n = 0; n < x.order(); ++n) {
    const std::size_t extent = x.extent(n);
    std::vector<double> k(extent * extent);
    for (std::size_t i = 0; i < extent; ++i) {
      for (std::size_t j = 0; j < extent; ++j) {
        const double off = static_cast<double>(i) - static_cast<double>(j);
        k[i * extent + j] = std::exp(-off * off / (2.0 * sigma2));
      }
    }
    gd = mode_matrix_product(gd, std::span<const double>(k), n);
  }
  const double scale = metric_diagonal(sigma2);
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) sum += d[i] * gd[i];
  return detail::finish_distance(scale * sum, scale, l1);
}

// Default entry point; exact for every shape and cheap on large windows.
inline double tensor_distance(const Tensor& x, const Tensor& y, double sigma2 = 1.0) {
  return tensor_distance_separable(x, y, sigma2);
}

}  // namespace tensorhar
