#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tensorhar/error.hpp"
#include "tensorhar/tensor.hpp"

namespace tensorhar {

// ---------------------------------------------------------------------------
// Filters

// Trailing mean: out[t] = mean(series[max(0, t-width+1) .. t]).
inline std::vector<double> moving_average(std::span<const double> series,
                                          std::size_t width) {
  require(width >= 1, ErrorKind::invalid_argument,
          "moving average width must be at least 1");
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    const std::size_t lo = t + 1 >= width ? t + 1 - width : 0;
    double sum = 0.0;
    for (std::size_t i = lo; i <= t; ++i) sum += series[i];
    out[t] = sum / static_cast<double>(t - lo + 1);
  }
  return out;
}

struct KalmanConfig {
  double process_variance = 1e-3;      // Q
  double measurement_variance = 1e-2;  // R
  double initial_estimate = 0.0;
  double initial_variance = 1.0;
};

struct KalmanTrace {
  std::vector<double> estimate;
  std::vector<double> variance;  // posterior P after each update
};

inline void validate(const KalmanConfig& cfg) {
  require(cfg.process_variance > 0.0, ErrorKind::invalid_argument,
          "Kalman process variance Q must be positive");
  require(cfg.measurement_variance > 0.0, ErrorKind::invalid_argument,
          "Kalman measurement variance R must be positive");
  require(cfg.initial_variance > 0.0, ErrorKind::invalid_argument,
          "Kalman initial variance must be positive");
}

// Scalar random-walk Kalman filter.
inline KalmanTrace kalman_1d_trace(std::span<const double> series,
                                   const KalmanConfig& cfg) {
  validate(cfg);
  KalmanTrace trace;
  trace.estimate.reserve(series.size());
  trace.variance.reserve(series.size());
  double x = cfg.initial_estimate;
  double p = cfg.initial_variance;
  for (const double z : series) {
    const double p_prior = p + cfg.process_variance;
    const double gain = p_prior / (p_prior + cfg.measurement_variance);
    x += gain * (z - x);
    p = (1.0 - gain) * p_prior;
    trace.estimate.push_back(x);
    trace.variance.push_back(p);
  }
  return trace;
}

inline std::vector<double> kalman_1d(std::span<const double> series,
                                     const KalmanConfig& cfg) {
  return kalman_1d_trace(series, cfg).estimate;
}

// Fixed point of P = (P + Q) R / (P + Q + R).
inline double kalman_steady_state_variance(const KalmanConfig& cfg) {
  const double q = cfg.process_variance;
  const double r = cfg.measurement_variance;
  return (-q + std::sqrt(q * q + 4.0 * q * r)) / 2.0;
}

// Filters run in order: moving average, then Kalman.
struct FilterConfig {
  std::optional<std::size_t> moving_average_width;
  std::optional<KalmanConfig> kalman;
};

inline std::vector<double> apply_filters(std::span<const double> series,
                                         const FilterConfig& cfg) {
  std::vector<double> out(series.begin(), series.end());
  if (cfg.moving_average_width) out = moving_average(out, *cfg.moving_average_width);
  if (cfg.kalman) {
    out = kalman_1d(out, *cfg.kalman);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizerRecord {
  std::vector<double> mean;
  std::vector<double> scale;  // std, or 1 where the feature is constant

  std::size_t dim() const { return mean.size(); }
};

inline constexpr double kDegenerateStd = 1e-12;

inline StandardizerRecord fit_standardizer(std::span<const std::span<const double>> rows) {
  require(!rows.empty(), ErrorKind::empty_input,
          "cannot standardize an empty collection");
  const std::size_t dim = rows.front().size();
  StandardizerRecord rec{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& r : rows) {
    require(r.size() == dim, ErrorKind::dimension_mismatch,
            "feature vectors differ in length: ", r.size(), " vs ", dim);
    for (std::size_t j = 0; j < dim; ++j) rec.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : rec.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = r[j] - rec.mean[j];
      rec.scale[j] += d * d;
    }
  }
  for (auto& s : rec.scale) {
    s = std::sqrt(s / n);
    if (s < kDegenerateStd) s = 1.0;
  }
  return rec;
}

inline StandardizerRecord fit_standardizer(const std::vector<std::vector<double>>& rows) {
  std::vector<std::span<const double>> views(rows.begin(), rows.end());
  return fit_standardizer(std::span<const std::span<const double>>(views));
}

inline void standardize_in_place(std::span<double> row, const StandardizerRecord& rec) {
  require(row.size() == rec.dim(), ErrorKind::dimension_mismatch,
          "vector of length ", row.size(), " does not match standardizer of length ",
          rec.dim());
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = (row[j] - rec.mean[j]) / rec.scale[j];
  }
}

inline std::vector<double> standardize(std::span<const double> row,
                                       const StandardizerRecord& rec) {
  std::vector<double> out(row.begin(), row.end());
  standardize_in_place(out, rec);
  return out;
}

inline std::vector<double> destandardize(std::span<const double> row,
                                         const StandardizerRecord& rec) {
  require(row.size() == rec.dim(), ErrorKind::dimension_mismatch,
          "vector length does not match standardizer");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = row[j] * rec.scale[j] + rec.mean[j];
  }
  return out;
}

struct StandardizeResult {
  std::vector<std::vector<double>> rows;
  StandardizerRecord record;
};

inline StandardizeResult standardize(const std::vector<std::vector<double>>& rows) {
  StandardizeResult out{{}, fit_standardizer(rows)};
  out.rows.reserve(rows.size());
  for (const auto& r : rows) out.rows.push_back(standardize(r, out.record));
  return out;
}

// ---------------------------------------------------------------------------
// Streams and windows

struct SampleStream {
  std::vector<double> timestamps;
  std::vector<std::string> channel_names;          // e.g. ax, ay, az, gx, gy, gz
  std::vector<std::vector<double>> channels;       // one series per name
  std::optional<std::vector<int>> labels;          // per-timestep class id

  std::size_t length() const { return timestamps.size(); }
};

inline void validate(const SampleStream& s) {
  require(s.channel_names.size() == s.channels.size(), ErrorKind::invalid_argument,
          "stream has ", s.channel_names.size(), " channel names for ",
          s.channels.size(), " series");
  for (const char* axis : {"ax", "ay", "az"}) {
    require(std::find(s.channel_names.begin(), s.channel_names.end(), axis) !=
                s.channel_names.end(),
            ErrorKind::invalid_argument, "stream is missing accelerometer channel ",
            axis);
  }
  for (std::size_t c = 0; c < s.channels.size(); ++c) {
    require(s.channels[c].size() == s.length(), ErrorKind::dimension_mismatch,
            "channel ", s.channel_names[c], " has ", s.channels[c].size(),
            " samples, timestamps have ", s.length());
  }
  if (s.labels) {
    require(s.labels->size() == s.length(), ErrorKind::dimension_mismatch,
            "label track length ", s.labels->size(), " differs from stream length ",
            s.length());
  }
  for (std::size_t t = 1; t < s.timestamps.size(); ++t) {
    require(s.timestamps[t] >= s.timestamps[t - 1], ErrorKind::invalid_argument,
            "timestamps decrease at row ", t);
  }
}

inline SampleStream filter_stream(SampleStream s, const FilterConfig& cfg) {
  for (auto& ch : s.channels) ch = apply_filters(ch, cfg);
  return s;
}

enum class WindowLabeling { majority, strict };

struct Window {
  Tensor values;  // (T, C)
  int label = -1;
  int subject = 0;
  std::size_t start = 0;
};

struct WindowConfig {
  std::size_t length = 128;
  std::size_t stride = 64;
  WindowLabeling labeling = WindowLabeling::strict;
};

struct WindowResult {
  std::vector<Window> windows;
  std::size_t dropped = 0;  // windows rejected by strict labeling
};

inline std::size_t window_count(std::size_t len, std::size_t length, std::size_t stride) {
  return len < length ? 0 : (len - length) / stride + 1;
}

// Majority ties go to the smallest class id.
inline WindowResult window_stream(const SampleStream& stream, const WindowConfig& cfg,
                                  int subject = 0) {
  require(cfg.length >= 1, ErrorKind::invalid_argument, "window length must be >= 1");
  require(cfg.stride >= 1, ErrorKind::invalid_argument, "window stride must be >= 1");
  validate(stream);
  WindowResult result;
  const std::size_t n = window_count(stream.length(), cfg.length, cfg.stride);
  const std::size_t n_ch = stream.channels.size();
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = w * cfg.stride;
    int label = -1;
    if (stream.labels) {
      const auto& lab = *stream.labels;
      std::map<int, std::size_t> counts;
      for (std::size_t t = start; t < start + cfg.length; ++t) ++counts[lab[t]];
      if (cfg.labeling == WindowLabeling::strict && counts.size() > 1) {
        ++result.dropped;
        continue;
      }
      std::size_t best = 0;
      for (const auto& [cls, count] : counts) {
        if (count > best) {
          best = count;
          label = cls;
        }
      }
    }
    std::vector<double> values(cfg.length * n_ch);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      for (std::size_t c = 0; c < n_ch; ++c) {
        values[t * n_ch + c] = stream.channels[c][start + t];
      }
    }
    result.windows.push_back(
        Window{Tensor({cfg.length, n_ch}, std::move(values)), label, subject, start});
  }
  return result;
}

}  // namespace tensorhar
