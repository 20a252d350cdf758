#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "tensorhar/custom_csv.hpp"
#include "tensorhar/dataset.hpp"
#include "tensorhar/random.hpp"
#include "tensorhar/text_io.hpp"
#include "tensorhar/uci_har.hpp"

// Synthetic stand-ins for the sensor data: schema-compatible, clearly fake.
namespace tensorhar::synth {

inline double gaussian(Rng& rng) {
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * uniform01(rng));
}

// Class c gets a rank-1 mean pattern u_c ∘ v_c of the given shape plus noise.
inline Dataset tensor_blobs(std::size_t n_per_class, const Shape& shape, std::size_t n_classes,
                            double noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, "synth-tensor-blobs");
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_classes; ++c) names.push_back("class_" + std::to_string(c));
  Dataset d;
  d.label_map = LabelMap(names);
  d.description = "synthetic tensor blobs";
  const std::size_t size = shape_size(shape);
  std::vector<std::vector<double>> means(n_classes, std::vector<double>(size, 1.0));
  for (auto& mean : means) {
    std::vector<std::vector<double>> factors;
    for (const auto dim : shape) {
      std::vector<double> f(dim);
      for (auto& v : f) v = gaussian(rng);
      factors.push_back(std::move(f));
    }
    for (std::size_t flat = 0; flat < size; ++flat) {
      const auto idx = unflatten(flat, shape);
      for (std::size_t n = 0; n < shape.size(); ++n) mean[flat] *= factors[n][idx[n]];
    }
  }
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::vector<double> v(means[c]);
      for (auto& x : v) x += noise * gaussian(rng);
      d.add(Tensor(shape, std::move(v)), static_cast<int>(c), static_cast<int>(i % 5));
    }
  }
  return d;
}

inline const std::vector<std::string>& age_groups() {
  static const std::vector<std::string> groups{"18-25", "26-40", "41-55", "56-70"};
  return groups;
}

// 3 / 4 / 5 / 3 participants over the four age groups.
inline std::vector<std::string> participant_age_groups() {
  const std::size_t per_group[] = {3, 4, 5, 3};
  std::vector<std::string> out;
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t k = 0; k < per_group[g]; ++k) out.push_back(age_groups()[g]);
  }
  return out;
}

struct StreamSpec {
  std::size_t segments_per_class = 2;
  std::size_t segment_length = 320;
  double rate_hz = 50.0;
  bool gyroscope = false;
  double noise = 0.15;
};

// Gait-like accelerometer signals per class: cadence and vertical load differ.
inline std::string stream_csv(int subject, const LabelMap& labels, const StreamSpec& layout,
                              std::uint64_t seed) {
  Rng rng(substream_seed(seed, "synth-stream", static_cast<std::uint64_t>(subject)));
  const double subject_gain = 0.9 + 0.2 * uniform01(rng);
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << (layout.gyroscope ? kCsvImuHeader : kCsvAccelHeader) << '\n';
  std::size_t t = 0;
  for (std::size_t s = 0; s < layout.segments_per_class; ++s) {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const double freq = 1.6 + 0.35 * static_cast<double>(c);
      const double lift = 0.25 * static_cast<double>(c);
      const double phase = 2.0 * std::numbers::pi * uniform01(rng);
      for (std::size_t k = 0; k < layout.segment_length; ++k, ++t) {
        const double time = static_cast<double>(t) / layout.rate_hz;
        const double w = 2.0 * std::numbers::pi * freq * time + phase;
        const double ax = subject_gain * std::sin(w) + layout.noise * gaussian(rng);
        const double ay = 0.5 * subject_gain * std::sin(2.0 * w) + lift + layout.noise * gaussian(rng);
        const double az = 9.81 + (0.8 + lift) * std::cos(w) + layout.noise * gaussian(rng);
        os << time << ',' << ax << ',' << ay << ',' << az;
        if (layout.gyroscope) {
          os << ',' << 0.3 * std::cos(w) + layout.noise * gaussian(rng) << ','
             << 0.2 * std::sin(w + lift) + layout.noise * gaussian(rng) << ','
             << lift * std::sin(0.5 * w) + layout.noise * gaussian(rng);
        }
        os << ',' << labels.name(static_cast<int>(c)) << '\n';
      }
    }
  }
  return os.str();
}

// Writes subjects.csv plus one stream per participant.
inline void write_custom_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                                 const StreamSpec& layout = {},
                                 const LabelMap& labels = LabelMap::three_class()) {
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  index << "subject,age_group,file\n";
  const auto groups = participant_age_groups();
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const int subject = static_cast<int>(s + 1);
    const std::string file = "subject_" + std::to_string(subject) + ".csv";
    write_text_file(dir / file, stream_csv(subject, labels, layout, seed));
    index << subject << ',' << groups[s] << ',' << file << '\n';
  }
  write_text_file(dir / "subjects.csv", index.str());
}

struct UciLayoutSpec {
  std::size_t train_per_class = 10;
  std::size_t test_per_class = 5;
  std::size_t train_subjects = 6;
  std::size_t test_subjects = 3;
  double noise = 0.6;
};

// A small directory in the standard UCI HAR layout with synthetic values.
inline void write_uci_layout(const std::filesystem::path& root, std::uint64_t seed,
                             const UciLayoutSpec& layout = {}) {
  Rng rng = make_rng(seed, "synth-uci");
  std::vector<std::vector<double>> centers(6, std::vector<double>(kUciFeatureCount));
  for (auto& c : centers) {
    for (auto& v : c) v = std::tanh(gaussian(rng));
  }
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(7) << v;
    return os.str();
  };
  for (const std::string split : {"train", "test"}) {
    const std::size_t per_class = split == "train" ? layout.train_per_class : layout.test_per_class;
    const std::size_t subjects = split == "train" ? layout.train_subjects : layout.test_subjects;
    const int subject_base = split == "train" ? 1 : static_cast<int>(layout.train_subjects) + 1;
    std::ostringstream x, y, subj;
    std::vector<std::ostringstream> channels(9);
    std::size_t row = 0;
    for (std::size_t i = 0; i < per_class; ++i) {
      for (int c = 0; c < 6; ++c, ++row) {
        for (std::size_t j = 0; j < kUciFeatureCount; ++j) {
          const double v = std::clamp(centers[static_cast<std::size_t>(c)][j] +
                                          layout.noise * 0.3 * gaussian(rng), -1.0, 1.0);
          x << "  " << fmt(v);
        }
        x << '\n';
        y << c + 1 << '\n';
        subj << subject_base + static_cast<int>(row % subjects) << '\n';
        const double freq = 0.02 + 0.012 * c;
        const double phase = 2.0 * std::numbers::pi * uniform01(rng);
        for (std::size_t ch = 0; ch < 9; ++ch) {
          const double amp = (c < 3 ? 0.4 : 0.05) * (1.0 + 0.1 * static_cast<double>(ch % 3));
          const double offset = ch >= 6 ? 0.3 + 0.12 * c * static_cast<double>(ch - 5) : 0.0;
          for (std::size_t t = 0; t < kUciWindowLength; ++t) {
            const double v = offset + amp * std::sin(2.0 * std::numbers::pi * freq *
                                                         static_cast<double>(t) + phase +
                                                     static_cast<double>(ch)) +
                             0.05 * layout.noise * gaussian(rng);
            channels[ch] << ' ' << fmt(v);
          }
          channels[ch] << '\n';
        }
      }
    }
    const auto dir = root / split;
    write_text_file(dir / ("X_" + split + ".txt"), x.str());
    write_text_file(dir / ("y_" + split + ".txt"), y.str());
    write_text_file(dir / ("subject_" + split + ".txt"), subj.str());
    for (std::size_t ch = 0; ch < 9; ++ch) {
      write_text_file(dir / "Inertial Signals" /
                          (std::string(uci_channels()[ch]) + "_" + split + ".txt"),
                      channels[ch].str());
    }
  }
}

}  // namespace tensorhar::synth
