#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/text_io.hpp"

namespace tensorhar {

enum class Representation { feature_vectors, raw_tensors };

inline const char* to_string(Representation r) {
  return r == Representation::feature_vectors ? "feature_vectors" : "raw_tensors";
}

inline Representation parse_representation(std::string_view s) {
  if (s == "feature_vectors" || s == "features") return Representation::feature_vectors;
  if (s == "raw_tensors" || s == "raw") return Representation::raw_tensors;
  fail(ErrorKind::invalid_argument, "unknown representation '", std::string(s),
       "' (expected feature_vectors or raw_tensors)");
}

inline constexpr std::size_t kUciFeatureCount = 561;
inline constexpr std::size_t kUciWindowLength = 128;

// Channel order of raw (128, 9) tensors.
inline const std::array<const char*, 9>& uci_channels() {
  static const std::array<const char*, 9> names{"body_acc_x",  "body_acc_y",  "body_acc_z",
                                                "body_gyro_x", "body_gyro_y", "body_gyro_z",
                                                "total_acc_x", "total_acc_y", "total_acc_z"};
  return names;
}

namespace detail {

inline std::vector<std::vector<double>> read_matrix(const std::filesystem::path& file,
                                                    std::size_t columns) {
  const auto text = read_text_file(file);
  std::vector<std::vector<double>> rows;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) {
      require(i + 1 == lines.size(), ErrorKind::parse_error, location(file, i + 1),
              ": blank line");
      continue;
    }
    auto row = parse_whitespace_row(lines[i], location(file, i + 1));
    require(row.size() == columns, ErrorKind::parse_error, location(file, i + 1), ": expected ",
            columns, " values, found ", row.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<int> read_int_column(const std::filesystem::path& file) {
  const auto text = read_text_file(file);
  std::vector<int> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto t = trim(lines[i]);
    if (t.empty()) {
      require(i + 1 == lines.size(), ErrorKind::parse_error, location(file, i + 1),
              ": blank line");
      continue;
    }
    out.push_back(parse_int(t, location(file, i + 1)));
  }
  return out;
}

}  // namespace detail

// One split ("train" or "test") of the standard layout. Labels 1..6 become 0..5.
inline Dataset load_uci_har_split(const std::filesystem::path& root, const std::string& split,
                                  Representation repr) {
  const auto dir = root / split;
  require(std::filesystem::is_directory(dir), ErrorKind::io_error, "missing directory ",
          dir.string());
  const auto y_file = dir / ("y_" + split + ".txt");
  const auto s_file = dir / ("subject_" + split + ".txt");
  const auto y = detail::read_int_column(y_file);
  const auto subjects = detail::read_int_column(s_file);
  require(subjects.size() == y.size(), ErrorKind::parse_error, s_file.string(), " has ",
          subjects.size(), " rows, ", y_file.string(), " has ", y.size());

  Dataset d;
  d.label_map = LabelMap::six_class();
  d.description = "uci_har/" + split + " " + to_string(repr);
  std::vector<std::vector<double>> features;
  std::vector<std::vector<std::vector<double>>> channels;
  if (repr == Representation::feature_vectors) {
    const auto x_file = dir / ("X_" + split + ".txt");
    features = detail::read_matrix(x_file, kUciFeatureCount);
    require(features.size() == y.size(), ErrorKind::parse_error, x_file.string(), " has ",
            features.size(), " rows, ", y_file.string(), " has ", y.size());
  } else {
    for (const char* name : uci_channels()) {
      const auto file = dir / "Inertial Signals" / (std::string(name) + "_" + split + ".txt");
      channels.push_back(detail::read_matrix(file, kUciWindowLength));
      require(channels.back().size() == y.size(), ErrorKind::parse_error, file.string(),
              " has ", channels.back().size(), " rows, ", y_file.string(), " has ", y.size());
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] >= 1 && y[i] <= 6, ErrorKind::parse_error, location(y_file, i + 1),
            ": label ", y[i], " outside 1..6");
    if (repr == Representation::feature_vectors) {
      d.add(Tensor::vector(std::move(features[i])), y[i] - 1, subjects[i]);
    } else {
      std::vector<double> v(kUciWindowLength * channels.size());
      for (std::size_t t = 0; t < kUciWindowLength; ++t) {
        for (std::size_t c = 0; c < channels.size(); ++c) {
          v[t * channels.size() + c] = channels[c][i][t];
        }
      }
      d.add(Tensor({kUciWindowLength, channels.size()}, std::move(v)), y[i] - 1, subjects[i]);
    }
  }
  return d;
}

struct UciHarData {
  Dataset train;
  Dataset test;
};

inline UciHarData load_uci_har(const std::filesystem::path& root, Representation repr) {
  return {load_uci_har_split(root, "train", repr), load_uci_har_split(root, "test", repr)};
}

}  // namespace tensorhar
