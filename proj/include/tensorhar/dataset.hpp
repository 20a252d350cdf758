#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tensorhar/error.hpp"
#include "tensorhar/signal_prep.hpp"
#include "tensorhar/tensor.hpp"

namespace tensorhar {

// Bijection between activity names and contiguous ids 0..n-1.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto key = normalize(names_[i]);
      require(!index_.contains(key), ErrorKind::invalid_argument,
              "duplicate label name '", names_[i], "'");
      index_[key] = static_cast<int>(i);
    }
  }

  static LabelMap six_class() {
    return LabelMap({"walking", "walking_upstairs", "walking_downstairs", "sitting",
                     "standing", "laying"});
  }
  static LabelMap three_class() {
    return LabelMap({"walking", "walking_upstairs", "walking_downstairs"});
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  const std::string& name(int id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < names_.size(),
            ErrorKind::out_of_range, "label id ", id, " outside 0..",
            names_.size() == 0 ? 0 : names_.size() - 1);
    return names_[static_cast<std::size_t>(id)];
  }

  std::optional<int> find(std::string_view token) const {
    const auto key = normalize(token);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    return std::nullopt;
  }

  // Accepts a name (case-insensitive, '-'/' ' treated as '_') or a numeric id.
  int id(std::string_view token) const {
    if (auto found = find(token)) return *found;
    if (!token.empty() && std::all_of(token.begin(), token.end(),
                                      [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const int v = std::stoi(std::string(token));
      if (v >= 0 && static_cast<std::size_t>(v) < names_.size()) return v;
    }
    fail(ErrorKind::parse_error, "unknown label '", std::string(token), "'");
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.names_ == b.names_; }

 private:
  static std::string normalize(std::string_view s) {
    std::string out;
    for (char c : s) {
      if (c == '-' || c == ' ') c = '_';
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  }

  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// Labeled samples. Vector data is stored as order-1 tensors so every model
// consumes the same container.
struct Dataset {
  std::vector<Tensor> samples;
  std::vector<int> labels;
  std::vector<int> subjects;
  LabelMap label_map;
  std::string description;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t n_classes() const { return label_map.size(); }

  const Shape& sample_shape() const {
    require(!samples.empty(), ErrorKind::empty_input, "dataset is empty");
    return samples.front().shape();
  }

  void add(Tensor x, int label, int subject = 0) {
    samples.push_back(std::move(x));
    labels.push_back(label);
    subjects.push_back(subject);
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.label_map = label_map;
    out.description = description;
    out.samples.reserve(indices.size());
    for (const auto i : indices) {
      require(i < size(), ErrorKind::out_of_range, "sample index ", i,
              " out of range for dataset of size ", size());
      out.add(samples[i], labels[i], subjects.empty() ? 0 : subjects[i]);
    }
    return out;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (const int y : labels) ++counts.at(static_cast<std::size_t>(y));
    return counts;
  }

  // Flattened view of every sample as a feature vector.
  Dataset flattened() const {
    Dataset out = *this;
    for (auto& s : out.samples) {
      s = Tensor::vector(std::vector<double>(s.values().begin(), s.values().end()));
    }
    return out;
  }
};

inline void validate(const Dataset& d) {
  require(d.labels.size() == d.samples.size(), ErrorKind::dimension_mismatch,
          "dataset has ", d.samples.size(), " samples and ", d.labels.size(), " labels");
  require(d.subjects.size() == d.samples.size(), ErrorKind::dimension_mismatch,
          "dataset has ", d.samples.size(), " samples and ", d.subjects.size(),
          " subject ids");
  if (d.samples.empty()) return;
  const auto& shape = d.samples.front().shape();
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    require(d.samples[i].shape() == shape, ErrorKind::dimension_mismatch, "sample ", i,
            " has shape ", shape_string(d.samples[i].shape()), ", expected ",
            shape_string(shape));
    require(d.labels[i] >= 0 && static_cast<std::size_t>(d.labels[i]) < d.n_classes(),
            ErrorKind::out_of_range, "sample ", i, " has label ", d.labels[i],
            " outside the label map of ", d.n_classes(), " classes");
  }
}

inline StandardizerRecord fit_standardizer(const Dataset& d) {
  std::vector<std::span<const double>> rows;
  rows.reserve(d.size());
  for (const auto& s : d.samples) rows.push_back(s.values());
  return fit_standardizer(std::span<const std::span<const double>>(rows));
}

inline Tensor standardize(const Tensor& x, const StandardizerRecord& rec) {
  Tensor out = x;
  standardize_in_place(out.values(), rec);
  return out;
}

inline Dataset standardize(Dataset d, const StandardizerRecord& rec) {
  for (auto& s : d.samples) standardize_in_place(s.values(), rec);
  return d;
}

}  // namespace tensorhar
