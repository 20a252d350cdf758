#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorhar/classifier.hpp"
#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/metrics.hpp"
#include "tensorhar/random.hpp"

namespace tensorhar {

enum class Grouping { none, by_subject };

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

inline std::vector<Fold> folds_from_assignment(const std::vector<std::size_t>& fold_of,
                                               std::size_t k) {
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

}  // namespace detail

// Per-class shuffled indices are dealt round-robin, continuing the deal across
// classes, so each class lands in every fold ⌊n_c/k⌋ or ⌈n_c/k⌉ times.
// by_subject keeps whole subjects together and balances subjects per fold.
inline std::vector<Fold> stratified_kfold(const Dataset& d, std::size_t k, std::uint64_t seed,
                                          Grouping grouping = Grouping::none) {
  validate(d);
  require(k >= 2, ErrorKind::invalid_argument, "cross-validation needs at least 2 folds, got ",
          k);
  require(!d.empty(), ErrorKind::empty_input, "cannot split an empty dataset");
  Rng rng = make_rng(seed, "cv-folds");
  std::vector<std::size_t> fold_of(d.size(), 0);

  if (grouping == Grouping::none) {
    const auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      require(counts[c] == 0 || counts[c] >= k, ErrorKind::invalid_argument, "class '",
              d.label_map.name(static_cast<int>(c)), "' has ", counts[c],
              " samples, fewer than the ", k, " folds");
    }
    std::size_t deal = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (static_cast<std::size_t>(d.labels[i]) == c) members.push_back(i);
      }
      shuffle(members, rng);
      for (const auto i : members) fold_of[i] = deal++ % k;
    }
    return detail::folds_from_assignment(fold_of, k);
  }

  std::map<int, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < d.size(); ++i) by_subject[d.subjects[i]].push_back(i);
  require(by_subject.size() >= k, ErrorKind::invalid_argument, "grouped cross-validation needs at least ",
          k, " subjects, found ", by_subject.size());
  std::vector<int> subjects;
  for (const auto& [s, _] : by_subject) subjects.push_back(s);
  shuffle(subjects, rng);
  std::vector<std::size_t> subjects_in(k, 0), samples_in(k, 0);
  for (const int s : subjects) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < k; ++f) {
      if (subjects_in[f] < subjects_in[best] ||
          (subjects_in[f] == subjects_in[best] && samples_in[f] < samples_in[best])) {
        best = f;
      }
    }
    ++subjects_in[best];
    samples_in[best] += by_subject[s].size();
    for (const auto i : by_subject[s]) fold_of[i] = best;
  }
  return detail::folds_from_assignment(fold_of, k);
}

struct CvResult {
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t fits = 0;
  std::string protocol;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline std::string protocol_name(std::size_t k, Grouping g) {
  return std::to_string(k) + "-fold stratified cv" +
         (g == Grouping::by_subject ? " (grouped by subject)" : "");
}

// Folds run in parallel; accuracies are stored by fold index.
inline CvResult cross_validate(std::string_view family, const json& params, const Dataset& d,
                               std::size_t k, std::uint64_t seed,
                               Grouping grouping = Grouping::none, int jobs = 1) {
  const auto folds = stratified_kfold(d, k, seed, grouping);
  make_classifier(family, params, seed, 1);  // reject bad parameters before forking
  CvResult r;
  r.protocol = protocol_name(k, grouping);
  r.fold_accuracies.resize(folds.size());
  parallel_for(folds.size(), jobs, [&](std::size_t f) {
    auto model = make_classifier(family, params, seed, 1);
    model->fit(d.subset(folds[f].train));
    const Dataset test = d.subset(folds[f].test);
    const auto pred = model->predict_all(test);
    r.fold_accuracies[f] = compute_report(test.labels, pred, d.label_map).accuracy;
  });
  r.fits = folds.size();
  r.mean = mean_of(r.fold_accuracies);
  double ss = 0.0;
  for (const double a : r.fold_accuracies) ss += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(r.fold_accuracies.size()));
  return r;
}

inline nlohmann::json to_json(const CvResult& r) {
  return {{"protocol", r.protocol},
          {"fold_accuracies", r.fold_accuracies},
          {"mean_accuracy", r.mean},
          {"std_accuracy", r.stddev},
          {"fits", r.fits}};
}

}  // namespace tensorhar
