#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorhar/cv.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/random.hpp"

namespace tensorhar {

// Finite grid of hyperparameter values; keys are enumerated in sorted order.
struct SearchSpace {
  std::map<std::string, std::vector<json>> values;
  std::size_t n_candidates = 10;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  Grouping grouping = Grouping::none;

  std::size_t size() const {
    std::size_t s = values.empty() ? 0 : 1;
    for (const auto& [_, v] : values) s *= v.size();
    return s;
  }

  // Mixed-radix decode, last key varying fastest.
  json candidate(std::size_t index) const {
    require(index < size(), ErrorKind::out_of_range, "candidate ", index,
            " outside a space of ", size());
    json out = json::object();
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
      out[it->first] = it->second[index % it->second.size()];
      index /= it->second.size();
    }
    return out;
  }
};

inline void validate(const SearchSpace& s) {
  require(!s.values.empty(), ErrorKind::invalid_argument, "search space has no hyperparameters");
  for (const auto& [k, v] : s.values) {
    require(!v.empty(), ErrorKind::invalid_argument, "hyperparameter '", k,
            "' has no candidate values");
  }
  require(s.n_candidates >= 1, ErrorKind::invalid_argument, "n_candidates must be at least 1");
  require(s.folds >= 2, ErrorKind::invalid_argument, "folds must be at least 2");
}

inline SearchSpace default_search_space(std::string_view family) {
  const std::vector<json> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  SearchSpace s;
  if (family == "forest") {
    s.values = {{"n_estimators", {100, 200, 300}},
                {"max_depth", {nullptr, 10, 20, 30}},
                {"min_samples_split", {2, 5, 10}},
                {"min_samples_leaf", {1, 2, 4}},
                {"bootstrap", {true, false}}};
  } else if (family == "svm") {
    s.values = {{"C", c_grid}, {"kernel", {"linear", "rbf"}}};
  } else if (family == "logreg" || family == "stm") {
    s.values = {{"C", c_grid}};
  } else if (family == "knn") {
    s.values = {{"k", {1, 3, 5, 7, 9}}, {"metric", {"euclidean"}}};
  } else {
    fail(ErrorKind::invalid_argument, "no default search space for model '",
         std::string(family), "'");
  }
  s.n_candidates = s.size();
  return s;
}

// Candidate indices drawn without replacement; the whole space when the
// request covers it.
inline std::vector<std::size_t> sample_candidates(const SearchSpace& s) {
  const std::size_t total = s.size();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (s.n_candidates >= total) return idx;
  Rng rng = make_rng(s.seed, "search-candidates");
  for (std::size_t i = 0; i < s.n_candidates; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, total - i)]);
  }
  idx.resize(s.n_candidates);
  return idx;
}

struct CandidateResult {
  std::size_t space_index = 0;
  json params;
  CvResult cv;
};

struct SearchResult {
  std::vector<CandidateResult> candidates;
  std::size_t best = 0;  // position in `candidates`
  std::size_t total_fits = 0;

  const CandidateResult& best_candidate() const { return candidates.at(best); }
};

using CandidateEvaluator = std::function<CvResult(const json& params)>;

// Generic driver: ties on mean accuracy go to the earlier candidate.
inline SearchResult randomized_search(const SearchSpace& space, const CandidateEvaluator& eval) {
  validate(space);
  SearchResult r;
  for (const auto index : sample_candidates(space)) {
    CandidateResult c;
    c.space_index = index;
    c.params = space.candidate(index);
    c.cv = eval(c.params);
    r.total_fits += c.cv.fits;
    r.candidates.push_back(std::move(c));
  }
  for (std::size_t i = 1; i < r.candidates.size(); ++i) {
    if (r.candidates[i].cv.mean > r.candidates[r.best].cv.mean) r.best = i;
  }
  return r;
}

// `fixed` holds parameters shared by every candidate (the space wins on overlap).
inline SearchResult randomized_search(std::string_view family, const SearchSpace& space,
                                      const Dataset& d, int jobs = 1,
                                      const json& fixed = json::object()) {
  validate(space);
  const auto folds = stratified_kfold(d, space.folds, space.seed, space.grouping);
  return randomized_search(space, [&](const json& candidate) {
    json params = fixed.is_null() ? json::object() : fixed;
    params.update(candidate);
    make_classifier(family, params, space.seed, 1);
    CvResult cv;
    cv.protocol = protocol_name(space.folds, space.grouping);
    cv.fold_accuracies.resize(folds.size());
    parallel_for(folds.size(), jobs, [&](std::size_t f) {
      auto model = make_classifier(family, params, space.seed, 1);
      model->fit(d.subset(folds[f].train));
      const Dataset test = d.subset(folds[f].test);
      cv.fold_accuracies[f] =
          compute_report(test.labels, model->predict_all(test), d.label_map).accuracy;
    });
    cv.fits = folds.size();
    cv.mean = mean_of(cv.fold_accuracies);
    return cv;
  });
}

inline nlohmann::json to_json(const SearchResult& r) {
  json rows = json::array();
  for (const auto& c : r.candidates) {
    rows.push_back({{"space_index", c.space_index},
                    {"params", c.params},
                    {"fold_accuracies", c.cv.fold_accuracies},
                    {"mean_accuracy", c.cv.mean}});
  }
  return {{"candidates", std::move(rows)},
          {"best_params", r.candidates.empty() ? json() : r.best_candidate().params},
          {"best_mean_accuracy", r.candidates.empty() ? 0.0 : r.best_candidate().cv.mean},
          {"total_fits", r.total_fits}};
}

}  // namespace tensorhar
