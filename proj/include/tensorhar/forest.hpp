#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/logreg.hpp"
#include "tensorhar/random.hpp"

namespace tensorhar {

struct ForestConfig {
  std::size_t n_estimators = 100;
  std::optional<std::size_t> max_depth;     // nullopt = grow until the leaf rules stop it
  std::size_t min_samples_leaf = 4;
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  std::optional<std::size_t> max_features;  // nullopt = floor(sqrt(d))
  std::uint64_t seed = 0;
};

inline void validate(const ForestConfig& cfg) {
  require(cfg.n_estimators >= 1, ErrorKind::invalid_argument,
          "forest needs at least one tree");
  require(cfg.min_samples_leaf >= 1, ErrorKind::invalid_argument,
          "min_samples_leaf must be at least 1");
  require(cfg.min_samples_split >= 2, ErrorKind::invalid_argument,
          "min_samples_split must be at least 2");
  if (cfg.max_features) {
    require(*cfg.max_features >= 1, ErrorKind::invalid_argument,
            "max_features must be at least 1");
  }
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;     // majority class at this node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> out_of_bag;  // training indices not drawn by the bootstrap
};

struct ForestModel {
  ForestConfig config;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;
};

namespace detail {

inline double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (const auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

inline int majority(std::span<const std::size_t> counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class TreeBuilder {
 public:
  TreeBuilder(const RowViews& x, std::span<const int> y, std::size_t n_classes,
              const ForestConfig& cfg, Rng rng)
      : x_(x), y_(y), n_classes_(n_classes), cfg_(cfg), rng_(rng) {
    const std::size_t d = x.front().size();
    max_features_ = cfg.max_features
                        ? std::min(*cfg.max_features, d)
                        : std::max<std::size_t>(
                              1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> sample) {
    DecisionTree tree;
    grow(tree, sample, 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  std::vector<std::size_t> counts_of(std::span<const std::size_t> sample) const {
    std::vector<std::size_t> counts(n_classes_, 0);
    for (const auto i : sample) ++counts[static_cast<std::size_t>(y_[i])];
    return counts;
  }

  int grow(DecisionTree& tree, std::vector<std::size_t>& sample, std::size_t depth) {
    const auto counts = counts_of(sample);
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, majority(counts)});

    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_cap = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (pure || depth_cap || sample.size() < cfg_.min_samples_split ||
        sample.size() < 2 * cfg_.min_samples_leaf) {
      return node_id;
    }

    const Split split = best_split(sample);
    if (split.feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (const auto i : sample) {
      (x_[i][static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right)
          .push_back(i);
    }
    sample.clear();
    sample.shrink_to_fit();
    tree.nodes[static_cast<std::size_t>(node_id)].feature = split.feature;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = split.threshold;
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = l;
    tree.nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }

  // Weighted Gini over max_features features drawn without replacement.
  Split best_split(std::span<const std::size_t> sample) {
    for (std::size_t f = 0; f < max_features_; ++f) {
      std::swap(features_[f], features_[f + uniform_index(rng_, features_.size() - f)]);
    }
    Split best;
    const std::size_t n = sample.size();
    const std::size_t min_leaf = cfg_.min_samples_leaf;
    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left(n_classes_), right(n_classes_);
    for (std::size_t f = 0; f < max_features_; ++f) {
      const std::size_t feat = features_[f];
      for (std::size_t r = 0; r < n; ++r) {
        column[r] = {x_[sample[r]][feat], y_[sample[r]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      std::fill(right.begin(), right.end(), 0);
      for (const auto& [v, c] : column) ++right[static_cast<std::size_t>(c)];
      for (std::size_t r = 0; r + 1 < n; ++r) {
        const auto c = static_cast<std::size_t>(column[r].second);
        ++left[c];
        --right[c];
        const std::size_t nl = r + 1, nr = n - nl;
        if (column[r].first == column[r + 1].first) continue;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double impurity =
            (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
            static_cast<double>(n);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = static_cast<int>(feat);
          best.threshold = column[r].first + (column[r + 1].first - column[r].first) / 2.0;
          if (best.threshold >= column[r + 1].first) best.threshold = column[r].first;
        }
      }
    }
    return best;
  }

  const RowViews& x_;
  std::span<const int> y_;
  std::size_t n_classes_;
  const ForestConfig& cfg_;
  Rng rng_;
  std::size_t max_features_ = 1;
  std::vector<std::size_t> features_;
};

}  // namespace detail

inline int tree_predict(const DecisionTree& tree, std::span<const double> x) {
  std::size_t node = 0;
  while (tree.nodes[node].feature >= 0) {
    const auto& n = tree.nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold
                                        ? n.left
                                        : n.right);
  }
  return tree.nodes[node].label;
}

inline ForestModel train_forest(const RowViews& x, std::span<const int> y,
                                std::size_t n_classes, const ForestConfig& cfg, int jobs = 1) {
  validate(cfg);
  require(!x.empty(), ErrorKind::empty_input, "forest needs at least one training sample");
  require(x.size() == y.size(), ErrorKind::dimension_mismatch, x.size(), " samples but ",
          y.size(), " labels");
  for (const auto& row : x) {
    for (const double v : row) {
      require(std::isfinite(v), ErrorKind::invalid_argument,
              "forest input has a non-finite feature");
    }
  }
  ForestModel model;
  model.config = cfg;
  model.n_classes = n_classes;
  model.n_features = x.front().size();
  model.trees.resize(cfg.n_estimators);
  const std::size_t n = x.size();
  parallel_for(cfg.n_estimators, jobs, [&](std::size_t t) {
    Rng rng(substream_seed(cfg.seed, "forest-tree", t));
    std::vector<std::size_t> sample(n);
    std::vector<bool> drawn(n, !cfg.bootstrap);
    if (cfg.bootstrap) {
      for (auto& s : sample) {
        s = uniform_index(rng, n);
        drawn[s] = true;
      }
      std::sort(sample.begin(), sample.end());
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(x, y, n_classes, cfg, rng);
    model.trees[t] = builder.build(sample);
    for (std::size_t i = 0; i < n; ++i) {
      if (!drawn[i]) model.trees[t].out_of_bag.push_back(i);
    }
  });
  return model;
}

inline ForestModel train_forest(const Dataset& d, const ForestConfig& cfg, int jobs = 1) {
  validate(d);
  return train_forest(row_views(d), d.labels, d.n_classes(), cfg, jobs);
}

inline std::vector<double> forest_vote_fractions(const ForestModel& m,
                                                 std::span<const double> x) {
  require(x.size() == m.n_features, ErrorKind::dimension_mismatch, "input has ", x.size(),
          " features, forest expects ", m.n_features);
  std::vector<double> votes(m.n_classes, 0.0);
  for (const auto& tree : m.trees) votes[static_cast<std::size_t>(tree_predict(tree, x))] += 1.0;
  for (auto& v : votes) v /= static_cast<double>(m.trees.size());
  return votes;
}

// Majority vote over trees; ties go to the lower class id.
inline int predict_forest(const ForestModel& m, std::span<const double> x) {
  const auto votes = forest_vote_fractions(m, x);
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

// Out-of-bag vote for every training sample; -1 where no tree left it out.
inline std::vector<int> oob_predictions(const ForestModel& m, const RowViews& x) {
  std::vector<std::vector<std::size_t>> votes(x.size(), std::vector<std::size_t>(m.n_classes, 0));
  for (const auto& tree : m.trees) {
    for (const auto i : tree.out_of_bag) {
      ++votes[i][static_cast<std::size_t>(tree_predict(tree, x[i]))];
    }
  }
  std::vector<int> out(x.size(), -1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::all_of(votes[i].begin(), votes[i].end(), [](std::size_t v) { return v == 0; })) continue;
    out[i] = detail::majority(votes[i]);
  }
  return out;
}

}  // namespace tensorhar
