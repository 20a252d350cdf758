#include <gtest/gtest.h>

#include <cmath>

#include "tensorhar/svm.hpp"
#include "test_support.hpp"

using namespace tensorhar;
using th_test::Gen;

namespace {

SvmConfig linear_cfg(double C) {
  SvmConfig cfg;
  cfg.C = C;
  cfg.tolerance = 1e-6;
  cfg.max_passes = 10000;
  return cfg;
}

// Dense 1-D grid over (w, b) in [-5, 5]², refined once around the best cell.
double grid_primal_1d(const std::vector<double>& x, const std::vector<int>& y, double C) {
  auto f = [&](double w, double b) {
    double h = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) h += std::max(0.0, 1.0 - y[i] * (w * x[i] + b));
    return 0.5 * w * w + C * h;
  };
  double best = f(0, 0), bw = 0, bb = 0;
  for (int i = -1000; i <= 1000; ++i)
    for (int j = -1000; j <= 1000; ++j) {
      const double w = 5.0 * i / 1000, b = 5.0 * j / 1000, v = f(w, b);
      if (v < best) best = v, bw = w, bb = b;
    }
  for (int i = -500; i <= 500; ++i)
    for (int j = -500; j <= 500; ++j) best = std::min(best, f(bw + 1e-5 * i, bb + 1e-5 * j));
  return best;
}

// Dual objective Σα − ½ Σ α_i α_j y_i y_j K_ij, computed directly.
double dual_value(const FeatureRows& x, std::span<const double> y, std::span<const double> a) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      double k = 0.0;
      for (std::size_t d = 0; d < x[i].size(); ++d) k += x[i][d] * x[j][d];
      quad += a[i] * a[j] * y[i] * y[j] * k;
    }
  }
  return lin - 0.5 * quad;
}

struct Problem {
  FeatureRows x;
  std::vector<int> y;
};

Problem random_tiny(Gen& g) {
  Problem p;
  const std::size_t n = g.index(2, 8);
  for (std::size_t i = 0; i < n; ++i) {
    p.x.push_back({g.uniform(-2, 2), g.uniform(-2, 2)});
    p.y.push_back(g.index(0, 1) ? 1 : -1);
  }
  p.y[0] = 1;
  p.y[1] = -1;
  return p;
}

}  // namespace

TEST(BinarySvm, SymmetricPair) {
  const FeatureRows x{{-1, 0}, {1, 0}};
  const std::vector<int> y{-1, 1};
  const auto m = train_binary_svm(x, y, linear_cfg(100));
  EXPECT_NEAR(m.weights[0], 1.0, 1e-6);
  EXPECT_NEAR(m.weights[1], 0.0, 1e-9);
  EXPECT_NEAR(m.bias, 0.0, 1e-6);
  EXPECT_EQ(m.support_indices.size(), 2u);
  EXPECT_NEAR(decision_value(m, std::vector<double>{0.5, 0}), 0.5, 1e-6);
  EXPECT_NEAR(decision_value(m, std::vector<double>{0.0, 3.0}), 0.0, 1e-6);
}

TEST(BinarySvm, SeparableBlobsFitPerfectly) {
  Gen g(7);
  FeatureRows x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int s = i % 2 ? 1 : -1;
    x.push_back({3.0 * s + g.normal(), 3.0 * s + g.normal() * 0.5});
    y.push_back(s);
  }
  const auto m = train_binary_svm(x, y, linear_cfg(1));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(predict_sign(m, x[i]), y[i]);
}

TEST(BinarySvm, OneDimensionalObjectiveMatchesGrid) {
  const std::vector<double> xs{-2, -1, 0.5, -0.5, 1, 2};
  const std::vector<int> y{-1, -1, -1, 1, 1, 1};
  FeatureRows x;
  for (const double v : xs) x.push_back({v});
  const auto m = train_binary_svm(x, y, linear_cfg(1));
  const double oracle = grid_primal_1d(xs, y, 1.0);
  // Frozen from the grid above: minimum 3.5 at w = 1, b = 0.
  EXPECT_NEAR(oracle, 3.5, 1e-6);
  EXPECT_NEAR(primal_objective(m, x, y), 3.5, 1e-3);
}

TEST(BinarySvm, TinyInstancesMatchGridOracle) {
  Gen g(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_tiny(g);
    const double C = g.uniform(0.1, 3.0);
    const auto m = train_binary_svm(p.x, p.y, linear_cfg(C));
    std::vector<std::array<double, 2>> pts;
    for (const auto& r : p.x) pts.push_back({r[0], r[1]});
    const double oracle = th_test::grid_primal_minimum(pts, p.y, C);
    const double got = primal_objective(m, p.x, p.y);
    EXPECT_NEAR(got, oracle, 1e-2 * std::max(1.0, oracle)) << "trial " << trial;
  }
}

TEST(BinarySvm, KktAndEqualityConstraint) {
  Gen g(9);
  for (int trial = 0; trial < 40; ++trial) {
    Problem p;
    const std::size_t n = g.index(10, 60);
    for (std::size_t i = 0; i < n; ++i) {
      const int s = g.index(0, 1) ? 1 : -1;
      p.x.push_back({s + g.normal(), g.normal(), g.normal()});
      p.y.push_back(s);
    }
    p.y[0] = 1;
    p.y[1] = -1;
    const double C = g.uniform(0.05, 10.0);
    auto cfg = linear_cfg(C);
    cfg.tolerance = 1e-3;
    if (trial % 2) {
      cfg.kernel = KernelType::rbf;
    }
    const auto m = train_binary_svm(p.x, p.y, cfg);
    ASSERT_TRUE(m.converged);
    std::vector<double> alpha(n, 0.0);
    double balance = 0.0;
    for (std::size_t k = 0; k < m.alphas.size(); ++k) {
      alpha[m.support_indices[k]] = m.alphas[k];
      EXPECT_GE(m.alphas[k], 0.0);
      EXPECT_LE(m.alphas[k], C);
      balance += m.alphas[k] * m.support_labels[k];
    }
    EXPECT_NEAR(balance, 0.0, 1e-8);
    const double tol = 1e-3;
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = p.y[i] * decision_value(m, p.x[i]);
      if (alpha[i] == 0.0) EXPECT_GE(margin, 1.0 - tol);
      else if (alpha[i] < C) EXPECT_NEAR(margin, 1.0, tol);
      else EXPECT_LE(margin, 1.0 + tol);
    }
  }
}

TEST(BinarySvm, WeightVectorMatchesKernelForm) {
  Gen g(10);
  const auto d = th_test::blobs(30, 5, 2, 2.0, 3);
  FeatureRows x;
  std::vector<int> y;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto v = d.samples[i].values();
    x.emplace_back(v.begin(), v.end());
    y.push_back(d.labels[i] == 0 ? 1 : -1);
  }
  const auto m = train_binary_svm(x, y, linear_cfg(0.5));
  for (int t = 0; t < 100; ++t) {
    std::vector<double> q(5);
    for (auto& v : q) v = g.uniform(-6, 6);
    EXPECT_NEAR(decision_value(m, q), decision_value_kernel_form(m, q), 1e-8);
  }
}

TEST(BinarySvm, DualAscentIsMonotone) {
  Gen g(11);
  for (int trial = 0; trial < 10; ++trial) {
    Problem p;
    for (int i = 0; i < 40; ++i) {
      const int s = i % 2 ? 1 : -1;
      p.x.push_back({0.5 * s + g.normal(), g.normal()});
      p.y.push_back(s);
    }
    std::vector<double> yd(p.y.begin(), p.y.end());
    std::vector<double> trace;
    BinaryTrainOptions opts;
    opts.observer = [&](std::size_t, std::span<const double> a) {
      trace.push_back(dual_value(p.x, yd, a));
    };
    train_binary_svm(p.x, p.y, linear_cfg(1.0), opts);
    ASSERT_GT(trace.size(), 1u);
    for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_GE(trace[k], trace[k - 1] - 1e-12);
  }
}

TEST(BinarySvm, FeatureScalingKeepsLabels) {
  Gen g(12);
  Problem p;
  for (int i = 0; i < 40; ++i) {
    const int s = i % 2 ? 1 : -1;
    p.x.push_back({s + g.normal(), g.normal()});
    p.y.push_back(s);
  }
  const double c = 4.0, C = 2.0;
  FeatureRows scaled = p.x;
  for (auto& r : scaled)
    for (auto& v : r) v *= c;
  // With C' = C / c² the scaled problem has optimum w' = w / c, b' = b.
  const auto a = train_binary_svm(p.x, p.y, linear_cfg(C));
  const auto b = train_binary_svm(scaled, p.y, linear_cfg(C / (c * c)));
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> q{g.uniform(-3, 3), g.uniform(-3, 3)};
    const std::vector<double> qs{c * q[0], c * q[1]};
    const double da = decision_value(a, q);
    if (std::abs(da) < 1e-4) continue;
    EXPECT_EQ(predict_sign(a, q), predict_sign(b, qs));
  }
}

TEST(BinarySvm, Errors) {
  const FeatureRows x{{1, 2}, {3, 4}};
  EXPECT_THROW(train_binary_svm(x, std::vector<int>{1, 1}, linear_cfg(1)), Error);
  EXPECT_THROW(train_binary_svm(FeatureRows{{1, 2}, {NAN, 4}}, std::vector<int>{1, -1},
                                linear_cfg(1)),
               Error);
  EXPECT_THROW(train_binary_svm(x, std::vector<int>{1, -1}, linear_cfg(0)), Error);
  const auto m = train_binary_svm(x, std::vector<int>{1, -1}, linear_cfg(1));
  EXPECT_THROW(decision_value(m, std::vector<double>{1, 2, 3}), Error);
}

TEST(BinarySvm, GammaScale) {
  const FeatureRows x{{0, 2}, {2, 0}};
  // Entries {0, 2, 2, 0}: variance 1, d = 2.
  EXPECT_DOUBLE_EQ(gamma_scale(x), 0.5);
}

TEST(Ovo, PairCounts) {
  EXPECT_EQ(class_pairs(6).size(), 15u);
  EXPECT_EQ(class_pairs(3).size(), 3u);
  EXPECT_EQ(class_pairs(2).size(), 1u);
}

TEST(Ovo, TwoClassesMatchBinaryModel) {
  const auto d = th_test::blobs(20, 3, 2, 1.5, 5);
  const auto e = train_ovo(d, linear_cfg(1));
  ASSERT_EQ(e.models.size(), 1u);
  FeatureRows x;
  std::vector<int> y;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto v = d.samples[i].values();
    x.emplace_back(v.begin(), v.end());
    y.push_back(d.labels[i] == 0 ? 1 : -1);
  }
  const auto m = train_binary_svm(x, y, linear_cfg(1));
  for (const auto& r : x) EXPECT_EQ(predict_ovo(e, r), predict_sign(m, r) > 0 ? 0 : 1);
}

TEST(Ovo, SixClassesSeparableTrainingPoints) {
  const auto d = th_test::blobs(10, 8, 6, 0.3, 6);
  const auto e = train_ovo(d, linear_cfg(10), 2);
  EXPECT_EQ(e.models.size(), 15u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(predict_ovo(e, d.samples[i].values()), d.labels[i]);
}

TEST(Ovo, VoteTieBreaking) {
  const auto pairs = class_pairs(3);  // (0,1) (0,2) (1,2)
  // Unanimous for class 2.
  EXPECT_EQ(ovo_vote(pairs, std::vector<double>{1, -1, -1}, 3), 2);
  // Circular 0>1, 2>0, 1>2: one vote each; class 1 has the largest |margin| sum.
  std::vector<double> votes;
  EXPECT_EQ(ovo_vote(pairs, std::vector<double>{0.2, -0.3, 0.9}, 3, &votes), 1);
  EXPECT_EQ(votes, std::vector<double>({1, 1, 1}));
  // Full tie on both counts falls back to the lowest id.
  EXPECT_EQ(ovo_vote(pairs, std::vector<double>{0.5, -0.5, 0.5}, 3), 0);
}

TEST(Ovo, MissingClassIsNamed) {
  auto d = th_test::blobs(5, 2, 3, 1.0, 7);
  d = d.subset(std::vector<std::size_t>{0, 1, 3, 4});  // drops every class-2 sample
  try {
    train_ovo(d, linear_cfg(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("c2"), std::string::npos) << e.what();
  }
}

TEST(Ovo, ParallelTrainingIsDeterministic) {
  const auto d = th_test::blobs(15, 4, 4, 1.5, 8);
  const auto a = train_ovo(d, linear_cfg(1), 1);
  const auto b = train_ovo(d, linear_cfg(1), 3);
  for (std::size_t p = 0; p < a.models.size(); ++p) {
    EXPECT_EQ(a.models[p].alphas, b.models[p].alphas);
    EXPECT_EQ(a.models[p].bias, b.models[p].bias);
  }
}
