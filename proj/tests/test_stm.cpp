#include <gtest/gtest.h>

#include <cmath>

#include "tensorhar/stm.hpp"
#include "test_support.hpp"

using namespace tensorhar;
using th_test::Gen;

namespace {

StmBinaryModel fixed_model(std::vector<std::vector<double>> modes, double b, Shape shape) {
  StmBinaryModel m;
  m.shape = std::move(shape);
  m.modes = std::move(modes);
  m.bias = b;
  m.last_mode = m.modes.size() - 1;
  return m;
}

// Element-by-element Σ x[i,j] u[i] v[j] for order 2.
double brute_contract(const Tensor& x, const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s += x[i * v.size() + j] * u[i] * v[j];
  return s;
}

std::vector<double> unit_vector(Gen& g, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  for (auto& e : v) {
    e = g.normal();
    norm += e * e;
  }
  for (auto& e : v) e /= std::sqrt(norm);
  return v;
}

double abs_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return std::abs(ab) / std::sqrt(aa * bb);
}

struct Rank1 {
  std::vector<Tensor> xs;
  std::vector<int> y;
  std::vector<double> u, v;
};

Rank1 rank1_problem(std::uint64_t seed, std::size_t n, std::size_t I, std::size_t J, double noise) {
  Gen g(seed);
  Rank1 p;
  p.u = unit_vector(g, I);
  p.v = unit_vector(g, J);
  for (std::size_t s = 0; s < n; ++s) {
    const int label = s % 2 ? 1 : -1;
    std::vector<double> vals(I * J);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t j = 0; j < J; ++j)
        vals[i * J + j] = label * 2.0 * p.u[i] * p.v[j] + noise * g.normal();
    p.xs.emplace_back(Shape{I, J}, std::move(vals));
    p.y.push_back(label);
  }
  return p;
}

StmConfig tight(double C) {
  StmConfig cfg;
  cfg.C = C;
  cfg.inner_tolerance = 1e-6;
  cfg.inner_max_passes = 10000;
  return cfg;
}

}  // namespace

TEST(ContractExcept, Examples) {
  const Tensor x({2, 2}, {0, 5, 2, 0});
  const std::vector<std::vector<double>> modes{{1, 0}, {0, 1}};
  EXPECT_EQ(contract_except(x, modes, 0), std::vector<double>({5, 0}));
  const Tensor v = Tensor::vector({3, -1, 2});
  const std::vector<std::vector<double>> one{{9, 9, 9}};
  EXPECT_EQ(contract_except(v, one, 0), std::vector<double>({3, -1, 2}));
  EXPECT_THROW(contract_except(x, one, 0), Error);
}

TEST(ContractExcept, AgreesWithFullContraction) {
  Gen g(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto shape = g.shape(4, 5, 200);
    const auto x = g.tensor(shape);
    std::vector<std::vector<double>> modes;
    for (const auto e : shape) {
      std::vector<double> w(e);
      for (auto& v : w) v = g.uniform(-1, 1);
      modes.push_back(w);
    }
    const auto m = fixed_model(modes, g.uniform(-1, 1), shape);
    const double full = stm_decision(m, x);
    for (std::size_t n = 0; n < shape.size(); ++n) {
      const auto xhat = contract_except(x, m, n);
      double s = m.bias;
      for (std::size_t k = 0; k < xhat.size(); ++k) s += xhat[k] * modes[n][k];
      EXPECT_NEAR(s, full, 1e-10);
    }
    if (shape.size() == 2) {
      EXPECT_NEAR(full - m.bias, brute_contract(x, modes[0], modes[1]), 1e-10);
    }
  }
}

TEST(PredictStm, Examples) {
  const auto m = fixed_model({{1, 0}, {0, 1}}, 0.0, {2, 2});
  const Tensor x({2, 2}, {0, 5, 2, 0});
  const auto p = predict_stm(m, x);
  EXPECT_EQ(p.label, 1);
  EXPECT_DOUBLE_EQ(p.margin, 5.0);
  EXPECT_EQ(predict_stm(m, Tensor({2, 2}, {0, -5, -2, 0})).label, -1);
  const auto biased = fixed_model({{1, 0}, {0, 1}}, -0.25, {2, 2});
  EXPECT_EQ(predict_stm(biased, Tensor(Shape{2, 2})).label, -1);
  EXPECT_THROW(predict_stm(m, Tensor(Shape{2, 3})), Error);
}

TEST(TrainStm, OrderOneMatchesSvm) {
  Gen g(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.index(4, 30), d = g.index(1, 6);
    std::vector<Tensor> xs;
    FeatureRows rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      const int s = i % 2 ? 1 : -1;
      std::vector<double> r(d);
      for (auto& v : r) v = 0.7 * s + g.normal();
      rows.push_back(r);
      xs.push_back(Tensor::vector(r));
      y.push_back(s);
    }
    const double C = g.uniform(0.1, 5.0);
    const auto stm = train_stm_binary(xs, y, tight(C));
    SvmConfig sc;
    sc.C = C;
    sc.tolerance = 1e-6;
    sc.max_passes = 10000;
    const auto svm = train_binary_svm(rows, y, sc);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(predict_stm(stm, xs[i]).label, predict_sign(svm, rows[i]));
    }
    EXPECT_NEAR(stm_objective(stm, xs, y, C), primal_objective(svm, rows, y), 1e-6);
  }
}

TEST(TrainStm, RankOneAlignment) {
  const auto p = rank1_problem(3, 60, 8, 5, 0.05);
  const auto m = train_stm_binary(p.xs, p.y, tight(1.0));
  for (std::size_t i = 0; i < p.xs.size(); ++i) EXPECT_EQ(predict_stm(m, p.xs[i]).label, p.y[i]);
  EXPECT_GT(abs_cosine(m.modes[0], p.u), 0.95);
  EXPECT_GT(abs_cosine(m.modes[1], p.v), 0.95);
  EXPECT_TRUE(m.converged);
  EXPECT_LT(m.outer_iterations, 50u);
}

TEST(TrainStm, SymmetricPairHasZeroBias) {
  const Tensor a({2, 3}, {1, -2, 0.5, 3, 1, -1});
  Tensor neg = a;
  for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -neg[k];
  const std::vector<Tensor> xs{a, neg};
  const auto m = train_stm_binary(xs, std::vector<int>{1, -1}, tight(10));
  EXPECT_NEAR(m.bias, 0.0, 1e-8);
}

TEST(TrainStm, ObjectiveNonIncreasing) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const auto p = rank1_problem(seed, 40, 6, 4, 1.0);
    const auto m = train_stm_binary(p.xs, p.y, tight(0.5));
    ASSERT_FALSE(m.objective_trace.empty());
    for (std::size_t k = 1; k < m.objective_trace.size(); ++k) {
      EXPECT_LE(m.objective_trace[k], m.objective_trace[k - 1] + 1e-8);
    }
    // The trace is the real pooled objective, recomputed here independently.
    EXPECT_NEAR(m.objective_trace.back(), stm_objective(m, p.xs, p.y, 0.5), 1e-9);
  }
}

TEST(TrainStm, ConvergesOnFixtures) {
  for (std::uint64_t seed = 30; seed < 36; ++seed) {
    const auto p = rank1_problem(seed, 40, 5, 3, 0.3);
    StmConfig cfg = tight(1.0);
    cfg.max_outer_iters = 50;
    cfg.convergence_tol = 1e-4;
    const auto m = train_stm_binary(p.xs, p.y, cfg);
    EXPECT_TRUE(m.converged) << "seed " << seed;
    EXPECT_LT(m.outer_iterations, 50u);
  }
}

TEST(TrainStm, ScaleGauge) {
  Gen g(4);
  const auto p = rank1_problem(5, 30, 4, 6, 0.5);
  const auto m = train_stm_binary(p.xs, p.y, tight(1.0));
  for (const double c : {0.01, 0.5, 3.0, 250.0}) {
    auto scaled = m;
    for (auto& v : scaled.modes[0]) v *= c;
    for (auto& v : scaled.modes[1]) v /= c;
    for (int t = 0; t < 50; ++t) {
      const auto x = g.tensor({4, 6}, 3.0);
      EXPECT_NEAR(stm_decision(scaled, x), stm_decision(m, x), 1e-10);
    }
  }
}

TEST(TrainStm, UnitWeightsReproduceUnweighted) {
  const auto p = rank1_problem(6, 30, 5, 4, 0.8);
  const auto plain = train_stm_binary(p.xs, p.y, tight(1.0));
  auto cfg = tight(1.0);
  cfg.weighting = StmWeighting::explicit_;
  cfg.sample_weights.assign(p.xs.size(), 1.0);
  const auto weighted = train_stm_binary(p.xs, p.y, cfg);
  EXPECT_EQ(plain.modes, weighted.modes);
  EXPECT_EQ(plain.bias, weighted.bias);
}

TEST(TrainStm, DistanceWeightsPenalizeOutliers) {
  auto p = rank1_problem(7, 20, 4, 4, 0.1);
  for (std::size_t k = 0; k < p.xs[0].size(); ++k) p.xs[0][k] += 5.0;
  const auto w = distance_based_weights(p.xs, p.y, 1.0);
  for (const double s : w) {
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_EQ(std::min_element(w.begin(), w.end()) - w.begin(), 0);
  auto cfg = tight(1.0);
  cfg.weighting = StmWeighting::distance;
  EXPECT_NO_THROW(train_stm_binary(p.xs, p.y, cfg));
}

TEST(TrainStm, ZeroModeIsReinitialized) {
  // Every sample is the same tensor, so the first subproblem returns w = 0.
  const Tensor x({2, 2}, {0.3, 0.1, -0.2, 0.4});
  const std::vector<Tensor> xs{x, x, x, x};
  const auto m = train_stm_binary(xs, std::vector<int>{1, -1, 1, -1}, tight(1.0));
  ASSERT_FALSE(m.events.empty());
  EXPECT_NE(m.events.front().find("reinitialized"), std::string::npos);
  for (const auto& w : m.modes)
    for (const double v : w) EXPECT_TRUE(std::isfinite(v));
}

TEST(TrainStm, Errors) {
  const std::vector<Tensor> xs{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 3})};
  EXPECT_THROW(train_stm_binary(xs, std::vector<int>{1, -1}, StmConfig{}), Error);
  const std::vector<Tensor> same{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 2}, {0, 1, 1, 0})};
  EXPECT_THROW(train_stm_binary(same, std::vector<int>{1, 1}, StmConfig{}), Error);
  StmConfig bad;
  bad.C = -1;
  EXPECT_THROW(train_stm_binary(same, std::vector<int>{1, -1}, bad), Error);
  StmConfig ew;
  ew.weighting = StmWeighting::explicit_;
  ew.sample_weights = {1.0};
  EXPECT_THROW(train_stm_binary(same, std::vector<int>{1, -1}, ew), Error);
}

TEST(StmOvo, SixClassesFifteenModels) {
  Gen g(8);
  Dataset d;
  d.label_map = LabelMap::six_class();
  std::vector<Tensor> protos;
  for (int c = 0; c < 6; ++c) protos.push_back(g.tensor({6, 3}, 2.0));
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 6; ++c) {
      Tensor t = protos[c];
      for (std::size_t k = 0; k < t.size(); ++k) t[k] += 0.1 * g.normal();
      d.add(t, c, 0);
    }
  const auto e = train_stm_ovo(d, StmConfig{}, 2);
  EXPECT_EQ(e.models.size(), 15u);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += predict_stm_ovo(e, d.samples[i]) == d.labels[i];
  EXPECT_GE(correct, d.size() * 9 / 10);
  const auto serial = train_stm_ovo(d, StmConfig{}, 1);
  for (std::size_t p = 0; p < e.models.size(); ++p) EXPECT_EQ(e.models[p].modes, serial.models[p].modes);
}

TEST(StmOvo, TwoClassesMatchBinary) {
  const auto p = rank1_problem(9, 24, 3, 4, 0.5);
  Dataset d;
  d.label_map = LabelMap({"pos", "neg"});
  for (std::size_t i = 0; i < p.xs.size(); ++i) d.add(p.xs[i], p.y[i] > 0 ? 0 : 1, 0);
  const auto e = train_stm_ovo(d, StmConfig{});
  ASSERT_EQ(e.models.size(), 1u);
  const auto m = train_stm_binary(p.xs, p.y, StmConfig{});
  EXPECT_EQ(e.models[0].modes, m.modes);
  for (const auto& x : p.xs) EXPECT_EQ(predict_stm_ovo(e, x), predict_stm(m, x).label > 0 ? 0 : 1);
}
