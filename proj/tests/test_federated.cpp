#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <type_traits>

#include "tensorhar/federated.hpp"
#include "test_support.hpp"

using namespace tensorhar;
using th_test::Gen;

namespace {

Dataset with_subjects(std::size_t n_subjects, std::size_t per_subject, std::uint64_t seed) {
  auto d = th_test::blobs(n_subjects * per_subject / 3 + 1, 4, 3, 1.5, seed);
  d = d.subset([&] {
    std::vector<std::size_t> idx(n_subjects * per_subject);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }());
  for (std::size_t i = 0; i < d.size(); ++i) d.subjects[i] = static_cast<int>(i / per_subject) + 1;
  return d;
}

LinearParams random_params(Gen& g, std::size_t k, std::size_t d) {
  std::vector<double> theta(k * d + k);
  for (auto& v : theta) v = g.uniform(-1, 1);
  return unflatten(theta, k, d);
}

void expect_params_near(const LinearParams& a, const LinearParams& b, double tol) {
  const auto x = flatten(a), y = flatten(b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(x[t], y[t], tol) << "parameter " << t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Partitioning

TEST(Partition, IidHundredByTen) {
  const auto d = th_test::blobs(25, 2, 4, 1.0, 1);
  FedConfig cfg;
  const auto shards = partition_indices(d, cfg);
  ASSERT_EQ(shards.size(), 10u);
  std::set<std::size_t> all;
  for (const auto& s : shards) {
    EXPECT_EQ(s.size(), 10u);
    all.insert(s.begin(), s.end());
  }
  EXPECT_EQ(all.size(), 100u);
}

TEST(Partition, IidSizesDifferByAtMostOne) {
  Gen g(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = th_test::blobs(g.index(1, 30), 2, 2, 1.0, trial);
    FedConfig cfg;
    cfg.n_clients = g.index(1, 12);
    cfg.seed = trial;
    const auto shards = partition_indices(d, cfg);
    std::size_t lo = d.size(), hi = 0, total = 0;
    for (const auto& s : shards) lo = std::min(lo, s.size()), hi = std::max(hi, s.size()), total += s.size();
    EXPECT_LE(hi - lo, 1u);
    EXPECT_EQ(total, d.size());
  }
}

TEST(Partition, BySubjectKeepsSubjectsWhole) {
  const auto d = with_subjects(15, 6, 3);
  FedConfig cfg;
  cfg.partition = PartitionKind::by_subject;
  const auto shards = partition_indices(d, cfg);
  std::map<int, std::size_t> owner;
  std::size_t covered = 0;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    EXPECT_FALSE(shards[k].empty());
    for (const auto i : shards[k]) {
      const auto [it, fresh] = owner.emplace(d.subjects[i], k);
      EXPECT_EQ(it->second, k);
      ++covered;
    }
  }
  EXPECT_EQ(owner.size(), 15u);
  EXPECT_EQ(covered, d.size());
  cfg.n_clients = 16;
  EXPECT_THROW(partition_indices(d, cfg), Error);
}

TEST(Partition, DirichletIsSeededAndCovering) {
  const auto d = th_test::blobs(40, 2, 3, 1.0, 4);
  FedConfig cfg;
  cfg.partition = PartitionKind::dirichlet;
  cfg.dirichlet_alpha = 0.5;
  cfg.seed = 17;
  const auto a = partition_indices(d, cfg), b = partition_indices(d, cfg);
  EXPECT_EQ(a, b);
  std::vector<int> seen(d.size(), 0);
  for (const auto& s : a)
    for (const auto i : s) ++seen[i];
  for (const int s : seen) EXPECT_EQ(s, 1);
  cfg.seed = 18;
  EXPECT_NE(partition_indices(d, cfg), a);
}

TEST(Partition, ConfigValidation) {
  FedConfig cfg;
  cfg.client_fraction = 0.0;
  EXPECT_THROW(validate(cfg), Error);
  cfg.client_fraction = 1.5;
  EXPECT_THROW(validate(cfg), Error);
  cfg = FedConfig{};
  cfg.n_clients = 0;
  EXPECT_THROW(validate(cfg), Error);
}

// ---------------------------------------------------------------------------
// Local training and aggregation

TEST(LocalTrain, ZeroEpochsReturnsGlobal) {
  Gen g(5);
  const auto d = th_test::blobs(5, 3, 2, 1.0, 5);
  const auto p = random_params(g, 2, 3);
  FedConfig cfg;
  cfg.local_epochs = 0;
  EXPECT_EQ(local_train(p, d, cfg, 0.1), p);
  EXPECT_THROW(local_train(p, Dataset{}, cfg, 0.1), Error);
}

TEST(LocalTrain, StepFollowsFiniteDifferenceGradient) {
  Gen g(6);
  const auto d = th_test::blobs(6, 3, 3, 1.0, 6);
  const auto p = random_params(g, 3, 3);
  FedConfig cfg;
  cfg.local_epochs = 1;
  cfg.local_learning_rate = 0.05;
  const double l2 = 0.02;
  std::vector<std::vector<double>> rows;
  for (const auto& s : d.samples) rows.emplace_back(s.values().begin(), s.values().end());
  const auto numeric = th_test::numeric_gradient(
      [&](const std::vector<double>& t) { return th_test::reference_logreg_loss(t, rows, d.labels, 3, l2); },
      flatten(p));
  const auto stepped = flatten(local_train(p, d, cfg, l2));
  const auto start = flatten(p);
  for (std::size_t t = 0; t < start.size(); ++t) {
    const double implied = (start[t] - stepped[t]) / cfg.local_learning_rate;
    EXPECT_NEAR(implied, numeric[t], 1e-5 * std::max(1.0, std::abs(numeric[t])));
  }
}

TEST(FedAvg, ScalarExample) {
  LinearParams a = LinearParams::zeros(1, 1), b = LinearParams::zeros(1, 1);
  b.weights[0] = 4.0;
  b.bias[0] = 4.0;
  const std::vector<ClientUpdate> u{{a, 1}, {b, 3}};
  const auto avg = fed_avg(u);
  EXPECT_DOUBLE_EQ(avg.weights[0], 3.0);
  EXPECT_DOUBLE_EQ(avg.bias[0], 3.0);
}

TEST(FedAvg, IdenticalModelsAndPermutation) {
  Gen g(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = g.index(2, 5), d = g.index(1, 6), K = g.index(1, 8);
    const auto same = random_params(g, k, d);
    std::vector<ClientUpdate> ident, mixed;
    for (std::size_t c = 0; c < K; ++c) {
      ident.push_back({same, g.index(1, 50)});
      mixed.push_back({random_params(g, k, d), g.index(1, 50)});
    }
    expect_params_near(fed_avg(ident), same, 1e-12);
    const auto ref = fed_avg(mixed);
    std::shuffle(mixed.begin(), mixed.end(), g.rng);
    expect_params_near(fed_avg(mixed), ref, 1e-12);
  }
}

TEST(FedAvg, ShapeMismatchAndZeroCount) {
  const std::vector<ClientUpdate> bad{{LinearParams::zeros(2, 3), 1}, {LinearParams::zeros(2, 4), 1}};
  EXPECT_THROW(fed_avg(bad), Error);
  const std::vector<ClientUpdate> zero{{LinearParams::zeros(2, 3), 0}};
  EXPECT_THROW(fed_avg(zero), Error);
}

TEST(FedAvg, MessagesCarryNoSampleData) {
  static_assert(std::is_same_v<decltype(ClientUpdate::params), LinearParams>);
  static_assert(std::is_same_v<decltype(ClientUpdate::n_samples), std::size_t>);
  static_assert(sizeof(ClientUpdate) == sizeof(LinearParams) + sizeof(std::size_t) ||
                sizeof(ClientUpdate) >= sizeof(LinearParams));
  const LinearParams p = LinearParams::zeros(6, 561);
  EXPECT_EQ(flatten(p).size(), 6u * 561u + 6u);
}

TEST(FedAvg, SingleStepEqualsCentralizedStep) {
  Gen g(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = th_test::blobs(g.index(5, 20), 4, 3, 2.0, 100 + trial);
    FedConfig cfg;
    cfg.n_clients = g.index(1, 6);
    cfg.local_epochs = 1;
    cfg.seed = trial;
    const double l2 = l2_strength(cfg.C, d.size());
    const auto init = random_params(g, 3, 4);
    std::vector<ClientUpdate> updates;
    for (const auto& shard : partition_dataset(d, cfg)) {
      if (shard.empty()) continue;
      updates.push_back({local_train(init, shard, cfg, l2), shard.size()});
    }
    const auto central = gradient_step(init, row_views(d), d.labels, l2, cfg.local_learning_rate);
    expect_params_near(fed_avg(updates), central, 1e-10);
  }
}

TEST(FedAvg, IdenticalShardsEqualCentralizedStep) {
  const auto d = th_test::blobs(8, 3, 2, 1.0, 9);
  Gen g(9);
  const auto init = random_params(g, 2, 3);
  FedConfig cfg;
  cfg.local_epochs = 1;
  std::vector<ClientUpdate> updates;
  for (int k = 0; k < 4; ++k) updates.push_back({local_train(init, d, cfg, 0.01), d.size()});
  expect_params_near(fed_avg(updates), gradient_step(init, row_views(d), d.labels, 0.01, 0.1), 1e-10);
}

// ---------------------------------------------------------------------------
// Full simulation

TEST(Federation, ZeroRoundsLogsInitialModelOnly) {
  const auto d = th_test::blobs(10, 3, 3, 1.0, 10);
  FedConfig cfg;
  cfg.n_rounds = 0;
  const auto log = run_federation(d, d, cfg);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].round, 0u);
  EXPECT_NEAR(log[0].accuracy, 1.0 / 3.0, 1e-12);
}

TEST(Federation, OneClientMatchesCentralizedDescent) {
  const auto d = th_test::blobs(15, 4, 3, 2.0, 11);
  FedConfig cfg;
  cfg.n_clients = 1;
  cfg.n_rounds = 6;
  cfg.local_epochs = 3;
  const auto log = run_federation(d, d, cfg);
  LinearParams p = LinearParams::zeros(3, 4);
  const double l2 = l2_strength(cfg.C, d.size());
  for (std::size_t r = 1; r <= cfg.n_rounds; ++r) {
    for (std::size_t e = 0; e < cfg.local_epochs; ++e) p = gradient_step(p, row_views(d), d.labels, l2, 0.1);
    EXPECT_EQ(log[r].global, p);
    EXPECT_EQ(log[r].accuracy, linear_accuracy(p, d));
  }
}

TEST(Federation, FullParticipationCountsAndDeterminism) {
  const auto d = with_subjects(15, 8, 12);
  FedConfig cfg;
  cfg.n_rounds = 4;
  cfg.seed = 3;
  const auto a = run_federation(d, d, cfg, 1);
  const auto b = run_federation(d, d, cfg, 3);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t r = 1; r < a.size(); ++r) {
    std::size_t total = 0;
    for (const auto n : a[r].n_k) total += n;
    EXPECT_EQ(total, d.size());
    EXPECT_EQ(a[r].global, b[r].global);
    EXPECT_GE(a[r].accuracy, 0.0);
    EXPECT_LE(a[r].accuracy, 1.0);
  }
  EXPECT_EQ(round_log_ndjson(a), round_log_ndjson(b));
}

TEST(Federation, PartialParticipationAndEmptyShards) {
  const auto d = th_test::blobs(4, 2, 2, 1.0, 13);  // 8 samples
  FedConfig cfg;
  cfg.n_clients = 10;
  cfg.n_rounds = 3;
  const auto log = run_federation(d, d, cfg);
  EXPECT_EQ(log[1].clients.size(), 8u);
  EXPECT_EQ(log[1].warnings.size(), 2u);
  cfg.client_fraction = 0.3;
  cfg.n_clients = 5;
  const auto partial = run_federation(d, d, cfg);
  for (std::size_t r = 1; r < partial.size(); ++r) EXPECT_EQ(partial[r].clients.size(), 2u);
  const auto line = nlohmann::json::parse(round_log_ndjson(partial).substr(0, round_log_ndjson(partial).find('\n')));
  for (const char* key : {"round", "clients", "n_k", "accuracy"}) EXPECT_TRUE(line.contains(key)) << key;
}
