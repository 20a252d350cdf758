#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorhar/dataset.hpp"
#include "tensorhar/error.hpp"
#include "tensorhar/logreg.hpp"
#include "tensorhar/metrics.hpp"
#include "tensorhar/random.hpp"

namespace tensorhar {

enum class PartitionKind { iid, by_subject, dirichlet };

struct FedConfig {
  std::size_t n_clients = 10;
  std::size_t n_rounds = 10;
  std::size_t local_epochs = 5;
  double local_learning_rate = 0.1;
  PartitionKind partition = PartitionKind::iid;
  double dirichlet_alpha = 0.5;
  double client_fraction = 1.0;
  double C = 1.0;  // L2 strength is 1 / (C · total samples) on every client
  std::uint64_t seed = 0;
};

inline void validate(const FedConfig& cfg) {
  require(cfg.n_clients >= 1, ErrorKind::invalid_argument, "need at least one client");
  require(cfg.client_fraction > 0.0 && cfg.client_fraction <= 1.0,
          ErrorKind::invalid_argument, "client_fraction must lie in (0, 1], got ",
          cfg.client_fraction);
  require(cfg.local_learning_rate > 0.0, ErrorKind::invalid_argument,
          "local learning rate must be positive");
  require(cfg.C > 0.0, ErrorKind::invalid_argument, "C must be positive");
  if (cfg.partition == PartitionKind::dirichlet) {
    require(cfg.dirichlet_alpha > 0.0, ErrorKind::invalid_argument,
            "dirichlet alpha must be positive");
  }
}

inline const char* to_string(PartitionKind k) {
  switch (k) {
    case PartitionKind::iid: return "iid";
    case PartitionKind::by_subject: return "by_subject";
    case PartitionKind::dirichlet: return "dirichlet";
  }
  return "?";
}

// Index lists per client.
inline std::vector<std::vector<std::size_t>> partition_indices(const Dataset& d,
                                                               const FedConfig& cfg) {
  validate(cfg);
  require(!d.empty(), ErrorKind::empty_input, "cannot partition an empty dataset");
  const std::size_t K = cfg.n_clients;
  std::vector<std::vector<std::size_t>> shards(K);
  Rng rng = make_rng(cfg.seed, "fed-partition");

  switch (cfg.partition) {
    case PartitionKind::iid: {
      std::vector<std::size_t> order(d.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, rng);
      const std::size_t base = d.size() / K, extra = d.size() % K;
      std::size_t pos = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t len = base + (k < extra ? 1 : 0);
        shards[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + len));
        std::sort(shards[k].begin(), shards[k].end());
        pos += len;
      }
      break;
    }
    case PartitionKind::by_subject: {
      std::map<int, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < d.size(); ++i) groups[d.subjects[i]].push_back(i);
      require(groups.size() >= K, ErrorKind::invalid_argument, "by_subject partition needs at least ",
              K, " subjects, found ", groups.size());
      std::vector<int> subjects;
      for (const auto& [s, _] : groups) subjects.push_back(s);
      shuffle(subjects, rng);
      for (std::size_t j = 0; j < subjects.size(); ++j) {
        auto& shard = shards[j % K];
        const auto& members = groups[subjects[j]];
        shard.insert(shard.end(), members.begin(), members.end());
      }
      break;
    }
    case PartitionKind::dirichlet: {
      // Each class is split across clients by proportions ~ Dirichlet(alpha).
      std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);
      for (std::size_t c = 0; c < d.n_classes(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (static_cast<std::size_t>(d.labels[i]) == c) members.push_back(i);
        }
        if (members.empty()) continue;
        shuffle(members, rng);
        std::vector<double> p(K);
        double total = 0.0;
        for (auto& v : p) {
          v = gamma(rng);
          total += v;
        }
        if (total <= 0.0) std::fill(p.begin(), p.end(), total = 1.0);
        std::size_t pos = 0;
        double cum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          cum += p[k] / total;
          const std::size_t end =
              k + 1 == K ? members.size()
                         : std::min(members.size(), static_cast<std::size_t>(std::llround(
                                                        cum * static_cast<double>(members.size()))));
          for (; pos < end; ++pos) shards[k].push_back(members[pos]);
        }
      }
      for (auto& s : shards) std::sort(s.begin(), s.end());
      break;
    }
  }
  return shards;
}

inline std::vector<Dataset> partition_dataset(const Dataset& d, const FedConfig& cfg) {
  std::vector<Dataset> out;
  for (const auto& shard : partition_indices(d, cfg)) out.push_back(d.subset(shard));
  return out;
}

// What a client sends back: parameters and a sample count, never data.
struct ClientUpdate {
  LinearParams params;
  std::size_t n_samples = 0;
};

// local_epochs full-batch gradient steps from the global model.
inline LinearParams local_train(const LinearParams& global, const Dataset& shard,
                                const FedConfig& cfg, double l2) {
  require(!shard.empty(), ErrorKind::empty_input, "local training on an empty shard");
  LinearParams p = global;
  const auto rows = row_views(shard);
  for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
    p = gradient_step(p, rows, shard.labels, l2, cfg.local_learning_rate);
  }
  return p;
}

inline LinearParams fed_avg(std::span<const ClientUpdate> updates) {
  require(!updates.empty(), ErrorKind::empty_input, "no client updates to aggregate");
  const auto& first = updates.front().params;
  std::size_t total = 0;
  for (const auto& u : updates) {
    require(u.params.n_classes == first.n_classes && u.params.n_features == first.n_features &&
                u.params.weights.size() == first.weights.size() &&
                u.params.bias.size() == first.bias.size(),
            ErrorKind::dimension_mismatch, "client parameter shapes differ");
    require(u.n_samples > 0, ErrorKind::invalid_argument, "client sample counts must be positive");
    total += u.n_samples;
  }
  LinearParams avg = LinearParams::zeros(first.n_classes, first.n_features);
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.n_samples) / static_cast<double>(total);
    for (std::size_t t = 0; t < avg.weights.size(); ++t) avg.weights[t] += w * u.params.weights[t];
    for (std::size_t t = 0; t < avg.bias.size(); ++t) avg.bias[t] += w * u.params.bias[t];
  }
  return avg;
}

struct FedRoundLog {
  std::size_t round = 0;  // 0 = initial model
  std::vector<std::size_t> clients;
  std::vector<std::size_t> n_k;
  LinearParams global;
  double accuracy = 0.0;
  std::vector<std::string> warnings;
};

inline double linear_accuracy(const LinearParams& p, const Dataset& test) {
  if (test.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (predict_linear(p, test.samples[i].values()) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

inline std::vector<FedRoundLog> run_federation(const Dataset& train, const Dataset& test,
                                               const FedConfig& cfg, int jobs = 1) {
  validate(cfg);
  validate(train);
  const auto shards = partition_dataset(train, cfg);
  const double l2 = l2_strength(cfg.C, train.size());
  LinearParams global =
      LinearParams::zeros(train.n_classes(), shape_size(train.sample_shape()));
  std::vector<FedRoundLog> log;
  log.push_back({0, {}, {}, global, linear_accuracy(global, test), {}});
  Rng select_rng = make_rng(cfg.seed, "fed-client-selection");
  const auto per_round = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.client_fraction * static_cast<double>(cfg.n_clients) - 1e-9)));

  for (std::size_t r = 1; r <= cfg.n_rounds; ++r) {
    FedRoundLog entry;
    entry.round = r;
    std::vector<std::size_t> chosen(cfg.n_clients);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (per_round < cfg.n_clients) {
      shuffle(chosen, select_rng);
      chosen.resize(per_round);
      std::sort(chosen.begin(), chosen.end());
    }
    std::vector<std::size_t> active;
    for (const auto k : chosen) {
      if (shards[k].empty()) {
        entry.warnings.push_back("client " + std::to_string(k) + " has no samples, skipped");
      } else {
        active.push_back(k);
      }
    }
    std::vector<ClientUpdate> updates(active.size());
    parallel_for(active.size(), jobs, [&](std::size_t j) {
      updates[j] = {local_train(global, shards[active[j]], cfg, l2), shards[active[j]].size()};
    });
    if (!updates.empty()) global = fed_avg(updates);
    entry.clients = active;
    for (const auto& u : updates) entry.n_k.push_back(u.n_samples);
    entry.global = global;
    entry.accuracy = linear_accuracy(global, test);
    log.push_back(std::move(entry));
  }
  return log;
}

inline nlohmann::json to_json(const FedRoundLog& r) {
  nlohmann::json j{{"round", r.round},
                   {"clients", r.clients},
                   {"n_k", r.n_k},
                   {"accuracy", r.accuracy}};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

inline std::string round_log_ndjson(const std::vector<FedRoundLog>& log) {
  std::string out;
  for (const auto& r : log) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace tensorhar
