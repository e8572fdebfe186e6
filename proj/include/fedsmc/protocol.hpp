#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fedsmc/data.hpp"
#include "fedsmc/errors.hpp"
#include "fedsmc/metrics.hpp"
#include "fedsmc/model.hpp"
#include "fedsmc/params.hpp"
#include "fedsmc/rng.hpp"
#include "fedsmc/sharing.hpp"

namespace fedsmc {

enum class Strategy { fedavg, dp, smc };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fedavg: return "fedavg";
    case Strategy::dp: return "dp";
    case Strategy::smc: return "smc";
  }
  throw UsageError("strategy: unknown tag");
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "fedavg") return Strategy::fedavg;
  if (s == "dp") return Strategy::dp;
  if (s == "smc") return Strategy::smc;
  throw ConfigError("strategy: unknown value '" + s +
                    "' (expected fedavg, dp, or smc)");
}

// Equal-size partition of hospitals [1..K] into M clusters; members are
// kept sorted within each cluster.
struct ClusterAssignment {
  int cluster_count = 0;
  std::vector<std::vector<int>> members;
};

// Seeded uniform permutation of [1..K], chunked into M groups of K/M.
inline ClusterAssignment assign_clusters(int hospitals, int clusters,
                                         std::mt19937_64& stream) {
  if (hospitals < 1) throw ConfigError("hospitals: must be >= 1");
  if (clusters < 1) throw ConfigError("clusters: must be >= 1");
  if (hospitals % clusters != 0) {
    throw ConfigError("clusters: hospitals (" + std::to_string(hospitals) +
                      ") not divisible by clusters (" +
                      std::to_string(clusters) + ")");
  }
  std::vector<int> perm(hospitals);
  std::iota(perm.begin(), perm.end(), 1);
  std::shuffle(perm.begin(), perm.end(), stream);
  ClusterAssignment assignment;
  assignment.cluster_count = clusters;
  const int size = hospitals / clusters;
  for (int c = 0; c < clusters; ++c) {
    std::vector<int> group(perm.begin() + c * size,
                           perm.begin() + (c + 1) * size);
    std::sort(group.begin(), group.end());
    assignment.members.push_back(std::move(group));
  }
  return assignment;
}

inline int cluster_of(const ClusterAssignment& assignment, int hospital) {
  for (int c = 0; c < assignment.cluster_count; ++c) {
    for (int m : assignment.members[c]) {
      if (m == hospital) return c;
    }
  }
  throw ProtocolError("cluster_of: hospital " + std::to_string(hospital) +
                      " not assigned to any cluster");
}

// Participant id 0 is the server; k >= 1 is hospital k.
constexpr int kServer = 0;

enum class MessageKind { broadcast_weights, share, masked_sum, client_weights };

inline std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::broadcast_weights: return "broadcast_weights";
    case MessageKind::share: return "share";
    case MessageKind::masked_sum: return "masked_sum";
    case MessageKind::client_weights: return "client_weights";
  }
  throw UsageError("message kind: unknown tag");
}

inline MessageKind parse_message_kind(const std::string& s) {
  if (s == "broadcast_weights") return MessageKind::broadcast_weights;
  if (s == "share") return MessageKind::share;
  if (s == "masked_sum") return MessageKind::masked_sum;
  if (s == "client_weights") return MessageKind::client_weights;
  throw ParseError("message kind: unknown value '" + s + "'");
}

// One simulated network transmission. Self-shares are computed locally and
// never appear as messages.
struct Message {
  int round = 0;
  int sender = kServer;
  int receiver = kServer;
  MessageKind kind = MessageKind::broadcast_weights;
  WeightVector payload;
};

// Accounting model: 8 bytes per parameter plus a fixed 32-byte header.
inline std::size_t message_byte_size(const Message& m) {
  return m.payload.size() * 8 + 32;
}

using MessageLog = std::vector<Message>;

// Adds iid Gaussian noise of the given std to every coordinate.
// sigma == 0 returns w unchanged without consuming the stream.
inline WeightVector dp_perturb(const WeightVector& w, double sigma,
                               std::mt19937_64& stream) {
  if (!(sigma >= 0.0)) throw UsageError("dp_sigma: must be >= 0");
  if (sigma == 0.0) return w;
  std::normal_distribution<double> gauss(0.0, sigma);
  WeightVector out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] + gauss(stream);
  require_finite(out, "dp_perturb");
  return out;
}

struct RunConfig {
  Strategy strategy = Strategy::smc;
  int hospitals = 6;     // K
  int clusters = 2;      // M
  int rounds = 300;      // T
  int local_epochs = 1;  // E
  int batch_size = 32;   // B
  OptimizerSpec optimizer;
  double dp_sigma = 0.03;
  std::uint64_t master_seed = 42;
  ModelSpec model;
  DataConfig data;
  int repeats = 5;
  // Clusters of size one hand the server each hospital's raw weights; the
  // smc strategy rejects them unless this override is set.
  bool allow_degenerate_clusters = false;
  std::vector<Strategy> compare_strategies = {Strategy::fedavg, Strategy::dp,
                                              Strategy::smc};
};

inline void validate(const RunConfig& cfg) {
  if (cfg.hospitals < 1) throw ConfigError("hospitals: must be >= 1");
  if (cfg.clusters < 1) throw ConfigError("clusters: must be >= 1");
  if (cfg.hospitals % cfg.clusters != 0) {
    throw ConfigError("clusters: hospitals (" + std::to_string(cfg.hospitals) +
                      ") not divisible by clusters (" +
                      std::to_string(cfg.clusters) + ")");
  }
  if (cfg.rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (cfg.local_epochs < 1) throw ConfigError("local_epochs: must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (!(cfg.dp_sigma >= 0.0)) throw ConfigError("dp_sigma: must be >= 0");
  if (!(cfg.optimizer.eta >= 0.0)) {
    throw ConfigError("optimizer.eta: must be >= 0");
  }
  if (cfg.repeats < 1) throw ConfigError("repeats: must be >= 1");
  if (cfg.data.clients != cfg.hospitals) {
    throw ConfigError("data.clients: must equal hospitals");
  }
  if (cfg.data.input_dim != cfg.model.input_dim) {
    throw ConfigError("data.input_dim: must equal model.input_dim");
  }
  if (cfg.strategy == Strategy::smc && !cfg.allow_degenerate_clusters &&
      cfg.hospitals / cfg.clusters == 1) {
    throw ConfigError(
        "clusters: smc with cluster size 1 discloses raw weights; pass "
        "--allow-degenerate to override");
  }
  try {
    validate(cfg.data);
    param_count(cfg.model);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

struct RoundMetrics {
  double avg_test_accuracy = 0.0;  // percent
  double avg_train_loss = 0.0;
};

struct ProtocolState {
  int round = 0;
  WeightVector global;
  std::vector<AdamState> optimizer_states;  // one per hospital
};

// One full round: server broadcast, local training on every hospital,
// strategy-specific upload, server aggregation. Every simulated
// transmission is appended to `log`. When `true_weights` is non-null it
// receives each hospital's genuine post-training weights (for the audit).
//
// Local-training randomness is keyed only by (master_seed, hospital,
// round), never by strategy, so strategies sharing a master seed train on
// identical batch orders.
inline void run_round(ProtocolState& state, const RunConfig& cfg,
                      const ClusterAssignment& clusters,
                      const std::vector<ClientDataset>& datasets,
                      MessageLog& log,
                      std::vector<WeightVector>* true_weights = nullptr) {
  const int K = cfg.hospitals;
  const int t = state.round;
  if (t >= cfg.rounds) throw UsageError("run_round: round index past rounds");
  if (static_cast<int>(datasets.size()) != K) {
    throw UsageError("run_round: need one dataset per hospital");
  }
  if (static_cast<int>(state.optimizer_states.size()) != K) {
    state.optimizer_states.resize(K);
  }

  for (int k = 1; k <= K; ++k) {
    log.push_back({t, kServer, k, MessageKind::broadcast_weights, state.global});
  }

  std::vector<WeightVector> trained(K);
  for (int k = 1; k <= K; ++k) {
    auto stream = substream(cfg.master_seed, StreamPurpose::local_training,
                            static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(t));
    trained[k - 1] = local_training(
        cfg.model, datasets[k - 1].train, state.global, cfg.optimizer,
        cfg.local_epochs, cfg.batch_size, stream,
        &state.optimizer_states[k - 1]);
  }
  if (true_weights) *true_weights = trained;

  switch (cfg.strategy) {
    case Strategy::fedavg: {
      for (int k = 1; k <= K; ++k) {
        log.push_back(
            {t, k, kServer, MessageKind::client_weights, trained[k - 1]});
      }
      state.global = vec_mean(trained);
      break;
    }
    case Strategy::dp: {
      std::vector<WeightVector> uploads(K);
      for (int k = 1; k <= K; ++k) {
        auto stream = substream(cfg.master_seed, StreamPurpose::dp_noise,
                                static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(t));
        uploads[k - 1] = dp_perturb(trained[k - 1], cfg.dp_sigma, stream);
        log.push_back(
            {t, k, kServer, MessageKind::client_weights, uploads[k - 1]});
      }
      state.global = vec_mean(uploads);
      break;
    }
    case Strategy::smc: {
      // Share exchange within each cluster. The self-share stays local.
      std::vector<std::vector<Share>> inbox(K);
      for (int c = 0; c < clusters.cluster_count; ++c) {
        const auto& members = clusters.members[c];
        for (int k : members) {
          auto stream = substream(cfg.master_seed, StreamPurpose::coefficients,
                                  static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(t));
          const auto coeffs = sample_coefficients(k, c + 1, members, stream);
          for (auto& share : make_shares(trained[k - 1], coeffs, t)) {
            if (share.target != k) {
              log.push_back(
                  {t, k, share.target, MessageKind::share, share.payload});
            }
            inbox[share.target - 1].push_back(std::move(share));
          }
        }
      }
      std::vector<MaskedSum> sums;
      sums.reserve(K);
      for (int k = 1; k <= K; ++k) {
        const int c = cluster_of(clusters, k);
        sums.push_back(
            accumulate_shares(k, c + 1, clusters.members[c], inbox[k - 1]));
        log.push_back(
            {t, k, kServer, MessageKind::masked_sum, sums.back().payload});
      }
      state.global = reconstruct_mean(sums, K);
      break;
    }
  }
  ++state.round;
}

struct TrainingResult {
  WeightVector final_weights;
  std::vector<RoundMetrics> history;  // evaluated on post-aggregation weights
  MessageLog log;
  // [round][hospital-1]: genuine post-training weights, audit ground truth.
  std::vector<std::vector<WeightVector>> true_client_weights;
  ClusterAssignment clusters;
};

// Full run: T rounds from init_weights(model, master_seed); per-round
// average test accuracy and average train loss are measured with the
// freshly aggregated global weights on every hospital's split.
inline TrainingResult run_training(const RunConfig& cfg) {
  validate(cfg);
  const auto datasets = generate_clients(cfg.data);

  TrainingResult result;
  {
    auto stream = substream(cfg.master_seed, StreamPurpose::cluster_assignment);
    result.clusters = assign_clusters(cfg.hospitals, cfg.clusters, stream);
  }

  ProtocolState state;
  state.global = init_weights(cfg.model, cfg.master_seed);
  state.optimizer_states.resize(cfg.hospitals);

  for (int t = 0; t < cfg.rounds; ++t) {
    std::vector<WeightVector> trained;
    run_round(state, cfg, result.clusters, datasets, result.log, &trained);
    result.true_client_weights.push_back(std::move(trained));

    double acc = 0.0, loss = 0.0;
    for (const auto& ds : datasets) {
      std::vector<int> truth(ds.test.size());
      for (std::size_t i = 0; i < ds.test.size(); ++i) {
        truth[i] = ds.test[i].label;
      }
      acc += accuracy(predict_labels(cfg.model, state.global, ds.test), truth);
      loss += mean_loss(cfg.model, state.global, ds.train);
    }
    const double inv_k = 1.0 / static_cast<double>(cfg.hospitals);
    result.history.push_back({acc * inv_k, loss * inv_k});
  }
  result.final_weights = state.global;
  return result;
}

}  // namespace fedsmc
