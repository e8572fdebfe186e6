#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "fedsmc/protocol.hpp"

namespace fedsmc {
namespace {

RunConfig small_run(Strategy s) {
  RunConfig cfg;
  cfg.strategy = s;
  cfg.hospitals = 6;
  cfg.clusters = 2;
  cfg.rounds = 3;
  cfg.batch_size = 8;
  cfg.model = {ModelKind::logistic, 4, 0};
  cfg.data.clients = 6;
  cfg.data.sizes = {16, 16, 16, 16, 16, 16};
  cfg.data.label_fracs = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  cfg.data.input_dim = 4;
  cfg.data.seed = 3;
  cfg.master_seed = 42;
  return cfg;
}

TEST(Strategy, StringRoundTrip) {
  for (auto s : {Strategy::fedavg, Strategy::dp, Strategy::smc}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_strategy("bogus"), ConfigError);
}

TEST(AssignClusters, EqualTriplesCoverAllHospitals) {
  auto stream = substream(1, StreamPurpose::cluster_assignment);
  const auto assignment = assign_clusters(6, 2, stream);
  EXPECT_EQ(assignment.cluster_count, 2);
  ASSERT_EQ(assignment.members.size(), 2u);
  std::set<int> seen;
  for (const auto& group : assignment.members) {
    EXPECT_EQ(group.size(), 3u);
    EXPECT_TRUE(std::is_sorted(group.begin(), group.end()));
    seen.insert(group.begin(), group.end());
  }
  EXPECT_EQ(seen, (std::set<int>{1, 2, 3, 4, 5, 6}));
}

TEST(AssignClusters, SingletonBoundary) {
  auto stream = substream(2, StreamPurpose::cluster_assignment);
  const auto assignment = assign_clusters(4, 4, stream);
  EXPECT_EQ(assignment.cluster_count, 4);
  std::set<int> seen;
  for (const auto& group : assignment.members) {
    ASSERT_EQ(group.size(), 1u);
    seen.insert(group.front());
  }
  EXPECT_EQ(seen, (std::set<int>{1, 2, 3, 4}));
}

TEST(AssignClusters, DivisibilityViolationRejected) {
  auto stream = substream(3, StreamPurpose::cluster_assignment);
  try {
    assign_clusters(5, 2, stream);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("divisible"), std::string::npos);
  }
}

TEST(AssignClusters, DeterministicInStream) {
  auto s1 = substream(4, StreamPurpose::cluster_assignment);
  auto s2 = substream(4, StreamPurpose::cluster_assignment);
  EXPECT_EQ(assign_clusters(12, 3, s1).members,
            assign_clusters(12, 3, s2).members);
}

TEST(ClusterOf, FindsMemberAndRejectsStranger) {
  ClusterAssignment assignment;
  assignment.cluster_count = 2;
  assignment.members = {{1, 3}, {2, 4}};
  EXPECT_EQ(cluster_of(assignment, 3), 0);
  EXPECT_EQ(cluster_of(assignment, 4), 1);
  EXPECT_THROW(cluster_of(assignment, 9), ProtocolError);
}

TEST(Message, ByteSizeIsPayloadPlusHeader) {
  Message m;
  m.payload = WeightVector(10, 0.0);
  EXPECT_EQ(message_byte_size(m), 10u * 8u + 32u);
  m.payload.clear();
  EXPECT_EQ(message_byte_size(m), 32u);
}

TEST(DpPerturb, ZeroSigmaLeavesWeightsAndStreamUntouched) {
  auto stream = substream(5, StreamPurpose::dp_noise);
  auto pristine = substream(5, StreamPurpose::dp_noise);
  const WeightVector w = {1.0, -2.0};
  EXPECT_EQ(dp_perturb(w, 0.0, stream), w);
  EXPECT_EQ(stream(), pristine());
}

TEST(DpPerturb, EmpiricalStdMatchesSigma) {
  auto stream = substream(6, StreamPurpose::dp_noise);
  const int n = 100000;
  const WeightVector zero(n, 0.0);
  const auto noisy = dp_perturb(zero, 0.03, stream);
  double mean = 0.0;
  for (double x : noisy) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : noisy) var += (x - mean) * (x - mean);
  const double std = std::sqrt(var / (n - 1));
  EXPECT_NEAR(std, 0.03, 0.03 * 0.02);
}

TEST(DpPerturb, DistinctStreamsGiveDistinctNoise) {
  auto s1 = substream(7, StreamPurpose::dp_noise, 1);
  auto s2 = substream(7, StreamPurpose::dp_noise, 2);
  const WeightVector w(4, 0.0);
  EXPECT_NE(dp_perturb(w, 0.1, s1), dp_perturb(w, 0.1, s2));
}

TEST(DpPerturb, NegativeSigmaRejected) {
  auto stream = substream(8, StreamPurpose::dp_noise);
  EXPECT_THROW(dp_perturb({1.0}, -0.1, stream), UsageError);
}

TEST(ValidateRunConfig, DefaultsAreValid) {
  EXPECT_NO_THROW(validate(RunConfig{}));
}

TEST(ValidateRunConfig, ViolationsNameTheField) {
  auto cfg = small_run(Strategy::smc);
  cfg.hospitals = 5;
  cfg.data.clients = 5;
  cfg.data.sizes = {16, 16, 16, 16, 16};
  cfg.data.label_fracs = {0.5, 0.5, 0.5, 0.5, 0.5};
  try {
    validate(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("divisible"), std::string::npos);
  }

  cfg = small_run(Strategy::smc);
  cfg.rounds = 0;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.local_epochs = 0;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.batch_size = 0;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.dp_sigma = -0.01;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.optimizer.eta = -0.1;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.repeats = 0;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.data.clients = 4;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.model.input_dim = 8;
  EXPECT_THROW(validate(cfg), ConfigError);

  cfg = small_run(Strategy::smc);
  cfg.data.sizes[0] = 2;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(ValidateRunConfig, DegenerateSmcClustersNeedOverride) {
  auto cfg = small_run(Strategy::smc);
  cfg.clusters = 6;  // N = 1
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.allow_degenerate_clusters = true;
  EXPECT_NO_THROW(validate(cfg));
  cfg.allow_degenerate_clusters = false;
  cfg.strategy = Strategy::fedavg;  // only smc rejects N = 1
  EXPECT_NO_THROW(validate(cfg));
}

std::size_t count_kind(const MessageLog& log, MessageKind kind) {
  std::size_t n = 0;
  for (const auto& m : log) n += m.kind == kind ? 1 : 0;
  return n;
}

TEST(RunRound, SmcMessageCountsPerRound) {
  auto cfg = small_run(Strategy::smc);
  cfg.rounds = 1;
  const auto result = run_training(cfg);
  EXPECT_EQ(result.log.size(), 24u);  // 6 broadcast + 12 share + 6 masked
  EXPECT_EQ(count_kind(result.log, MessageKind::broadcast_weights), 6u);
  EXPECT_EQ(count_kind(result.log, MessageKind::share), 12u);
  EXPECT_EQ(count_kind(result.log, MessageKind::masked_sum), 6u);
  EXPECT_EQ(count_kind(result.log, MessageKind::client_weights), 0u);
}

TEST(RunRound, FedavgMessageCountsPerRound) {
  auto cfg = small_run(Strategy::fedavg);
  cfg.rounds = 1;
  const auto result = run_training(cfg);
  EXPECT_EQ(result.log.size(), 12u);  // 6 broadcast + 6 client_weights
  EXPECT_EQ(count_kind(result.log, MessageKind::broadcast_weights), 6u);
  EXPECT_EQ(count_kind(result.log, MessageKind::client_weights), 6u);
  EXPECT_EQ(count_kind(result.log, MessageKind::share), 0u);
}

TEST(RunRound, ShareMessagesStayInsideClusters) {
  const auto result = run_training(small_run(Strategy::smc));
  for (const auto& m : result.log) {
    if (m.kind == MessageKind::share) {
      EXPECT_NE(m.sender, kServer);
      EXPECT_NE(m.receiver, kServer);
      EXPECT_NE(m.sender, m.receiver);  // self-shares never hit the log
      EXPECT_EQ(cluster_of(result.clusters, m.sender),
                cluster_of(result.clusters, m.receiver));
    }
    if (m.kind == MessageKind::broadcast_weights) {
      EXPECT_EQ(m.sender, kServer);
      EXPECT_NE(m.receiver, kServer);
    }
    if (m.kind == MessageKind::masked_sum ||
        m.kind == MessageKind::client_weights) {
      EXPECT_EQ(m.receiver, kServer);
    }
  }
}

TEST(RunRound, FrozenTrainingLeavesGlobalWeights) {
  auto cfg = small_run(Strategy::smc);
  cfg.optimizer.eta = 0.0;
  cfg.rounds = 1;
  const auto initial = init_weights(cfg.model, cfg.master_seed);
  const auto result = run_training(cfg);
  ASSERT_EQ(result.final_weights.size(), initial.size());
  EXPECT_LT(linf_dist(result.final_weights, initial),
            1e-12 * (1.0 + max_abs(initial)));
}

TEST(RunTraining, NullTrainingKeepsInitialWeightsForAllStrategies) {
  for (auto s : {Strategy::fedavg, Strategy::dp, Strategy::smc}) {
    auto cfg = small_run(s);
    cfg.rounds = 1;
    cfg.optimizer.eta = 0.0;
    cfg.dp_sigma = 0.0;  // dp noise would otherwise shift the mean
    const auto initial = init_weights(cfg.model, cfg.master_seed);
    const auto result = run_training(cfg);
    EXPECT_LT(linf_dist(result.final_weights, initial),
              1e-12 * (1.0 + max_abs(initial)))
        << to_string(s);
  }
}

TEST(RunTraining, DeterministicAcrossInvocations) {
  const auto cfg = small_run(Strategy::smc);
  const auto a = run_training(cfg);
  const auto b = run_training(cfg);
  EXPECT_EQ(a.final_weights, b.final_weights);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t t = 0; t < a.history.size(); ++t) {
    EXPECT_EQ(a.history[t].avg_test_accuracy, b.history[t].avg_test_accuracy);
    EXPECT_EQ(a.history[t].avg_train_loss, b.history[t].avg_train_loss);
  }
  EXPECT_EQ(a.log.size(), b.log.size());
}

TEST(RunTraining, RecordsHistoryAndTrueWeights) {
  const auto cfg = small_run(Strategy::dp);
  const auto result = run_training(cfg);
  ASSERT_EQ(result.history.size(), 3u);
  for (const auto& m : result.history) {
    EXPECT_GE(m.avg_test_accuracy, 0.0);
    EXPECT_LE(m.avg_test_accuracy, 100.0);
    EXPECT_GE(m.avg_train_loss, 0.0);
  }
  ASSERT_EQ(result.true_client_weights.size(), 3u);
  for (const auto& per_round : result.true_client_weights) {
    ASSERT_EQ(per_round.size(), 6u);
    for (const auto& w : per_round) {
      EXPECT_EQ(w.size(), param_count(cfg.model));
    }
  }
}

TEST(RunTraining, SmcMatchesFedavgOnSharedSeed) {
  auto smc = small_run(Strategy::smc);
  smc.rounds = 5;
  auto fedavg = small_run(Strategy::fedavg);
  fedavg.rounds = 5;

  const auto a = run_training(smc);
  const auto b = run_training(fedavg);
  const double scale = max_abs(b.final_weights);
  EXPECT_LT(linf_dist(a.final_weights, b.final_weights), 1e-6 * scale);
  for (std::size_t t = 0; t < a.history.size(); ++t) {
    EXPECT_NEAR(a.history[t].avg_test_accuracy, b.history[t].avg_test_accuracy,
                1e-6);
  }
}

TEST(RunRound, RoundIndexPastConfiguredRoundsRejected) {
  auto cfg = small_run(Strategy::fedavg);
  cfg.rounds = 1;
  const auto datasets = generate_clients(cfg.data);
  auto stream = substream(cfg.master_seed, StreamPurpose::cluster_assignment);
  const auto clusters = assign_clusters(cfg.hospitals, cfg.clusters, stream);
  ProtocolState state;
  state.global = init_weights(cfg.model, cfg.master_seed);
  state.optimizer_states.resize(cfg.hospitals);
  MessageLog log;
  run_round(state, cfg, clusters, datasets, log);
  EXPECT_THROW(run_round(state, cfg, clusters, datasets, log), UsageError);
}

}  // namespace
}  // namespace fedsmc
