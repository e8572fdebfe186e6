#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedsmc/metrics.hpp"

namespace fedsmc {
namespace {

TEST(Accuracy, AllCorrectIsHundred) {
  EXPECT_DOUBLE_EQ(accuracy({1, 0, 1}, {1, 0, 1}), 100.0);
}

TEST(Accuracy, HalfCorrectIsFifty) {
  EXPECT_DOUBLE_EQ(accuracy({1, 0, 1, 1}, {1, 1, 1, 0}), 50.0);
}

TEST(Accuracy, AllWrongIsZero) {
  EXPECT_DOUBLE_EQ(accuracy({0, 1}, {1, 0}), 0.0);
}

TEST(Accuracy, InvalidInputsRejected) {
  EXPECT_THROW(accuracy({}, {}), UsageError);
  EXPECT_THROW(accuracy({1}, {1, 0}), UsageError);
}

TEST(Accuracy, InvariantUnderPairedPermutation) {
  std::mt19937_64 rng(11);
  std::vector<int> preds(40), truth(40);
  for (int i = 0; i < 40; ++i) {
    preds[i] = static_cast<int>(rng() % 2);
    truth[i] = static_cast<int>(rng() % 2);
  }
  const double base = accuracy(preds, truth);
  std::vector<int> order(40);
  for (int i = 0; i < 40; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> p2(40), t2(40);
  for (int i = 0; i < 40; ++i) {
    p2[i] = preds[order[i]];
    t2[i] = truth[order[i]];
  }
  EXPECT_DOUBLE_EQ(accuracy(p2, t2), base);
}

TEST(F1Score, PerfectPredictionIsHundred) {
  EXPECT_DOUBLE_EQ(f1_score({1, 0, 1, 0}, {1, 0, 1, 0}), 100.0);
}

TEST(F1Score, KnownConfusionCounts) {
  // TP=2, FP=1, FN=1: F1 = 2*2/(2*2+1+1) = 2/3.
  const double f1 = f1_score({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0});
  EXPECT_NEAR(f1, 200.0 / 3.0, 1e-9);
}

TEST(F1Score, NoPositivesAnywhereIsZero) {
  EXPECT_DOUBLE_EQ(f1_score({0, 0, 0}, {0, 0, 0}), 0.0);
}

TEST(F1Score, HundredOnlyWhenPredictionsMatchTruth) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<int> preds(n), truth(n);
    bool any_pos = false;
    for (int i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng() % 2);
      truth[i] = static_cast<int>(rng() % 2);
      any_pos = any_pos || truth[i] == 1 || preds[i] == 1;
    }
    if (!any_pos) truth[0] = preds[0] = 1;
    const double f1 = f1_score(preds, truth);
    if (preds == truth) {
      EXPECT_DOUBLE_EQ(f1, 100.0);
    } else {
      EXPECT_LT(f1, 100.0);
    }
  }
}

EvalReport make_report(const std::string& method, std::vector<double> accs,
                       std::vector<double> f1s, std::vector<double> curve_acc,
                       std::vector<double> curve_loss) {
  EvalReport r;
  r.method = method;
  for (std::size_t i = 0; i < accs.size(); ++i) {
    r.clients.push_back({static_cast<int>(i + 1), accs[i], f1s[i]});
  }
  r.test_accuracy_curve = std::move(curve_acc);
  r.train_loss_curve = std::move(curve_loss);
  refresh_averages(r);
  return r;
}

TEST(EvalReport, RefreshAveragesIsClientMean) {
  const auto r = make_report("smc", {70.0, 80.0}, {60.0, 90.0}, {1.0}, {0.5});
  EXPECT_DOUBLE_EQ(r.avg_accuracy_pct, 75.0);
  EXPECT_DOUBLE_EQ(r.avg_f1_pct, 75.0);
}

TEST(AggregateRuns, SingleRunIsItself) {
  const auto r = make_report("dp", {70.0, 80.0}, {65.0, 85.0}, {50.0, 60.0},
                             {0.7, 0.6});
  const auto agg = aggregate_runs({r});
  EXPECT_EQ(agg.method, "dp");
  EXPECT_DOUBLE_EQ(agg.avg_accuracy_pct, r.avg_accuracy_pct);
  EXPECT_EQ(agg.test_accuracy_curve, r.test_accuracy_curve);
  EXPECT_EQ(agg.repeats, 1);
}

TEST(AggregateRuns, TwoRunsAverageElementwise) {
  const auto a = make_report("smc", {70.0}, {60.0}, {50.0, 70.0}, {1.0, 0.5});
  const auto b = make_report("smc", {80.0}, {70.0}, {60.0, 80.0}, {0.8, 0.3});
  const auto agg = aggregate_runs({a, b});
  EXPECT_DOUBLE_EQ(agg.clients[0].accuracy_pct, 75.0);
  EXPECT_DOUBLE_EQ(agg.clients[0].f1_pct, 65.0);
  EXPECT_DOUBLE_EQ(agg.test_accuracy_curve[0], 55.0);
  EXPECT_DOUBLE_EQ(agg.test_accuracy_curve[1], 75.0);
  EXPECT_DOUBLE_EQ(agg.train_loss_curve[0], 0.9);
  EXPECT_DOUBLE_EQ(agg.train_loss_curve[1], 0.4);
  EXPECT_EQ(agg.repeats, 2);
}

TEST(AggregateRuns, MatchesColumnMeansOnRandomRuns) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> acc(0.0, 100.0);
  std::uniform_real_distribution<double> loss(0.0, 2.0);
  const int runs = 5, clients = 4, rounds = 7;

  std::vector<EvalReport> reports;
  for (int r = 0; r < runs; ++r) {
    std::vector<double> accs(clients), f1s(clients), ca(rounds), cl(rounds);
    for (auto& v : accs) v = acc(rng);
    for (auto& v : f1s) v = acc(rng);
    for (auto& v : ca) v = acc(rng);
    for (auto& v : cl) v = loss(rng);
    reports.push_back(make_report("fedavg", accs, f1s, ca, cl));
  }
  const auto agg = aggregate_runs(reports);

  const double inv = 1.0 / runs;
  for (int c = 0; c < clients; ++c) {
    double sum_acc = 0.0, sum_f1 = 0.0;
    for (const auto& r : reports) {
      sum_acc += r.clients[c].accuracy_pct;
      sum_f1 += r.clients[c].f1_pct;
    }
    EXPECT_NEAR(agg.clients[c].accuracy_pct, sum_acc * inv, 1e-12);
    EXPECT_NEAR(agg.clients[c].f1_pct, sum_f1 * inv, 1e-12);
  }
  for (int t = 0; t < rounds; ++t) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.test_accuracy_curve[t];
    EXPECT_NEAR(agg.test_accuracy_curve[t], sum * inv, 1e-12);
  }
}

TEST(AggregateRuns, RepeatsAccumulateAcrossAggregates) {
  auto a = make_report("smc", {70.0}, {60.0}, {50.0}, {1.0});
  auto b = make_report("smc", {80.0}, {70.0}, {60.0}, {0.8});
  a.repeats = 2;
  b.repeats = 3;
  EXPECT_EQ(aggregate_runs({a, b}).repeats, 5);
}

TEST(AggregateRuns, MismatchedRunsRejected) {
  const auto a = make_report("smc", {70.0}, {60.0}, {50.0, 70.0}, {1.0, 0.5});
  auto short_curve = make_report("smc", {80.0}, {70.0}, {60.0}, {0.8});
  EXPECT_THROW(aggregate_runs({a, short_curve}), UsageError);

  auto extra_client =
      make_report("smc", {80.0, 90.0}, {70.0, 80.0}, {60.0, 80.0}, {0.8, 0.3});
  EXPECT_THROW(aggregate_runs({a, extra_client}), UsageError);

  auto renamed = a;
  renamed.clients[0].client_id = 9;
  EXPECT_THROW(aggregate_runs({a, renamed}), UsageError);

  EXPECT_THROW(aggregate_runs({}), UsageError);
}

TEST(TableCsv, ClientMajorLayoutWithAverageRows) {
  const auto smc = make_report("smc", {70.0, 80.0}, {60.0, 90.0}, {1.0}, {0.5});
  const auto fed =
      make_report("fedavg", {72.5, 81.5}, {61.5, 91.5}, {1.0}, {0.5});
  std::stringstream ss;
  write_table_csv(ss, {fed, smc});
  EXPECT_EQ(ss.str(),
            "Client,Method,ACC,F1\n"
            "C1,fedavg,72.50,61.50\n"
            "C1,smc,70.00,60.00\n"
            "C2,fedavg,81.50,91.50\n"
            "C2,smc,80.00,90.00\n"
            "Avg,fedavg,77.00,76.50\n"
            "Avg,smc,75.00,75.00\n");
}

TEST(CurvesCsv, RoundIndexedFixedPrecision) {
  const auto r =
      make_report("smc", {70.0}, {60.0}, {50.0, 62.5}, {0.693147, 0.5});
  std::stringstream ss;
  write_curves_csv(ss, r);
  EXPECT_EQ(ss.str(),
            "round,avg_test_acc,avg_train_loss\n"
            "0,50.000000,0.693147\n"
            "1,62.500000,0.500000\n");
}

TEST(EvalReportJson, UsesStableFieldNames) {
  const auto r = make_report("smc", {70.0, 80.0}, {60.0, 90.0}, {1.0}, {0.5});
  const auto j = to_json(r);
  EXPECT_EQ(j["method"], "smc");
  EXPECT_DOUBLE_EQ(j["avg_accuracy"].get<double>(), 75.0);
  EXPECT_DOUBLE_EQ(j["avg_f1"].get<double>(), 75.0);
  EXPECT_EQ(j["repeats"].get<int>(), 1);
  ASSERT_EQ(j["clients"].size(), 2u);
  EXPECT_EQ(j["clients"][0]["client"].get<int>(), 1);
  EXPECT_EQ(j["test_accuracy_curve"].size(), 1u);
  EXPECT_EQ(j["train_loss_curve"].size(), 1u);
}

}  // namespace
}  // namespace fedsmc
