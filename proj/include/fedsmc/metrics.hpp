#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsmc/errors.hpp"

namespace fedsmc {

// Percent of predictions equal to the truth.
inline double accuracy(const std::vector<int>& preds,
                       const std::vector<int>& truth) {
  if (preds.empty()) throw UsageError("accuracy: empty input");
  if (preds.size() != truth.size()) {
    throw UsageError("accuracy: length mismatch");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += preds[i] == truth[i] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(preds.size());
}

// Percent F1 for the positive class; 0 when precision + recall is zero.
inline double f1_score(const std::vector<int>& preds,
                       const std::vector<int>& truth, int positive_class = 1) {
  if (preds.empty()) throw UsageError("f1_score: empty input");
  if (preds.size() != truth.size()) {
    throw UsageError("f1_score: length mismatch");
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool t = truth[i] == positive_class;
    if (p && t) ++tp;
    if (p && !t) ++fp;
    if (!p && t) ++fn;
  }
  const double denom = 2.0 * tp + fp + fn;
  if (denom == 0.0) return 0.0;
  return 100.0 * 2.0 * tp / denom;
}

struct ClientScore {
  int client_id = 0;
  double accuracy_pct = 0.0;
  double f1_pct = 0.0;
};

struct EvalReport {
  std::string method;  // fedavg | dp | smc
  std::vector<ClientScore> clients;
  double avg_accuracy_pct = 0.0;
  double avg_f1_pct = 0.0;
  std::vector<double> test_accuracy_curve;  // percent, one entry per round
  std::vector<double> train_loss_curve;     // one entry per round
  int repeats = 1;
};

inline void refresh_averages(EvalReport& r) {
  double acc = 0.0, f1 = 0.0;
  for (const auto& c : r.clients) {
    acc += c.accuracy_pct;
    f1 += c.f1_pct;
  }
  const double n = static_cast<double>(r.clients.size());
  r.avg_accuracy_pct = r.clients.empty() ? 0.0 : acc / n;
  r.avg_f1_pct = r.clients.empty() ? 0.0 : f1 / n;
}

// Elementwise arithmetic mean over repeats of the same experiment.
inline EvalReport aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("aggregate_runs: no reports");
  const EvalReport& first = reports.front();
  for (const auto& r : reports) {
    if (r.method != first.method ||
        r.clients.size() != first.clients.size() ||
        r.test_accuracy_curve.size() != first.test_accuracy_curve.size() ||
        r.train_loss_curve.size() != first.train_loss_curve.size()) {
      throw UsageError("aggregate_runs: mismatched report shapes");
    }
    for (std::size_t i = 0; i < r.clients.size(); ++i) {
      if (r.clients[i].client_id != first.clients[i].client_id) {
        throw UsageError("aggregate_runs: mismatched client ids");
      }
    }
  }
  EvalReport out = first;
  out.repeats = 0;
  for (auto& c : out.clients) c.accuracy_pct = c.f1_pct = 0.0;
  std::fill(out.test_accuracy_curve.begin(), out.test_accuracy_curve.end(),
            0.0);
  std::fill(out.train_loss_curve.begin(), out.train_loss_curve.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.repeats += r.repeats;
    for (std::size_t i = 0; i < r.clients.size(); ++i) {
      out.clients[i].accuracy_pct += inv * r.clients[i].accuracy_pct;
      out.clients[i].f1_pct += inv * r.clients[i].f1_pct;
    }
    for (std::size_t t = 0; t < r.test_accuracy_curve.size(); ++t) {
      out.test_accuracy_curve[t] += inv * r.test_accuracy_curve[t];
      out.train_loss_curve[t] += inv * r.train_loss_curve[t];
    }
  }
  refresh_averages(out);
  return out;
}

// Columns: Client,Method,ACC,F1. Client-major rows, then one Avg row per
// method.
inline void write_table_csv(std::ostream& os,
                            const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("write_table_csv: no reports");
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  os << "Client,Method,ACC,F1\n";
  const std::size_t n_clients = reports.front().clients.size();
  for (std::size_t i = 0; i < n_clients; ++i) {
    for (const auto& r : reports) {
      const auto& c = r.clients.at(i);
      os << 'C' << c.client_id << ',' << r.method << ',' << fmt(c.accuracy_pct)
         << ',' << fmt(c.f1_pct) << "\n";
    }
  }
  for (const auto& r : reports) {
    os << "Avg," << r.method << ',' << fmt(r.avg_accuracy_pct) << ','
       << fmt(r.avg_f1_pct) << "\n";
  }
}

// Columns: round,avg_test_acc,avg_train_loss.
inline void write_curves_csv(std::ostream& os, const EvalReport& report) {
  os << "round,avg_test_acc,avg_train_loss\n";
  char buf[64];
  for (std::size_t t = 0; t < report.test_accuracy_curve.size(); ++t) {
    os << t;
    std::snprintf(buf, sizeof(buf), "%.6f", report.test_accuracy_curve[t]);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.6f", report.train_loss_curve[t]);
    os << ',' << buf << "\n";
  }
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json clients = nlohmann::json::array();
  for (const auto& c : r.clients) {
    clients.push_back({{"client", c.client_id},
                       {"accuracy", c.accuracy_pct},
                       {"f1", c.f1_pct}});
  }
  return {{"method", r.method},
          {"clients", clients},
          {"avg_accuracy", r.avg_accuracy_pct},
          {"avg_f1", r.avg_f1_pct},
          {"repeats", r.repeats},
          {"test_accuracy_curve", r.test_accuracy_curve},
          {"train_loss_curve", r.train_loss_curve}};
}

}  // namespace fedsmc
