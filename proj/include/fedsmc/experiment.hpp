#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedsmc/audit.hpp"
#include "fedsmc/data.hpp"
#include "fedsmc/errors.hpp"
#include "fedsmc/metrics.hpp"
#include "fedsmc/model.hpp"
#include "fedsmc/protocol.hpp"
#include "fedsmc/rng.hpp"

namespace fedsmc {

// Disclosure tolerance used for every emitted audit report.
inline constexpr double kAuditTolerance = 1e-6;

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : cfg.compare_strategies) strategies.push_back(to_string(s));
  return {{"strategy", to_string(cfg.strategy)},
          {"hospitals", cfg.hospitals},
          {"clusters", cfg.clusters},
          {"rounds", cfg.rounds},
          {"local_epochs", cfg.local_epochs},
          {"batch_size", cfg.batch_size},
          {"optimizer",
           {{"kind", to_string(cfg.optimizer.kind)},
            {"eta", cfg.optimizer.eta},
            {"beta1", cfg.optimizer.beta1},
            {"beta2", cfg.optimizer.beta2},
            {"epsilon", cfg.optimizer.epsilon}}},
          {"dp_sigma", cfg.dp_sigma},
          {"master_seed", cfg.master_seed},
          {"repeats", cfg.repeats},
          {"allow_degenerate_clusters", cfg.allow_degenerate_clusters},
          {"compare_strategies", strategies},
          {"model",
           {{"kind", to_string(cfg.model.kind)},
            {"input_dim", cfg.model.input_dim},
            {"hidden_dim", cfg.model.hidden_dim}}},
          {"data",
           {{"clients", cfg.data.clients},
            {"sizes", cfg.data.sizes},
            {"label_fracs", cfg.data.label_fracs},
            {"input_dim", cfg.data.input_dim},
            {"mean_shift", cfg.data.mean_shift},
            {"noise_scale", cfg.data.noise_scale},
            {"client_shift", cfg.data.client_shift},
            {"seed", cfg.data.seed}}}};
}

namespace detail {

inline void apply_optimizer_json(const nlohmann::json& j, OptimizerSpec& opt) {
  if (!j.is_object()) throw ConfigError("optimizer: must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "kind") opt.kind = parse_optimizer_kind(v.get<std::string>());
    else if (key == "eta") opt.eta = v.get<double>();
    else if (key == "beta1") opt.beta1 = v.get<double>();
    else if (key == "beta2") opt.beta2 = v.get<double>();
    else if (key == "epsilon") opt.epsilon = v.get<double>();
    else throw ConfigError("config: unknown key 'optimizer." + key + "'");
  }
}

inline void apply_model_json(const nlohmann::json& j, ModelSpec& model) {
  if (!j.is_object()) throw ConfigError("model: must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "kind") model.kind = parse_model_kind(v.get<std::string>());
    else if (key == "input_dim") model.input_dim = v.get<int>();
    else if (key == "hidden_dim") model.hidden_dim = v.get<int>();
    else throw ConfigError("config: unknown key 'model." + key + "'");
  }
}

inline void apply_data_json(const nlohmann::json& j, DataConfig& data) {
  if (!j.is_object()) throw ConfigError("data: must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "clients") data.clients = v.get<int>();
    else if (key == "sizes") data.sizes = v.get<std::vector<int>>();
    else if (key == "label_fracs")
      data.label_fracs = v.get<std::vector<double>>();
    else if (key == "input_dim") data.input_dim = v.get<int>();
    else if (key == "mean_shift") data.mean_shift = v.get<double>();
    else if (key == "noise_scale") data.noise_scale = v.get<double>();
    else if (key == "client_shift") data.client_shift = v.get<double>();
    else if (key == "seed") data.seed = v.get<std::uint64_t>();
    else throw ConfigError("config: unknown key 'data." + key + "'");
  }
}

}  // namespace detail

// Mirrors RunConfig field-for-field; absent keys keep their defaults,
// unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: must be a JSON object");
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    try {
      if (key == "strategy") cfg.strategy = parse_strategy(v.get<std::string>());
      else if (key == "hospitals") cfg.hospitals = v.get<int>();
      else if (key == "clusters") cfg.clusters = v.get<int>();
      else if (key == "rounds") cfg.rounds = v.get<int>();
      else if (key == "local_epochs") cfg.local_epochs = v.get<int>();
      else if (key == "batch_size") cfg.batch_size = v.get<int>();
      else if (key == "optimizer") detail::apply_optimizer_json(v, cfg.optimizer);
      else if (key == "dp_sigma") cfg.dp_sigma = v.get<double>();
      else if (key == "master_seed") cfg.master_seed = v.get<std::uint64_t>();
      else if (key == "repeats") cfg.repeats = v.get<int>();
      else if (key == "allow_degenerate_clusters")
        cfg.allow_degenerate_clusters = v.get<bool>();
      else if (key == "compare_strategies") {
        cfg.compare_strategies.clear();
        for (const auto& s : v) {
          cfg.compare_strategies.push_back(parse_strategy(s.get<std::string>()));
        }
      } else if (key == "model") detail::apply_model_json(v, cfg.model);
      else if (key == "data") detail::apply_data_json(v, cfg.data);
      else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open output file '" + path.string() + "'");
  return os;
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  auto os = open_output(path);
  os << j.dump(2) << '\n';
}

}  // namespace detail

// Per-client accuracy and F1 of the final weights on each test split plus
// the per-round curves. Regenerates the datasets from cfg.data, which is
// deterministic.
inline EvalReport evaluate(const RunConfig& cfg, const TrainingResult& result) {
  EvalReport report;
  report.method = to_string(cfg.strategy);
  report.repeats = 1;
  for (const auto& ds : generate_clients(cfg.data)) {
    std::vector<int> truth(ds.test.size());
    for (std::size_t i = 0; i < ds.test.size(); ++i) truth[i] = ds.test[i].label;
    const auto preds = predict_labels(cfg.model, result.final_weights, ds.test);
    report.clients.push_back(
        {ds.client_id, accuracy(preds, truth), f1_score(preds, truth)});
  }
  for (const auto& m : result.history) {
    report.test_accuracy_curve.push_back(m.avg_test_accuracy);
    report.train_loss_curve.push_back(m.avg_train_loss);
  }
  refresh_averages(report);
  return report;
}

struct RunOutputs {
  EvalReport report;
  MessageStats stats;
  AuditReport audit;
};

// Single-strategy run. Writes config.resolved.json, table.csv, curves.csv,
// report.json, messages.log and audit.json under out_dir. No timestamps:
// identical configs produce byte-identical artifacts.
inline RunOutputs run_experiment(const RunConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);
  detail::write_json_file(out_dir / "config.resolved.json", to_json(cfg));

  const auto result = run_training(cfg);
  RunOutputs out;
  out.report = evaluate(cfg, result);
  out.stats = count_messages(result.log);
  out.audit = check_disclosure(result.log, result.true_client_weights,
                               kAuditTolerance, cfg.strategy);

  {
    auto os = detail::open_output(out_dir / "table.csv");
    write_table_csv(os, {out.report});
  }
  {
    auto os = detail::open_output(out_dir / "curves.csv");
    write_curves_csv(os, out.report);
  }
  detail::write_json_file(out_dir / "report.json", to_json(out.report));
  {
    auto os = detail::open_output(out_dir / "messages.log");
    export_message_log(os, result.log);
  }
  detail::write_json_file(out_dir / "audit.json",
                          {{"disclosure_report", to_json(out.audit)},
                           {"message_stats", to_json(out.stats)}});
  return out;
}

struct CompareOutputs {
  std::vector<EvalReport> reports;  // aggregated over repeats, one per strategy
  std::map<std::string, MessageStats> stats;   // repeat 0 of each strategy
  std::map<std::string, AuditReport> audits;   // repeat 0 of each strategy
};

// Seed for repeat r. Repeat 0 runs the configured master seed verbatim so a
// plain `run` reproduces it; later repeats derive disjoint seeds.
inline std::uint64_t repeat_seed(std::uint64_t master_seed, int repeat) {
  if (repeat == 0) return master_seed;
  return derive_seed(master_seed, StreamPurpose::repeat,
                     static_cast<std::uint64_t>(repeat));
}

// Runs every configured strategy for cfg.repeats repeats. Datasets are
// shared (cfg.data.seed is independent of the training seed) and repeat r
// of every strategy shares one master seed, so fedavg and smc stay
// round-for-round comparable. Writes table.csv over all strategies,
// per-strategy curves_<s>.csv / report_<s>.json, repeat-0 messages_<s>.log
// and audit_<s>.json, overhead.csv, and config.resolved.json.
inline CompareOutputs compare_experiments(const RunConfig& cfg,
                                          const std::filesystem::path& out_dir) {
  if (cfg.compare_strategies.empty()) {
    throw ConfigError("compare_strategies: must list at least one strategy");
  }
  for (auto s : cfg.compare_strategies) {
    RunConfig probe = cfg;
    probe.strategy = s;
    validate(probe);
  }
  std::filesystem::create_directories(out_dir);
  detail::write_json_file(out_dir / "config.resolved.json", to_json(cfg));

  CompareOutputs out;
  for (auto s : cfg.compare_strategies) {
    const std::string tag = to_string(s);
    std::vector<EvalReport> runs;
    for (int r = 0; r < cfg.repeats; ++r) {
      RunConfig rc = cfg;
      rc.strategy = s;
      rc.master_seed = repeat_seed(cfg.master_seed, r);
      const auto result = run_training(rc);
      runs.push_back(evaluate(rc, result));
      if (r == 0) {
        out.stats[tag] = count_messages(result.log);
        out.audits[tag] =
            check_disclosure(result.log, result.true_client_weights,
                             kAuditTolerance, s);
        auto os = detail::open_output(out_dir / ("messages_" + tag + ".log"));
        export_message_log(os, result.log);
        detail::write_json_file(
            out_dir / ("audit_" + tag + ".json"),
            {{"disclosure_report", to_json(out.audits[tag])},
             {"message_stats", to_json(out.stats[tag])}});
      }
    }
    auto agg = aggregate_runs(runs);
    {
      auto os = detail::open_output(out_dir / ("curves_" + tag + ".csv"));
      write_curves_csv(os, agg);
    }
    detail::write_json_file(out_dir / ("report_" + tag + ".json"), to_json(agg));
    out.reports.push_back(std::move(agg));
  }

  {
    auto os = detail::open_output(out_dir / "table.csv");
    write_table_csv(os, out.reports);
  }
  {
    auto os = detail::open_output(out_dir / "overhead.csv");
    os << "strategy,messages,bytes,ratio_vs_fedavg\n";
    const auto fedavg = out.stats.find("fedavg");
    char buf[64];
    for (auto s : cfg.compare_strategies) {
      const std::string tag = to_string(s);
      const auto& stats = out.stats.at(tag);
      os << tag << ',' << stats.total_count << ',' << stats.total_bytes << ',';
      if (fedavg != out.stats.end() && fedavg->second.total_count > 0) {
        const double ratio = static_cast<double>(stats.total_count) /
                             static_cast<double>(fedavg->second.total_count);
        std::snprintf(buf, sizeof(buf), "%.6f", ratio);
        os << buf;
      }
      os << '\n';
    }
  }
  return out;
}

// gen-data artifact: the synthetic corpus plus the config that produced it.
inline void write_dataset_csv(const RunConfig& cfg,
                              const std::filesystem::path& out_dir) {
  validate(cfg.data);
  std::filesystem::create_directories(out_dir);
  detail::write_json_file(out_dir / "config.resolved.json", to_json(cfg));
  auto os = detail::open_output(out_dir / "data.csv");
  export_csv(generate_clients(cfg.data), os);
}

}  // namespace fedsmc
