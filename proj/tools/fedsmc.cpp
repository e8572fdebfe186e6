// Command-line front end: configure, run, and report federated training
// experiments. Every artifact lands under --out with fixed file names so
// runs stay diffable.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fedsmc/audit.hpp"
#include "fedsmc/experiment.hpp"
#include "fedsmc/protocol.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string strategy;
  std::string log_path;
  std::uint64_t seed = 0;
  int rounds = 0;
  int repeats = 0;
  bool allow_degenerate = false;
};

// True when the subcommand defines the flag and the user passed it.
bool flag_given(const CLI::App* cmd, const std::string& name) {
  const auto* option = cmd->get_option_no_throw(name);
  return option != nullptr && option->count() > 0;
}

// Flags override individual config fields; only flags the user passed are
// applied, so config-file values survive otherwise.
fedsmc::RunConfig resolve_config(const CLI::App* cmd, const CliOptions& opt) {
  fedsmc::RunConfig cfg;
  if (!opt.config_path.empty()) cfg = fedsmc::load_config_file(opt.config_path);
  if (flag_given(cmd, "--seed")) cfg.master_seed = opt.seed;
  if (flag_given(cmd, "--strategy")) {
    cfg.strategy = fedsmc::parse_strategy(opt.strategy);
  }
  if (flag_given(cmd, "--rounds")) cfg.rounds = opt.rounds;
  if (flag_given(cmd, "--repeats")) cfg.repeats = opt.repeats;
  if (flag_given(cmd, "--allow-degenerate")) {
    cfg.allow_degenerate_clusters = true;
  }
  return cfg;
}

void add_common_options(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--out", opt.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--seed", opt.seed, "master seed override");
}

void add_training_options(CLI::App* cmd, CliOptions& opt) {
  add_common_options(cmd, opt);
  cmd->add_option("--strategy", opt.strategy,
                  "aggregation strategy: fedavg, dp, or smc");
  cmd->add_option("--rounds", opt.rounds, "training rounds override");
  cmd->add_option("--repeats", opt.repeats, "repeat count override");
  cmd->add_flag("--allow-degenerate", opt.allow_degenerate,
                "permit smc clusters of size 1");
}

void print_report_line(const fedsmc::EvalReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%-6s avg accuracy %.2f%%  avg F1 %.2f%%  (%d repeat%s)",
                report.method.c_str(), report.avg_accuracy_pct,
                report.avg_f1_pct, report.repeats,
                report.repeats == 1 ? "" : "s");
  std::cout << buf << '\n';
}

int run_command(const CLI::App* cmd, const CliOptions& opt) {
  const auto cfg = resolve_config(cmd, opt);
  const auto out = fedsmc::run_experiment(cfg, opt.out_dir);
  print_report_line(out.report);
  std::cout << "messages " << out.stats.total_count << " ("
            << out.stats.total_bytes << " bytes), server disclosures "
            << out.audit.server_disclosures.size() << '\n'
            << "artifacts in " << opt.out_dir << '\n';
  return 0;
}

int compare_command(const CLI::App* cmd, const CliOptions& opt) {
  const auto cfg = resolve_config(cmd, opt);
  const auto out = fedsmc::compare_experiments(cfg, opt.out_dir);
  for (const auto& report : out.reports) print_report_line(report);
  const auto fedavg = out.stats.find("fedavg");
  if (fedavg != out.stats.end()) {
    for (const auto& [tag, stats] : out.stats) {
      if (tag == "fedavg") continue;
      char buf[96];
      std::snprintf(buf, sizeof(buf), "overhead %s/fedavg = %.2f",
                    tag.c_str(),
                    static_cast<double>(stats.total_count) /
                        static_cast<double>(fedavg->second.total_count));
      std::cout << buf << '\n';
    }
  }
  std::cout << "artifacts in " << opt.out_dir << '\n';
  return 0;
}

int audit_command(const CliOptions& opt) {
  std::ifstream is(opt.log_path);
  if (!is) throw fedsmc::UsageError("audit: cannot open '" + opt.log_path + "'");
  const auto records = fedsmc::parse_message_log(is);
  const auto stats = fedsmc::count_messages(records);
  std::filesystem::create_directories(opt.out_dir);
  fedsmc::detail::write_json_file(
      std::filesystem::path(opt.out_dir) / "audit.json",
      {{"message_stats", fedsmc::to_json(stats)}});
  std::cout << "messages " << stats.total_count << " (" << stats.total_bytes
            << " bytes)\n";
  for (const auto& [kind, s] : stats.by_kind) {
    std::cout << "  " << kind << ": " << s.count << '\n';
  }
  std::cout << "artifacts in " << opt.out_dir << '\n';
  return 0;
}

int gen_data_command(const CLI::App* cmd, const CliOptions& opt) {
  auto cfg = resolve_config(cmd, opt);
  if (flag_given(cmd, "--seed")) cfg.data.seed = opt.seed;
  fedsmc::write_dataset_csv(cfg, opt.out_dir);
  std::cout << "clients " << cfg.data.clients << ", data.csv in " << opt.out_dir
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with cluster-masked "
               "secure aggregation"};
  app.require_subcommand(1);
  CliOptions opt;

  auto* run_cmd = app.add_subcommand("run", "train one strategy, write reports");
  add_training_options(run_cmd, opt);
  auto* compare_cmd =
      app.add_subcommand("compare", "run strategies side by side over repeats");
  add_training_options(compare_cmd, opt);
  auto* audit_cmd =
      app.add_subcommand("audit", "recount messages from an exported log");
  audit_cmd->add_option("log", opt.log_path, "messages.log to analyze")
      ->required();
  audit_cmd->add_option("--out", opt.out_dir, "output directory")
      ->capture_default_str();
  auto* gen_cmd =
      app.add_subcommand("gen-data", "emit the synthetic per-client datasets");
  add_common_options(gen_cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run_cmd) return run_command(run_cmd, opt);
    if (*compare_cmd) return compare_command(compare_cmd, opt);
    if (*audit_cmd) return audit_command(opt);
    return gen_data_command(gen_cmd, opt);
  } catch (const fedsmc::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
