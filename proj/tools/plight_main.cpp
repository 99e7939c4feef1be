// Command-line driver: pretrain | transfer | ablation | analyze.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "plight/errors.hpp"
#include "plight/harness/config.hpp"
#include "plight/harness/experiments.hpp"
#include "plight/kv.hpp"

namespace {

using plight::harness::ExperimentConfig;
using plight::harness::Mode;
using plight::harness::RunRecord;

constexpr int kConfigError = 2;
constexpr int kCheckFailed = 3;

void print_records(const std::vector<RunRecord>& records) {
  std::printf("%-12s %-15s %6s %10s %8s %8s %12s %10s\n", "flow", "method", "seed", "m_tt", "m_th", "m_q", "ar", "pe");
  for (const auto& r : records) {
    const auto& m = r.episodes.empty() ? plight::sim::EpisodeMetrics{} : r.episodes.back().metrics;
    std::printf("%-12s %-15s %6llu %10.2f %8lld %8.3f ", r.flow.c_str(), r.method.c_str(),
                static_cast<unsigned long long>(r.seed), m.m_tt, m.m_th, m.m_q);
    if (r.ar_pe) std::printf("%12.2f %10.2f\n", r.ar_pe->ar, r.ar_pe->pe);
    else std::printf("%12s %10s\n", "-", "-");
  }
}

int finish_check(const ExperimentConfig& config, const std::vector<RunRecord>& records, bool check) {
  if (!check) return 0;
  const auto report = plight::harness::check_records(config, records);
  for (const auto& line : report.lines) std::printf("check: %s\n", line.c_str());
  std::printf("check %s\n", report.passed ? "PASSED" : "FAILED");
  return report.passed ? 0 : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plight: traffic signal control pretraining, transfer and analysis"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_offset = 0;
  bool check = false;
  int threads = -1;

  auto add_run = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed-offset", seed_offset, "added to every configured seed");
    sub->add_option("--threads", threads, "worker threads (0: one per core)");
    sub->add_flag("--check", check, "exit with status 3 when the mode's acceptance check fails");
    return sub;
  };
  auto* pretrain = add_run("pretrain", "train source agents");
  auto* transfer = add_run("transfer", "train a target agent from a pool of source agents");
  auto* ablation = add_run("ablation", "compare the full model with the decoder-free variant");

  std::string flows_dir;
  std::string out_dir;
  double beta = plight::analytics::kDefaultRouteDiscount;
  auto* analyze = app.add_subcommand("analyze", "flow density, CNT entropy and route-feature PCA");
  analyze->add_option("--flows", flows_dir, "directory of .flow files, or 'builtin'")->required();
  analyze->add_option("--out", out_dir, "output directory")->required();
  analyze->add_option("--route-discount", beta, "turn discount for route features");
  analyze->add_option("--config", config_path, "optional config supplying grid, seed and simulator constants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (analyze->parsed()) {
      ExperimentConfig config;
      const bool have_config = !config_path.empty();
      if (have_config) config = plight::harness::load_experiment_config(config_path);
      const auto reports = plight::harness::run_analyze(flows_dir, out_dir, beta, have_config ? &config : nullptr);
      std::printf("%-12s %12s %10s\n", "flow", "E_rho", "H");
      for (const auto& r : reports) std::printf("%-12s %12.4f %10.4f\n", r.flow.c_str(), r.e_rho, r.h);
      return 0;
    }

    ExperimentConfig config = plight::harness::load_experiment_config(config_path);
    plight::harness::apply_seed_offset(config, seed_offset);
    if (threads >= 0) config.threads = threads;
    std::vector<RunRecord> records;
    if (pretrain->parsed()) {
      if (config.mode != Mode::kPretrain) throw plight::ConfigError("config is not a pretrain config");
      records = plight::harness::run_pretrain(config);
    } else if (transfer->parsed()) {
      if (config.mode != Mode::kTransfer) throw plight::ConfigError("config is not a transfer config");
      records = plight::harness::run_transfer(config);
    } else if (ablation->parsed()) {
      if (config.mode != Mode::kAblation) throw plight::ConfigError("config is not an ablation config");
      records = plight::harness::run_ablation(config);
    }
    print_records(records);
    std::printf("results in %s\n", config.resolve(config.output).c_str());
    return finish_check(config, records, check);
  } catch (const plight::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const plight::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const plight::CompatibilityError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
