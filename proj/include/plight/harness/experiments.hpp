#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plight/agent/trainer.hpp"
#include "plight/analytics/analytics.hpp"
#include "plight/harness/config.hpp"
#include "plight/transfer/transfer.hpp"

namespace plight::harness {

struct ArPe {
  double ar = 0.0;  // trapezoidal area under m_tt over episode index
  double pe = 0.0;  // m_tt after episode 3
};

ArPe compute_ar_pe(std::span<const double> series);

struct RunRecord {
  std::string flow;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<agent::EpisodeLog> episodes;
  std::optional<ArPe> ar_pe;  // absent with fewer than 3 episodes

  std::vector<double> m_tt_series() const;
  // Mean m_tt over the last n episodes (all of them if fewer).
  double tail_mean(std::size_t n) const;
  double head_mean(std::size_t n) const;
};

RunRecord make_record(std::string flow, std::string method, std::uint64_t seed,
                      std::vector<agent::EpisodeLog> episodes);

// Flow by built-in name, else as a path relative to the config.
sim::FlowSpec resolve_config_flow(const ExperimentConfig& config, const std::string& name);
agent::EnvConfig make_env(const ExperimentConfig& config, const sim::FlowSpec& flow, std::uint64_t seed);

struct PretrainOutcome {
  RunRecord record;
  agent::AgentModel model;
};

// One seeded source pretraining run, in memory.
PretrainOutcome pretrain_one(const ExperimentConfig& config, const sim::FlowSpec& flow, std::uint64_t seed,
                             bool with_decoder = true, const std::string& method = "PLight",
                             const agent::EpisodeCallback& on_episode = {});

struct TransferOutcome {
  RunRecord record;
  transfer::TransferResult result;
};

// One seeded PRLight run with the given frozen sources, in memory.
TransferOutcome transfer_one(const ExperimentConfig& config, const std::vector<transfer::SourceModel>& sources,
                             const sim::FlowSpec& flow, std::uint64_t seed,
                             const agent::EpisodeCallback& on_episode = {});

// File-producing drivers. Each writes per-run logs under config.output plus
// summary.csv and learning_curves.svg, and returns the records in seed order.
std::vector<RunRecord> run_pretrain(const ExperimentConfig& config);
std::vector<RunRecord> run_transfer(const ExperimentConfig& config);
std::vector<RunRecord> run_ablation(const ExperimentConfig& config);

// Characterizes every flow in `flows_dir` (`*.flow` files, or the built-in
// set when the directory is "builtin"): analytics.csv, a vehicle trace per
// flow and its PCA projection as CSV and SVG.
std::vector<analytics::EntropyReport> run_analyze(const std::string& flows_dir, const std::string& out_dir,
                                                  double route_discount = analytics::kDefaultRouteDiscount,
                                                  const ExperimentConfig* config = nullptr);

// Fixed-cycle phase for a decision step: each phase held `hold` steps.
int fixed_cycle_phase(int step, int hold = 3);

struct CheckReport {
  bool passed = true;
  std::vector<std::string> lines;
};

// Mode-specific sanity checks for --check.
CheckReport check_records(const ExperimentConfig& config, std::span<const RunRecord> records);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace plight::harness
