#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plight/agent/model.hpp"
#include "plight/agent/trainer.hpp"
#include "plight/transfer/transfer.hpp"

namespace plight::harness {

enum class Mode { kPretrain, kTransfer, kAblation, kAnalyze };
enum class AblationVariant { kEDQ, kEQ, kBoth };

const char* mode_name(Mode m);

// Experiment description read from a key/value file. Relative paths are
// resolved against the directory holding the config file.
struct ExperimentConfig {
  Mode mode = Mode::kPretrain;
  std::string base_dir = ".";

  std::vector<std::string> flows;  // built-in names or flow-file paths
  int rows = 2;
  int cols = 2;
  int episodes = 30;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "results";

  // transfer
  std::string pool;
  bool baseline = true;  // also train from-scratch PLight on the same seeds

  // ablation
  AblationVariant variant = AblationVariant::kBoth;

  // analyze
  std::string flows_dir;

  int threads = 0;  // 0: one per hardware thread
  bool write_traces = false;
  // Substream of the run seed that drives demand; runs in the same stream
  // with the same seed see identical traffic.
  std::uint64_t traffic_stream = 1;
  double check_fraction = 0.8;
  double ablation_tolerance = 0.10;
  double route_discount = 0.9;

  double free_flow_s = 30.0;
  sim::SimConfig sim;
  agent::ModelConfig model;
  agent::TrainConfig train;
  transfer::TransferConfig transfer;

  std::string resolve(const std::string& path) const;
  void validate() const;
  // Effective configuration, parseable by parse_experiment_config.
  std::string to_text() const;
};

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin = "<text>",
                                         const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

void apply_seed_offset(ExperimentConfig& config, long long offset);

}  // namespace plight::harness
