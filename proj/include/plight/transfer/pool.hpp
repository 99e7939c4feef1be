#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plight/agent/model.hpp"

namespace plight::transfer {

using SourceModel = std::shared_ptr<const agent::AgentModel>;

// Frozen source agents G_1..G_K plus the trainable target agent. Index K
// addresses the target; indices are stable for the lifetime of the pool.
class AgentPool {
 public:
  AgentPool(std::vector<SourceModel> sources, std::vector<std::string> names);

  std::size_t num_sources() const { return sources_.size(); }
  std::size_t size() const { return sources_.size() + 1; }
  std::size_t target_index() const { return sources_.size(); }

  const agent::AgentModel& source(std::size_t k) const { return *sources_.at(k); }
  const std::vector<SourceModel>& sources() const { return sources_; }
  const std::string& name(std::size_t k) const;

  // Parameters of member k; the target's live parameters for k == K.
  const agent::Network& member(std::size_t k) const;

  agent::AgentModel& target() { return target_; }
  const agent::AgentModel& target() const { return target_; }
  void set_target(agent::AgentModel model) { target_ = std::move(model); }

  std::vector<std::uint64_t> source_checksums() const;

 private:
  std::vector<SourceModel> sources_;
  std::vector<std::string> names_;
  agent::AgentModel target_;
};

// Element-wise mean of the source encoders (embedding and attention).
struct AverageEncoder {
  agent::Encoder encoder;

  // Embedding layer only; used to project observations into a common space.
  nn::Vector embed(std::span<const double> obs) const { return encoder.embed_only(obs); }
};

AverageEncoder average_encoder(std::span<const agent::Encoder* const> encoders);
AverageEncoder average_encoder(const AgentPool& pool);

// Pool manifest, key/value text:
//   agent = <flow-name> <checkpoint-path>
// Paths may contain `{seed}`, substituted when the manifest is resolved.
struct ManifestEntry {
  std::string flow;
  std::string path;
};

std::vector<ManifestEntry> parse_pool_manifest(const std::string& text, const std::string& origin = "<text>");
std::vector<ManifestEntry> load_pool_manifest(const std::string& path);
std::string format_pool_manifest(const std::vector<ManifestEntry>& entries);

// Loads every checkpoint (with `{seed}` replaced) and checks that all
// sources share one architecture with the expected observation width.
std::vector<SourceModel> load_sources(const std::vector<ManifestEntry>& entries, std::uint64_t seed,
                                      std::size_t obs_dim);

void check_compatible(std::span<const SourceModel> sources, std::size_t obs_dim);

}  // namespace plight::transfer
