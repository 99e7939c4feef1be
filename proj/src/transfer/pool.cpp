#include "plight/transfer/pool.hpp"

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::transfer {

AgentPool::AgentPool(std::vector<SourceModel> sources, std::vector<std::string> names)
    : sources_(std::move(sources)), names_(std::move(names)) {
  if (sources_.empty()) throw ContractError("agent pool needs at least one source agent");
  for (const auto& s : sources_) {
    if (!s) throw ContractError("agent pool contains a null source");
  }
  if (names_.empty()) {
    for (const auto& s : sources_) names_.push_back(s->source_flow);
  }
  if (names_.size() != sources_.size()) throw ContractError("one name per source agent required");
}

const std::string& AgentPool::name(std::size_t k) const {
  static const std::string kTarget = "target";
  if (k == target_index()) return kTarget;
  return names_.at(k);
}

const agent::Network& AgentPool::member(std::size_t k) const {
  if (k == target_index()) return target_.live;
  return sources_.at(k)->live;
}

std::vector<std::uint64_t> AgentPool::source_checksums() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : sources_) out.push_back(s->live.checksum());
  return out;
}

AverageEncoder average_encoder(std::span<const agent::Encoder* const> encoders) {
  if (encoders.empty()) throw ContractError("average encoder needs at least one source encoder");
  AverageEncoder avg;
  avg.encoder = *encoders[0];
  std::vector<nn::Param*> dst;
  avg.encoder.for_each_param("e", [&](const std::string&, nn::Param& p) { dst.push_back(&p); });
  for (std::size_t k = 1; k < encoders.size(); ++k) {
    std::size_t idx = 0;
    encoders[k]->for_each_param("e", [&](const std::string&, const nn::Param& p) {
      if (idx >= dst.size() || !p.value.same_shape(dst[idx]->value)) {
        throw CompatibilityError("source encoders have different shapes");
      }
      auto out = dst[idx]->value.data();
      const auto in = p.value.data();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
      ++idx;
    });
  }
  const double inv = 1.0 / static_cast<double>(encoders.size());
  for (nn::Param* p : dst) {
    for (double& v : p->value.data()) v *= inv;
    p->zero_grad();
  }
  return avg;
}

AverageEncoder average_encoder(const AgentPool& pool) {
  std::vector<const agent::Encoder*> encoders;
  for (const auto& s : pool.sources()) encoders.push_back(&s->live.encoder);
  return average_encoder(encoders);
}

std::vector<ManifestEntry> parse_pool_manifest(const std::string& text, const std::string& origin) {
  const auto doc = KeyValueDoc::parse(text, origin);
  std::vector<ManifestEntry> entries;
  for (const auto& value : doc.get_all("agent")) {
    const auto words = split_words(value);
    if (words.size() != 2) throw ParseError(origin + ": agent needs '<flow> <checkpoint-path>'");
    entries.push_back({words[0], words[1]});
  }
  if (entries.empty()) throw ConfigError(origin + ": pool manifest lists no agents");
  return entries;
}

std::vector<ManifestEntry> load_pool_manifest(const std::string& path) {
  return parse_pool_manifest(KeyValueDoc::load(path).to_text(), path);
}

std::string format_pool_manifest(const std::vector<ManifestEntry>& entries) {
  KeyValueDoc doc;
  for (const auto& e : entries) doc.add("agent", e.flow + " " + e.path);
  return doc.to_text();
}

namespace {

std::string substitute_seed(std::string path, std::uint64_t seed) {
  const std::string token = "{seed}";
  for (auto pos = path.find(token); pos != std::string::npos; pos = path.find(token)) {
    path.replace(pos, token.size(), std::to_string(seed));
  }
  return path;
}

}  // namespace

void check_compatible(std::span<const SourceModel> sources, std::size_t obs_dim) {
  if (sources.empty()) throw ContractError("no source agents");
  const auto& ref = sources[0]->config();
  for (const auto& s : sources) {
    const auto& c = s->config();
    if (c.obs_dim != obs_dim) {
      throw CompatibilityError("source '" + s->source_flow + "' expects observations of width " +
                               std::to_string(c.obs_dim) + ", environment provides " + std::to_string(obs_dim));
    }
    if (c.embed_dim != ref.embed_dim || c.actions != ref.actions || c.decoder_hidden != ref.decoder_hidden ||
        c.q_hidden != ref.q_hidden || !c.with_decoder) {
      throw CompatibilityError("source '" + s->source_flow + "' does not share the pool architecture");
    }
  }
}

std::vector<SourceModel> load_sources(const std::vector<ManifestEntry>& entries, std::uint64_t seed,
                                      std::size_t obs_dim) {
  std::vector<SourceModel> sources;
  for (const auto& e : entries) {
    auto model = agent::AgentModel::from_checkpoint(nn::Checkpoint::load(substitute_seed(e.path, seed)));
    model.source_flow = e.flow;
    sources.push_back(std::make_shared<const agent::AgentModel>(std::move(model)));
  }
  check_compatible(sources, obs_dim);
  return sources;
}

}  // namespace plight::transfer
