#include "plight/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "plight/errors.hpp"

namespace plight::nn {

namespace {
constexpr const char* kFormatTag = "plight-checkpoint";
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw CompatibilityError("checkpoint has no tensor '" + name + "'");
}

const std::string& Checkpoint::meta(const std::string& key) const {
  const auto it = metadata.find(key);
  if (it == metadata.end()) throw CompatibilityError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

std::string Checkpoint::to_text() const {
  nlohmann::ordered_json doc;
  doc["format"] = kFormatTag;
  doc["version"] = kCheckpointVersion;
  doc["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metadata) doc["metadata"][k] = v;
  auto& list = doc["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, m] : tensors) {
    nlohmann::ordered_json t;
    t["name"] = name;
    t["shape"] = {m.rows(), m.cols()};
    t["values"] = m.storage();
    list.push_back(std::move(t));
  }
  return doc.dump(1) + "\n";
}

Checkpoint Checkpoint::from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatTag) throw ParseError("not a plight checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CompatibilityError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    for (const auto& [k, v] : doc.at("metadata").items()) ck.metadata[k] = v.get<std::string>();
    for (const auto& t : doc.at("tensors")) {
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw ParseError("tensor shape must have two entries");
      auto values = t.at("values").get<std::vector<double>>();
      ck.tensors.emplace_back(t.at("name").get<std::string>(), Matrix(shape[0], shape[1], std::move(values)));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << to_text();
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace plight::nn
