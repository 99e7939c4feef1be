#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plight/nn/matrix.hpp"

namespace plight::nn {

inline constexpr int kCheckpointVersion = 1;

// Named parameter tensors plus free-form string metadata. Serialized as a
// versioned JSON document; values round-trip bit-exactly.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Matrix>> tensors;

  bool has_tensor(const std::string& name) const;
  const Matrix& tensor(const std::string& name) const;
  const std::string& meta(const std::string& key) const;

  std::string to_text() const;
  static Checkpoint from_text(const std::string& text);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace plight::nn
