#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plight {

// Line-oriented `key = value` document. Blank lines and `#` comments are
// ignored; keys may repeat and keep their order of appearance.
class KeyValueDoc {
 public:
  KeyValueDoc() = default;

  static KeyValueDoc parse(std::string_view text, const std::string& origin = "<text>");
  static KeyValueDoc load(const std::string& path);

  void add(std::string key, std::string value);
  bool has(std::string_view key) const;

  // Last value for `key`; throws ConfigError when absent.
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::vector<std::string> get_all(std::string_view key) const;

  double get_double(std::string_view key) const;
  double get_double_or(std::string_view key, double fallback) const;
  long long get_int(std::string_view key) const;
  long long get_int_or(std::string_view key, long long fallback) const;
  std::vector<double> get_doubles(std::string_view key) const;
  std::vector<long long> get_ints(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_ = "<text>";
};

// Whitespace tokenization of a value.
std::vector<std::string> split_words(std::string_view text);
std::string trim(std::string_view text);

double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);
std::uint64_t parse_u64(std::string_view token, std::string_view what);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

}  // namespace plight
