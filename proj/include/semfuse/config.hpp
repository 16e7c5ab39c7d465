#pragma once

#include <map>
#include <string>
#include <vector>

namespace semfuse {

/// Flat key=value run configuration. Every training/model knob is addressable
/// here; CLI overrides win over file values which win over defaults.
class KVConfig {
 public:
  /// All known keys with their default values.
  static KVConfig defaults();

  /// defaults() overlaid with the contents of a key=value file.
  /// Lines starting with '#' and blank lines are ignored.
  static KVConfig from_file(const std::string& path);

  /// Applies a single "key=value" override. Unknown keys are rejected.
  void apply_override(const std::string& assignment);

  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  long integer(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Fully-resolved snapshot, one key=value per line, sorted by key.
  std::string render() const;
  void write(const std::string& path) const;

  static const std::vector<std::pair<std::string, std::string>>& known_keys();

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace semfuse
