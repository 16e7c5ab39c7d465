#include "semfuse/config.hpp"

#include "semfuse/common.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace semfuse {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& KVConfig::known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"task", "binary"},                  // binary | multiclass
      {"fusion", "mfas"},                  // concat | gated_mcb | mfas
      {"text_backbone", "standin"},        // standin | bert-base | roberta-base
      {"image_backbone", "standin"},       // standin | resnet152 | densenet161
      {"text_seed", "101"},                // stand-in text encoder init seed
      {"image_seed", "202"},               // stand-in image encoder init seed
      {"max_len", "512"},
      {"truncation", "post_first"},        // post_first | ocr_first
      {"lr", "2e-6"},
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_eps", "1e-8"},
      {"batch_size", "4"},
      {"max_epochs", "50"},
      {"patience", "5"},
      {"early_stop_metric", "val_loss"},   // val_loss | val_accuracy
      {"seed", "7"},
      {"dropout", "0.2"},
      {"batch_norm", "true"},
      {"freeze_backbones", "true"},
      {"augment", "false"},
      {"reconstruct_target", "pre_norm"},  // pre_norm | post_norm
      {"image_norm_mean", "0.485,0.456,0.406"},
      {"image_norm_std", "0.229,0.224,0.225"},
      {"cache_dir", ""},                   // falls back to $SEMFUSE_CACHE
  };
  return keys;
}

KVConfig KVConfig::defaults() {
  KVConfig c;
  for (const auto& [k, v] : known_keys()) c.kv_[k] = v;
  return c;
}

KVConfig KVConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  KVConfig c = defaults();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key=value: " + t);
    }
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

void KVConfig::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override is not key=value: " + assignment);
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KVConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  bool known = std::any_of(keys.begin(), keys.end(),
                           [&](const auto& kv) { return kv.first == key; });
  if (!known) throw ConfigError("unknown config key: " + key);
  kv_[key] = value;
}

const std::string& KVConfig::str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

double KVConfig::num(const std::string& key) const {
  const std::string& v = str(key);
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + v);
  }
}

long KVConfig::integer(const std::string& key) const {
  const std::string& v = str(key);
  try {
    size_t pos = 0;
    long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: " + v);
  }
}

bool KVConfig::flag(const std::string& key) const {
  std::string v = str(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

std::string KVConfig::render() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  return out.str();
}

void KVConfig::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config snapshot: " + path);
  out << render();
}

}  // namespace semfuse
