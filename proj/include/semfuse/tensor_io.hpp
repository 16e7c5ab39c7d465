#pragma once

#include "semfuse/common.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace semfuse {

/// Versioned binary container: a JSON metadata block followed by named f64
/// matrices and i64 arrays. Used for backbone weights and model checkpoints.
struct TensorFile {
  static constexpr uint32_t kVersion = 1;

  nlohmann::json meta;
  std::map<std::string, Mat> mats;
  std::map<std::string, std::vector<int64_t>> ints;

  void add(const std::string& name, const Mat& m) { mats[name] = m; }
  void add(const std::string& name, const Vec& v) { mats[name] = v; }
  void add(const std::string& name, const std::vector<int64_t>& v) {
    ints[name] = v;
  }

  const Mat& mat(const std::string& name) const;
  Vec vec(const std::string& name) const;
  const std::vector<int64_t>& int_array(const std::string& name) const;

  void save(const std::string& path) const;
  static TensorFile load(const std::string& path);
};

}  // namespace semfuse
