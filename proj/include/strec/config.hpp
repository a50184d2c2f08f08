// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Key-value configuration. Files hold one `dotted.key = value` per line;
// `#` starts a comment. Every key has a built-in default and unknown keys
// are rejected, so a typo never passes silently.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "strec/model.hpp"
#include "strec/objective.hpp"

namespace strec {

class Config {
 public:
  // All known keys at their defaults.
  static Config defaults();

  // Throws ConfigError naming the key if it is unknown.
  void set(const std::string& key, const std::string& value);
  // Applies `key = value` lines; errors cite `source` and the line number.
  void apply_text(const std::string& text, const std::string& source = "<text>");
  void apply_file(const std::filesystem::path& path);
  // Applies `--key=value` / `key=value` items.
  void apply_overrides(const std::vector<std::string>& overrides);

  bool known(const std::string& key) const { return values_.contains(key); }
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // Sorted `key = value` lines, restricted to keys starting with `prefix`.
  std::string to_text(const std::string& prefix = "") const;

 private:
  std::map<std::string, std::string> values_;
};

ModelConfig model_config_from(const Config& config);
// Writes the model.* keys describing `model`.
void store_model_config(const ModelConfig& model, Config& config);
LossConfig loss_config_from(const Config& config);

}  // namespace strec
