// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint container (little-endian):
//   magic "STRECKPT", u32 version,
//   u64 seed, u64 step, str config, str charset,
//   u32 count, then per array: str name, u32 ndim, i64 dims[ndim], f64 values[]
// where str is a u32 length followed by bytes. `config` holds the model.*
// keys in the key-value config format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "strec/model.hpp"

namespace strec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string config_text;
  std::string charset;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed,
                     std::uint64_t step);

// Rebuilds the model from the stored configuration and loads every array.
// Throws DataError for unreadable files and ConfigError when the charset or
// any array shape disagrees with the model.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path,
                                       CheckpointInfo* info = nullptr);

// Copies every parameter and buffer value from `source` into `target`.
void copy_weights(const Model& source, Model& target);

}  // namespace strec
