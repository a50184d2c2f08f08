// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "strec/config.hpp"
#include "strec/errors.hpp"

namespace strec {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'R', 'E', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_doubles(std::span<const double> v) {
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 26)) fail("string length out of range");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint " + path_ + ": " + what);
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed,
                     std::uint64_t step) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.put(kCheckpointVersion);
    w.put(seed);
    w.put(step);
    Config config = Config::defaults();
    store_model_config(model.config(), config);
    w.put_string(config.to_text("model."));
    w.put_string(Vocabulary::instance().charset());
    const auto entries = model.store().all();
    w.put(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
      w.put_string(name);
      w.put(static_cast<std::uint32_t>(tensor.ndim()));
      for (auto d : tensor.shape()) w.put(static_cast<std::int64_t>(d));
      w.put_doubles(tensor.data());
    }
    if (!out) throw DataError("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  CheckpointInfo meta;
  meta.seed = r.get<std::uint64_t>();
  meta.step = r.get<std::uint64_t>();
  meta.config_text = r.get_string();
  meta.charset = r.get_string();
  if (meta.charset != Vocabulary::instance().charset()) {
    throw ConfigError("checkpoint " + path.string() +
                      ": character set differs from this build's vocabulary");
  }
  Config config = Config::defaults();
  config.apply_text(meta.config_text, path.string());
  auto model = std::make_unique<Model>(model_config_from(config), meta.seed);

  std::map<std::string, Tensor> targets;
  for (auto& [name, tensor] : model->store().all()) targets[name] = tensor;
  const auto count = r.get<std::uint32_t>();
  std::size_t loaded = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) r.fail("array '" + name + "' has implausible rank");
    Shape shape(ndim);
    for (auto& d : shape) d = r.get<std::int64_t>();
    auto it = targets.find(name);
    if (it == targets.end()) {
      throw ConfigError("checkpoint array '" + name + "' does not exist in the model");
    }
    if (it->second.shape() != shape) {
      throw ConfigError("checkpoint array '" + name + "' has shape " + shape_to_string(shape) +
                        ", model expects " + shape_to_string(it->second.shape()));
    }
    auto dst = it->second.mutable_data();
    r.read(reinterpret_cast<char*>(dst.data()), dst.size() * sizeof(double));
    ++loaded;
  }
  if (loaded != targets.size()) {
    throw ConfigError("checkpoint " + path.string() + " holds " + std::to_string(loaded) +
                      " arrays, model needs " + std::to_string(targets.size()));
  }
  if (info) *info = std::move(meta);
  return model;
}

void copy_weights(const Model& source, Model& target) {
  const auto src = source.store().all();
  auto dst = target.store().all();
  if (src.size() != dst.size()) throw ConfigError("copy_weights: models differ in structure");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape()) {
      throw ConfigError("copy_weights: mismatch at '" + src[i].first + "'");
    }
    auto s = src[i].second.data();
    std::copy(s.begin(), s.end(), dst[i].second.mutable_data().begin());
  }
}

}  // namespace strec
