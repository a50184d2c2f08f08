// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "strec/errors.hpp"

namespace strec {

namespace {

const std::vector<std::pair<std::string, std::string>>& default_entries() {
  static const std::vector<std::pair<std::string, std::string>> entries = {
      {"model.channels", "3"},
      {"model.rectifier.enabled", "true"},
      {"model.rectifier.points", "20"},
      {"model.rectifier.channels", "32,64,128,256,256,256"},
      {"model.rectifier.fc_units", "512"},
      {"model.rectifier.regularization", "1e-6"},
      {"model.backbone.stem", "32"},
      {"model.backbone.blocks", "32,64,128,256,512"},
      {"model.backbone.units", "3"},
      {"model.d_model", "512"},
      {"model.heads", "8"},
      {"model.d_ff", "2048"},
      {"model.encoder_layers", "4"},
      {"model.decoder_layers", "4"},
      {"model.dropout", "0.1"},
      {"model.max_decode_length", "30"},
      {"model.max_positions", "64"},
      {"loss.family", "focal"},
      {"loss.alpha", "1"},
      {"loss.gamma", "2"},
      {"train.lr", "2e-5"},
      {"train.batch_size", "32"},
      {"train.max_steps", "1000"},
      {"train.seed", "1"},
      {"train.clip_norm", "5"},
      {"train.eval_every", "100"},
      {"train.output_dir", "runs/default"},
      {"eval.normalization", "alnum-nocase"},
      {"data.seed", "7"},
      {"data.words", "builtin"},
      {"data.fonts", "simplex,duplex,complex,triplex"},
      {"data.height", "48"},
      {"data.scale_min", "1.0"},
      {"data.scale_max", "1.4"},
      {"data.rotation", "0"},
      {"data.curvature", "0"},
      {"data.perspective", "0"},
      {"data.noise", "0.02"},
      {"data.blur", "0"},
      {"data.color", "true"},
  };
  return entries;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& [k, v] : default_entries()) c.values_[k] = v;
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::apply_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!known(key)) {
      throw ConfigError(source + ":" + std::to_string(number) + ": unknown config key '" + key + "'");
    }
    set(key, trim(line.substr(eq + 1)));
  }
}

void Config::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_text(buffer.str(), path.string());
}

void Config::apply_overrides(const std::vector<std::string>& overrides) {
  for (std::string item : overrides) {
    if (item.starts_with("--")) item = item.substr(2);
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + item + "' must have the form --key=value");
    }
    set(item.substr(0, eq), item.substr(eq + 1));
  }
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }

std::uint64_t Config::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

double Config::get_double(const std::string& key) const {
  return parse_number<double>(key, get(key));
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

std::string Config::to_text(const std::string& prefix) const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k.starts_with(prefix)) out += k + " = " + v + "\n";
  }
  return out;
}

ModelConfig model_config_from(const Config& c) {
  ModelConfig m;
  m.channels = c.get_int("model.channels");
  m.rectifier.enabled = c.get_bool("model.rectifier.enabled");
  m.rectifier.localization.num_points = c.get_int("model.rectifier.points");
  m.rectifier.localization.channels = c.get_int_list("model.rectifier.channels");
  m.rectifier.localization.fc_units = c.get_int("model.rectifier.fc_units");
  m.rectifier.regularization = c.get_double("model.rectifier.regularization");
  m.backbone.stem_channels = c.get_int("model.backbone.stem");
  m.backbone.block_channels = c.get_int_list("model.backbone.blocks");
  m.backbone.units_per_block = c.get_int("model.backbone.units");
  m.attention.d_model = c.get_int("model.d_model");
  m.attention.heads = c.get_int("model.heads");
  m.attention.d_ff = c.get_int("model.d_ff");
  m.attention.encoder_layers = c.get_int("model.encoder_layers");
  m.attention.decoder_layers = c.get_int("model.decoder_layers");
  m.attention.dropout = c.get_double("model.dropout");
  m.attention.max_decode_length = c.get_int("model.max_decode_length");
  m.attention.max_positions = c.get_int("model.max_positions");
  m.validate();
  return m;
}

void store_model_config(const ModelConfig& m, Config& c) {
  c.set("model.channels", std::to_string(m.channels));
  c.set("model.rectifier.enabled", m.rectifier.enabled ? "true" : "false");
  c.set("model.rectifier.points", std::to_string(m.rectifier.localization.num_points));
  c.set("model.rectifier.channels", join(m.rectifier.localization.channels));
  c.set("model.rectifier.fc_units", std::to_string(m.rectifier.localization.fc_units));
  c.set("model.rectifier.regularization", format_double(m.rectifier.regularization));
  c.set("model.backbone.stem", std::to_string(m.backbone.stem_channels));
  c.set("model.backbone.blocks", join(m.backbone.block_channels));
  c.set("model.backbone.units", std::to_string(m.backbone.units_per_block));
  c.set("model.d_model", std::to_string(m.attention.d_model));
  c.set("model.heads", std::to_string(m.attention.heads));
  c.set("model.d_ff", std::to_string(m.attention.d_ff));
  c.set("model.encoder_layers", std::to_string(m.attention.encoder_layers));
  c.set("model.decoder_layers", std::to_string(m.attention.decoder_layers));
  c.set("model.dropout", format_double(m.attention.dropout));
  c.set("model.max_decode_length", std::to_string(m.attention.max_decode_length));
  c.set("model.max_positions", std::to_string(m.attention.max_positions));
}

LossConfig loss_config_from(const Config& c) {
  LossConfig l;
  l.family = parse_loss_family(c.get("loss.family"));
  l.alpha = c.get_double("loss.alpha");
  l.gamma = c.get_double("loss.gamma");
  l.validate();
  return l;
}

}  // namespace strec
