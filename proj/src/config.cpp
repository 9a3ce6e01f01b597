// SPDX-License-Identifier: Apache-2.0
#include "retro/config.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace retro {

void TrainConfig::validate() const {
  if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw ConfigError("label_smoothing must be in [0,1)");
  if (batch_tokens < 8) throw ConfigError("batch_tokens must be >= 8");
  if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw ConfigError("adam betas must be in [0,1)");
  if (schedule_factor <= 0) throw ConfigError("schedule_factor must be positive");
}

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_number) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t x = s.find_first_not_of(" \t");
      if (x == std::string::npos) return std::string();
      std::size_t y = s.find_last_not_of(" \t");
      return s.substr(x, y - x + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_number) + ": empty key");
    if (out.count(key))
      throw ConfigError(origin + ":" + std::to_string(line_number) + ": duplicate key '" +
                        key + "'");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_kv_text(buffer.str(), path);
}

namespace {

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int out = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
  }
}

long long to_ll(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long out = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double out = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

void apply_config(const std::map<std::string, std::string>& kv, ModelConfig& model,
                  TrainConfig& train) {
  for (const auto& [key, value] : kv) {
    if (key == "layers_enc") model.layers_enc = to_int(key, value);
    else if (key == "layers_dec") model.layers_dec = to_int(key, value);
    else if (key == "heads") model.heads = to_int(key, value);
    else if (key == "d_model") model.d_model = to_int(key, value);
    else if (key == "d_ff") model.d_ff = to_int(key, value);
    else if (key == "dropout") model.dropout = to_double(key, value);
    else if (key == "max_relative_distance") model.max_relative_distance = to_int(key, value);
    else if (key == "lambda_intra") model.lambda_intra = to_double(key, value);
    else if (key == "lambda_cross") model.lambda_cross = to_double(key, value);
    else if (key == "bias_mode") {
      try {
        model.bias_mode = bias_mode_from_string(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "sigma") model.sigma = to_double(key, value);
    else if (key == "w1") model.hard_weights[0] = to_double(key, value);
    else if (key == "w2") model.hard_weights[1] = to_double(key, value);
    else if (key == "w3") model.hard_weights[2] = to_double(key, value);
    else if (key == "w4") model.hard_weights[3] = to_double(key, value);
    else if (key == "batch_tokens") train.batch_tokens = to_ll(key, value);
    else if (key == "schedule_factor") train.schedule_factor = to_double(key, value);
    else if (key == "warmup_steps") train.warmup_steps = to_int(key, value);
    else if (key == "adam_beta1") train.adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") train.adam_beta2 = to_double(key, value);
    else if (key == "adam_eps") train.adam_eps = to_double(key, value);
    else if (key == "label_smoothing") train.label_smoothing = to_double(key, value);
    else if (key == "validate_every") train.validate_every = to_int(key, value);
    else if (key == "patience") train.patience = to_int(key, value);
    else if (key == "max_steps") train.max_steps = to_int(key, value);
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(to_ll(key, value));
    else throw ConfigError("unknown config key: '" + key + "'");
  }
  train.validate();
}

std::vector<std::pair<std::string, std::string>> resolved_config(const ModelConfig& model,
                                                                 const TrainConfig& train) {
  std::vector<std::pair<std::string, std::string>> out;
  out.push_back({"layers_enc", std::to_string(model.layers_enc)});
  out.push_back({"layers_dec", std::to_string(model.layers_dec)});
  out.push_back({"heads", std::to_string(model.heads)});
  out.push_back({"d_model", std::to_string(model.d_model)});
  out.push_back({"d_ff", std::to_string(model.d_ff)});
  out.push_back({"dropout", format_double(model.dropout)});
  out.push_back({"max_relative_distance", std::to_string(model.max_relative_distance)});
  out.push_back({"lambda_intra", format_double(model.lambda_intra)});
  out.push_back({"lambda_cross", format_double(model.lambda_cross)});
  out.push_back({"bias_mode", to_string(model.bias_mode)});
  out.push_back({"sigma", format_double(model.sigma)});
  for (int i = 0; i < 4; ++i)
    out.push_back({"w" + std::to_string(i + 1), format_double(model.hard_weights[i])});
  out.push_back({"batch_tokens", std::to_string(train.batch_tokens)});
  out.push_back({"schedule_factor", format_double(train.schedule_factor)});
  out.push_back({"warmup_steps", std::to_string(train.warmup_steps)});
  out.push_back({"adam_beta1", format_double(train.adam_beta1)});
  out.push_back({"adam_beta2", format_double(train.adam_beta2)});
  out.push_back({"adam_eps", format_double(train.adam_eps)});
  out.push_back({"label_smoothing", format_double(train.label_smoothing)});
  out.push_back({"validate_every", std::to_string(train.validate_every)});
  out.push_back({"patience", std::to_string(train.patience)});
  out.push_back({"max_steps", std::to_string(train.max_steps)});
  out.push_back({"seed", std::to_string(train.seed)});
  return out;
}

ManifestWriter::ManifestWriter(std::string command) {
  entries_.push_back({"command", std::move(command)});
  entries_.push_back({"artifact_version", kArtifactVersion});
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  entries_.push_back(
      {"start_unix_ms",
       std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(now).count())});
}

void ManifestWriter::add(const std::string& key, const std::string& value) {
  entries_.push_back({key, value});
}

void ManifestWriter::add_all(const std::vector<std::pair<std::string, std::string>>& entries,
                             const std::string& prefix) {
  for (const auto& [key, value] : entries) entries_.push_back({prefix + key, value});
}

void ManifestWriter::write(const std::string& path) const {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest: " + tmp);
    for (const auto& [key, value] : entries_) out << key << " = " << value << "\n";
    out << "end_unix_ms = "
        << std::chrono::duration_cast<std::chrono::milliseconds>(now).count() << "\n";
    if (!out) throw ConfigError("manifest write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("cannot rename manifest into place: " + path);
}

}  // namespace retro
