// SPDX-License-Identifier: Apache-2.0
#include "retro/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace retro {

namespace {

constexpr char kMagic[] = "RETROTF1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  return value;
}

std::string config_text(const ModelConfig& cfg, const Vocab& vocab) {
  std::ostringstream out;
  out.precision(17);
  out << "layers_enc = " << cfg.layers_enc << "\n";
  out << "layers_dec = " << cfg.layers_dec << "\n";
  out << "heads = " << cfg.heads << "\n";
  out << "d_model = " << cfg.d_model << "\n";
  out << "d_ff = " << cfg.d_ff << "\n";
  out << "dropout = " << cfg.dropout << "\n";
  out << "max_relative_distance = " << cfg.max_relative_distance << "\n";
  out << "vocab_size = " << cfg.vocab_size << "\n";
  out << "lambda_intra = " << cfg.lambda_intra << "\n";
  out << "lambda_cross = " << cfg.lambda_cross << "\n";
  out << "bias_mode = " << to_string(cfg.bias_mode) << "\n";
  out << "sigma = " << cfg.sigma << "\n";
  for (int i = 0; i < 4; ++i)
    out << "w" << (i + 1) << " = " << cfg.hard_weights[i] << "\n";
  const auto& ids = vocab.id_list();
  for (std::size_t i = 4; i < ids.size(); ++i)
    out << "vocab." << (i - 4) << " = " << ids[i] << "\n";
  return out.str();
}

std::pair<ModelConfig, Vocab> parse_config_text(const std::string& text) {
  ModelConfig cfg;
  std::map<int, std::string> vocab_entries;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sep = line.find(" = ");
    if (sep == std::string::npos) throw CheckpointError("malformed config line: " + line);
    const std::string key = line.substr(0, sep);
    const std::string value = line.substr(sep + 3);
    if (key == "layers_enc") cfg.layers_enc = std::stoi(value);
    else if (key == "layers_dec") cfg.layers_dec = std::stoi(value);
    else if (key == "heads") cfg.heads = std::stoi(value);
    else if (key == "d_model") cfg.d_model = std::stoi(value);
    else if (key == "d_ff") cfg.d_ff = std::stoi(value);
    else if (key == "dropout") cfg.dropout = std::stod(value);
    else if (key == "max_relative_distance") cfg.max_relative_distance = std::stoi(value);
    else if (key == "vocab_size") cfg.vocab_size = std::stoi(value);
    else if (key == "lambda_intra") cfg.lambda_intra = std::stod(value);
    else if (key == "lambda_cross") cfg.lambda_cross = std::stod(value);
    else if (key == "bias_mode") cfg.bias_mode = bias_mode_from_string(value);
    else if (key == "sigma") cfg.sigma = std::stod(value);
    else if (key == "w1") cfg.hard_weights[0] = std::stod(value);
    else if (key == "w2") cfg.hard_weights[1] = std::stod(value);
    else if (key == "w3") cfg.hard_weights[2] = std::stod(value);
    else if (key == "w4") cfg.hard_weights[3] = std::stod(value);
    else if (key.rfind("vocab.", 0) == 0)
      vocab_entries[std::stoi(key.substr(6))] = value;
    else
      throw CheckpointError("unknown checkpoint config key: " + key);
  }
  std::vector<std::string> tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [index, token] : vocab_entries) {
    if (index != static_cast<int>(tokens.size()) - 4)
      throw CheckpointError("vocab entries out of order in checkpoint");
    tokens.push_back(token);
  }
  return {cfg, Vocab::from_id_list(std::move(tokens))};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config, const Vocab& vocab,
                     const ModelParams& params) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open for writing: " + tmp);
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));

    const std::string cfg_text = config_text(config, vocab);
    write_raw<std::uint64_t>(out, cfg_text.size());
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    const auto named = params.named();
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
      write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape().size()));
      for (Index d : tensor.shape()) write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(d));
      out.write(reinterpret_cast<const char*>(tensor.data().data()),
                static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) throw CheckpointError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw CheckpointError("cannot rename " + tmp + " to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);

  char magic[kMagicLen];
  in.read(magic, static_cast<std::streamsize>(kMagicLen));
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);

  const auto cfg_len = read_raw<std::uint64_t>(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw CheckpointError("checkpoint truncated");
  auto [config, vocab] = parse_config_text(cfg_text);

  ModelParams params = ModelParams::init(config, 0);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, tensor] : params.named()) by_name.emplace(name, tensor);

  const auto count = read_raw<std::uint32_t>(in);
  if (count != by_name.size())
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                          std::to_string(by_name.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_raw<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d)
      shape.push_back(static_cast<Index>(read_raw<std::uint64_t>(in)));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("unexpected tensor in checkpoint: " + name);
    Tensor tensor = it->second;
    if (tensor.shape() != shape)
      throw CheckpointError("shape mismatch for tensor " + name);
    in.read(reinterpret_cast<char*>(tensor.data().data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint truncated in tensor " + name);
  }
  return {config, std::move(vocab), std::move(params)};
}

}  // namespace retro
