#include "refnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "refnet/error.hpp"

namespace refnet {

using nlohmann::json;

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (size_t i = 0; i < bytes.size(); i += 3) {
    uint32_t chunk = static_cast<uint32_t>(bytes[i]) << 16;
    int have = 1;
    if (i + 1 < bytes.size()) {
      chunk |= static_cast<uint32_t>(bytes[i + 1]) << 8;
      have = 2;
    }
    if (i + 2 < bytes.size()) {
      chunk |= bytes[i + 2];
      have = 3;
    }
    out.push_back(kB64Alphabet[(chunk >> 18) & 63]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 63]);
    out.push_back(have >= 2 ? kB64Alphabet[(chunk >> 6) & 63] : '=');
    out.push_back(have >= 3 ? kB64Alphabet[chunk & 63] : '=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<uint8_t> b64_decode(const std::string& text) {
  std::vector<uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  uint32_t chunk = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = b64_value(c);
    if (v < 0) throw ParseError("checkpoint: invalid base64 payload");
    chunk = (chunk << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<uint8_t>((chunk >> bits) & 0xff));
    }
  }
  return out;
}

std::vector<uint8_t> doubles_to_le_bytes(const std::vector<double>& values) {
  std::vector<uint8_t> bytes(values.size() * 8);
  for (size_t i = 0; i < values.size(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, &values[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<uint8_t>((bits >> (8 * b)) & 0xff);
  }
  return bytes;
}

std::vector<double> le_bytes_to_doubles(const std::vector<uint8_t>& bytes) {
  if (bytes.size() % 8 != 0) throw ParseError("checkpoint: blob size not a multiple of 8");
  std::vector<double> values(bytes.size() / 8);
  for (size_t i = 0; i < values.size(); ++i) {
    uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + b];
    std::memcpy(&values[i], &bits, 8);
  }
  return values;
}

}  // namespace

Checkpoint snapshot_params(const ParameterStore& params) {
  Checkpoint ckpt;
  for (const auto& p : params.all()) {
    Tensor t;
    t.shape = p.tensor->shape;
    t.values = p.tensor->values;
    ckpt.tensors.emplace_back(p.name, std::move(t));
  }
  return ckpt;
}

void restore_params(ParameterStore& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.all().size()) {
    throw DataError("restore_params: checkpoint has " + std::to_string(ckpt.tensors.size()) +
                    " tensors, store has " + std::to_string(params.all().size()));
  }
  for (const auto& [name, tensor] : ckpt.tensors) {
    auto dst = params.get(name);
    if (dst->shape != tensor.shape) {
      throw DataError("restore_params: shape mismatch for " + name);
    }
    dst->values = tensor.values;
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json doc;
  doc["format"] = "refnet-checkpoint";
  doc["version"] = ckpt.version;
  doc["vocab_hash"] = ckpt.vocab_hash;
  doc["config"] = ckpt.config;
  doc["epoch"] = ckpt.epoch;
  doc["val_bleu4"] = ckpt.val_bleu4;
  json tensors = json::array();
  for (const auto& [name, tensor] : ckpt.tensors) {
    tensors.push_back({{"name", name},
                       {"shape", tensor.shape},
                       {"data", b64_encode(doubles_to_le_bytes(tensor.values))}});
  }
  doc["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw DataError("save_checkpoint: cannot write " + path);
  out << doc.dump();
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("load_checkpoint: malformed JSON in " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "refnet-checkpoint") {
    throw ParseError("load_checkpoint: " + path + " is not a refnet checkpoint");
  }
  Checkpoint ckpt;
  ckpt.version = doc.at("version").get<int>();
  ckpt.vocab_hash = doc.at("vocab_hash").get<uint64_t>();
  ckpt.config = doc.value("config", json::object());
  ckpt.epoch = doc.value("epoch", 0);
  ckpt.val_bleu4 = doc.value("val_bleu4", 0.0);
  for (const auto& t : doc.at("tensors")) {
    Tensor tensor;
    tensor.shape = t.at("shape").get<std::vector<int>>();
    tensor.values = le_bytes_to_doubles(b64_decode(t.at("data").get<std::string>()));
    size_t expect = 1;
    for (int d : tensor.shape) expect *= static_cast<size_t>(d);
    if (tensor.values.size() != expect) {
      throw ParseError("load_checkpoint: tensor " + t.at("name").get<std::string>() +
                       " blob does not match its shape");
    }
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(tensor));
  }
  return ckpt;
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"word_dim", c.word_dim},
              {"char_dim", c.char_dim},
              {"char_proj_dim", c.char_proj_dim},
              {"tag_dim", c.tag_dim},
              {"pos_dim", c.pos_dim},
              {"pos_clip", c.pos_clip},
              {"hidden_per_dir", c.hidden_per_dir},
              {"enc_layers", c.enc_layers},
              {"dec_layers", c.dec_layers},
              {"att_dim", c.att_dim},
              {"use_char", c.use_char},
              {"use_tag", c.use_tag},
              {"use_pos", c.use_pos},
              {"use_a3", c.use_a3},
              {"lagged_output_contexts", c.lagged_output_contexts}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.word_dim = j.value("word_dim", c.word_dim);
  c.char_dim = j.value("char_dim", c.char_dim);
  c.char_proj_dim = j.value("char_proj_dim", c.char_proj_dim);
  c.tag_dim = j.value("tag_dim", c.tag_dim);
  c.pos_dim = j.value("pos_dim", c.pos_dim);
  c.pos_clip = j.value("pos_clip", c.pos_clip);
  c.hidden_per_dir = j.value("hidden_per_dir", c.hidden_per_dir);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.att_dim = j.value("att_dim", c.att_dim);
  c.use_char = j.value("use_char", c.use_char);
  c.use_tag = j.value("use_tag", c.use_tag);
  c.use_pos = j.value("use_pos", c.use_pos);
  c.use_a3 = j.value("use_a3", c.use_a3);
  c.lagged_output_contexts = j.value("lagged_output_contexts", c.lagged_output_contexts);
  return c;
}

}  // namespace refnet
