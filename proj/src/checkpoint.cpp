#include "zeroflow/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "zeroflow/errors.hpp"

namespace zf {

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

nlohmann::json mlp_to_json(const MlpParams& mlp) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    layers.push_back({{"weight", tensor_to_json(mlp.weights[i])}, {"bias", tensor_to_json(mlp.biases[i])}});
  }
  return {
      {"dims", mlp.dims},
      {"output", mlp.output == OutputActivation::Sigmoid ? "sigmoid" : "none"},
      {"layers", layers},
  };
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams mlp;
  mlp.dims = j.at("dims").get<std::vector<std::size_t>>();
  const std::string out = j.at("output").get<std::string>();
  if (out == "sigmoid") mlp.output = OutputActivation::Sigmoid;
  else if (out == "none") mlp.output = OutputActivation::None;
  else throw FormatError("checkpoint: unknown output activation '" + out + "'");

  const auto& layers = j.at("layers");
  if (mlp.dims.size() < 2 || layers.size() + 1 != mlp.dims.size()) {
    throw FormatError("checkpoint: layer count does not match dims");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tensor w = tensor_from_json(layers[i].at("weight"));
    Tensor b = tensor_from_json(layers[i].at("bias"));
    if (w.shape() != Shape{mlp.dims[i], mlp.dims[i + 1]} || b.shape() != Shape{mlp.dims[i + 1]}) {
      throw FormatError("checkpoint: layer " + std::to_string(i) + " shape does not match dims");
    }
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    std::array<int, 4> q{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && last && k >= 2) {
        ++pad;
        q[k] = 0;
        continue;
      }
      if (pad > 0) throw FormatError("base64: data after padding");
      q[k] = decode_char(c);
      if (q[k] < 0) throw FormatError("base64: invalid character");
    }
    const std::uint32_t v = (q[0] << 18) | (q[1] << 12) | (q[2] << 6) | q[3];
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  return out;
}

nlohmann::json tensor_to_json(const Tensor& t) {
  std::vector<unsigned char> bytes(t.size() * 8);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(t[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
  }
  return {{"shape", t.shape()}, {"data_b64", base64_encode(bytes)}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  Shape shape;
  std::string payload;
  try {
    shape = j.at("shape").get<Shape>();
    payload = j.at("data_b64").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tensor: ") + e.what());
  }
  const std::vector<unsigned char> bytes = base64_decode(payload);
  if (bytes.size() != shape_size(shape) * 8) {
    throw FormatError("tensor: payload of " + std::to_string(bytes.size()) + " bytes does not match shape " +
                      shape_str(shape));
  }
  std::vector<double> data(shape_size(shape));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(shape), std::move(data));
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json encoder;
  if (const auto* a = std::get_if<AmortizedGateEncoder>(&ckpt.model.encoder)) {
    encoder = {{"kind", "amortized"}, {"gate_net", mlp_to_json(a->gate_net)}};
  } else {
    encoder = {{"kind", "fixed"}, {"logits", tensor_to_json(std::get<FixedGateEncoder>(ckpt.model.encoder).logits)}};
  }
  nlohmann::json meta = {{"mask_kind", ckpt.meta.mask_kind}, {"trained_on", ckpt.meta.trained_on}};
  meta["feature_names"] = ckpt.meta.feature_names ? nlohmann::json(*ckpt.meta.feature_names) : nlohmann::json();
  return {
      {"format_version", ckpt.format_version},
      {"d", ckpt.d},
      {"seed", ckpt.seed},
      {"train_config", to_json(ckpt.train_config)},
      {"encoder", encoder},
      {"velocity", {{"d", ckpt.model.velocity.d}, {"net", mlp_to_json(ckpt.model.velocity.net)}}},
      {"meta", meta},
  };
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    Checkpoint ckpt;
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version > kCheckpointFormatVersion || ckpt.format_version < 1) {
      throw FormatError("checkpoint: format_version " + std::to_string(ckpt.format_version) +
                        " is not supported (this build reads up to " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    ckpt.d = j.at("d").get<std::size_t>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.train_config = train_config_from_json(j.at("train_config"));

    const auto& enc = j.at("encoder");
    const std::string kind = enc.at("kind").get<std::string>();
    if (kind == "amortized") {
      ckpt.model.encoder = AmortizedGateEncoder{mlp_from_json(enc.at("gate_net"))};
    } else if (kind == "fixed") {
      ckpt.model.encoder = FixedGateEncoder{tensor_from_json(enc.at("logits"))};
    } else {
      throw FormatError("checkpoint: unknown encoder kind '" + kind + "'");
    }
    ckpt.model.velocity.d = j.at("velocity").at("d").get<std::size_t>();
    ckpt.model.velocity.net = mlp_from_json(j.at("velocity").at("net"));

    if (j.contains("meta")) {
      const auto& meta = j.at("meta");
      ckpt.meta.mask_kind = meta.value("mask_kind", "");
      ckpt.meta.trained_on = meta.value("trained_on", "");
      if (meta.contains("feature_names") && !meta.at("feature_names").is_null()) {
        ckpt.meta.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
      }
    }

    const std::size_t d = ckpt.d;
    if (encoder_dim(ckpt.model.encoder) != d || ckpt.model.velocity.d != d ||
        ckpt.model.velocity.net.dims.front() != 4 * d + 1 || ckpt.model.velocity.net.dims.back() != d) {
      throw FormatError("checkpoint: network dimensions are inconsistent with d=" + std::to_string(d));
    }
    if (const auto* a = std::get_if<AmortizedGateEncoder>(&ckpt.model.encoder)) {
      if (a->gate_net.dims.back() != d || a->gate_net.output != OutputActivation::Sigmoid) {
        throw FormatError("checkpoint: gate network must map d -> d with sigmoid output");
      }
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + tmp.string());
    out << checkpoint_to_json(ckpt).dump(1) << '\n';
    if (!out) throw FormatError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("checkpoint: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
  return checkpoint_from_json(j);
}

}  // namespace zf
