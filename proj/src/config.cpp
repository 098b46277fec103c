#include "zeroflow/config.hpp"

#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "zeroflow/errors.hpp"

namespace zf {

std::string to_string(ZfMode mode) { return mode == ZfMode::Midpoint ? "midpoint" : "kernel"; }

ZfMode parse_zf_mode(std::string_view text) {
  if (text == "midpoint") return ZfMode::Midpoint;
  if (text == "kernel") return ZfMode::Kernel;
  throw ParameterError("zf_mode must be 'midpoint' or 'kernel', got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ParameterError(std::string("train config: ") + name + " must be positive");
  };
  positive(lr, "lr");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(iterations), "iterations");
  positive(lambda_sparsity, "lambda_sparsity");
  positive(omega_bandwidth, "omega_bandwidth");
  positive(beta_alpha, "beta_alpha");
  positive(zf_weight, "zf_weight");
  positive(static_cast<double>(encoder_hidden), "encoder_hidden");
  positive(static_cast<double>(velocity_hidden), "velocity_hidden");
  if (!(weight_decay >= 0.0)) throw ParameterError("train config: weight_decay must be >= 0");
}

namespace {

double as_double(const toml::node& node, std::string_view key) {
  if (auto v = node.value<double>()) return *v;
  throw FormatError("config: '" + std::string(key) + "' must be a number");
}

std::int64_t as_int(const toml::node& node, std::string_view key) {
  if (node.is_integer()) return *node.value<std::int64_t>();
  throw FormatError("config: '" + std::string(key) + "' must be an integer");
}

std::size_t as_count(const toml::node& node, std::string_view key) {
  const std::int64_t v = as_int(node, key);
  if (v < 0) throw FormatError("config: '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

TrainConfig parse_train_config_toml(std::string_view text, TrainConfig base) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << e.description() << " at line " << e.source().begin.line;
    throw FormatError(os.str());
  }
  for (const auto& [k, node] : table) {
    const std::string_view key = k.str();
    if (key == "lr") base.lr = as_double(node, key);
    else if (key == "batch_size") base.batch_size = as_count(node, key);
    else if (key == "iterations") base.iterations = as_count(node, key);
    else if (key == "lambda_sparsity") base.lambda_sparsity = as_double(node, key);
    else if (key == "omega_bandwidth") base.omega_bandwidth = as_double(node, key);
    else if (key == "beta_alpha") base.beta_alpha = as_double(node, key);
    else if (key == "zf_weight") base.zf_weight = as_double(node, key);
    else if (key == "zf_mode") {
      auto s = node.value<std::string>();
      if (!s) throw FormatError("config: 'zf_mode' must be a string");
      base.zf_mode = parse_zf_mode(*s);
    } else if (key == "weight_decay") base.weight_decay = as_double(node, key);
    else if (key == "seed") base.seed = static_cast<std::uint64_t>(as_int(node, key));
    else if (key == "encoder_hidden") base.encoder_hidden = as_count(node, key);
    else if (key == "velocity_hidden") base.velocity_hidden = as_count(node, key);
    else throw FormatError("config: unknown key '" + std::string(key) + "'");
  }
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_train_config_toml(os.str(), base);
}

std::string to_toml(const TrainConfig& cfg) {
  toml::table t;
  t.insert("lr", cfg.lr);
  t.insert("batch_size", static_cast<std::int64_t>(cfg.batch_size));
  t.insert("iterations", static_cast<std::int64_t>(cfg.iterations));
  t.insert("lambda_sparsity", cfg.lambda_sparsity);
  t.insert("omega_bandwidth", cfg.omega_bandwidth);
  t.insert("beta_alpha", cfg.beta_alpha);
  t.insert("zf_weight", cfg.zf_weight);
  t.insert("zf_mode", to_string(cfg.zf_mode));
  t.insert("weight_decay", cfg.weight_decay);
  t.insert("seed", static_cast<std::int64_t>(cfg.seed));
  t.insert("encoder_hidden", static_cast<std::int64_t>(cfg.encoder_hidden));
  t.insert("velocity_hidden", static_cast<std::int64_t>(cfg.velocity_hidden));
  std::ostringstream os;
  os << t << '\n';
  return os.str();
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"iterations", cfg.iterations},
      {"lambda_sparsity", cfg.lambda_sparsity},
      {"omega_bandwidth", cfg.omega_bandwidth},
      {"beta_alpha", cfg.beta_alpha},
      {"zf_weight", cfg.zf_weight},
      {"zf_mode", to_string(cfg.zf_mode)},
      {"weight_decay", cfg.weight_decay},
      {"seed", cfg.seed},
      {"encoder_hidden", cfg.encoder_hidden},
      {"velocity_hidden", cfg.velocity_hidden},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig cfg;
    cfg.lr = j.at("lr").get<double>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.iterations = j.at("iterations").get<std::size_t>();
    cfg.lambda_sparsity = j.at("lambda_sparsity").get<double>();
    cfg.omega_bandwidth = j.at("omega_bandwidth").get<double>();
    cfg.beta_alpha = j.at("beta_alpha").get<double>();
    cfg.zf_weight = j.at("zf_weight").get<double>();
    cfg.zf_mode = parse_zf_mode(j.at("zf_mode").get<std::string>());
    cfg.weight_decay = j.at("weight_decay").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
    cfg.velocity_hidden = j.at("velocity_hidden").get<std::size_t>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train_config: ") + e.what());
  }
}

}  // namespace zf
