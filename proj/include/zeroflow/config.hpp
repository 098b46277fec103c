#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace zf {

enum class ZfMode {
  Midpoint,  // velocity evaluated at t = 0.5 on the matched midpoint
  Kernel,    // omega(t)-weighted velocity at the batch's sampled t
};

std::string to_string(ZfMode mode);
ZfMode parse_zf_mode(std::string_view text);

/// Hyperparameters of one training run.
struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 400;
  std::size_t iterations = 5000;
  double lambda_sparsity = 3e-9;
  double omega_bandwidth = 5e-4;
  double beta_alpha = 4.0;
  double zf_weight = 1.0;
  ZfMode zf_mode = ZfMode::Midpoint;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::size_t encoder_hidden = 128;
  std::size_t velocity_hidden = 256;

  /// Throws ParameterError naming the first offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Overlays the keys present in a TOML document onto `base`. Unknown keys
/// and wrongly typed values are FormatErrors.
TrainConfig parse_train_config_toml(std::string_view text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string to_toml(const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace zf
