#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zeroflow/config.hpp"
#include "zeroflow/models.hpp"

namespace zf {

inline constexpr int kCheckpointFormatVersion = 1;

/// Descriptive metadata carried alongside the parameters. Used by the
/// serving layer; absent fields serialize as null.
struct CheckpointMeta {
  std::string mask_kind;
  std::string trained_on;
  std::optional<std::vector<std::string>> feature_names;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  TrainConfig train_config;
  ZeroFlowModel model;
  CheckpointMeta meta;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string base64_encode(std::span<const unsigned char> bytes);
/// Throws FormatError on characters outside the alphabet or bad padding.
std::vector<unsigned char> base64_decode(std::string_view text);

/// {"shape": [...], "data_b64": "..."} with little-endian float64 payload.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Writes through a temporary file and renames, so readers never observe a
/// partial checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zf
