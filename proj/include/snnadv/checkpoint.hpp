#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "snnadv/model.hpp"

namespace snnadv {

/// SNNM layout, all integers and floats little-endian:
///   "SNNM" | u32 version | u32 kind | u32 len + architecture JSON |
///   u32 tensor count | per tensor: u32 len + name, u32 rank, u32 dims..., f32 data... |
///   u32 len + config JSON | u64 seed
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Model> model;
  nlohmann::json config;  // echo of the settings the model was produced with
  std::uint64_t seed = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const nlohmann::json& config,
                                            std::uint64_t seed);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Model& model, const nlohmann::json& config,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace snnadv
