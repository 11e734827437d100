#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "ctcig/nn/model.hpp"

namespace ctcig::train {

inline constexpr char kCheckpointMagic[4] = {'C', 'T', 'C', 'G'};
inline constexpr uint32_t kCheckpointVersion = 1;

/// Layout: "CTCG", u32 version, u64 header byte count, JSON header
/// {"config", "meta", "tensors": [{"name","shape","tag"}]}, then every
/// tensor as little-endian float32 in header order. All integers are
/// little-endian.
void save_checkpoint(const std::filesystem::path& path, nn::CtcigModel& model, const nlohmann::json& meta = {});

struct LoadedCheckpoint {
  nn::CtcigModel model{nullptr};
  nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Header only (no tensor data validation).
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace ctcig::train
