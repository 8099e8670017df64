#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "lee/model/model.hpp"

namespace lee::model {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  ModelConfig config;
  std::uint64_t init_seed = 0;
  std::string provenance;  // resolved run config, `key = value` lines
};

/// Layout: magic `LEE1`, int32 version, length-prefixed config text,
/// length-prefixed provenance text, uint64 init seed, uint32 parameter
/// count, then per parameter: length-prefixed name, int32 rows, int32 cols,
/// rows*cols little-endian float32 values.
void save_checkpoint(const Model& model, const std::filesystem::path& path, std::uint64_t init_seed,
                     const std::string& provenance = {});

/// Rebuilds the model from the stored config and loads every block,
/// rejecting missing, extra or mis-shaped parameters.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

/// Reads only the header.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

std::string config_text(const ModelConfig& cfg);
ModelConfig parse_config_text(const std::string& text);

}  // namespace lee::model
