#pragma once

#include <filesystem>

#include "json.hpp"
#include "tendon/model.hpp"

namespace tendon {

// Single-file model format: 8-byte magic, uint32 little-endian header
// length, JSON header (format_version, config, seeds, training summary,
// parameter order with byte lengths, payload hash), then the parameters as
// raw little-endian 64-bit floats in header order. The hash is FNV-1a64 over
// the payload bytes, checked on load before any tensor is filled.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& seeds = nlohmann::json::object(),
                     const nlohmann::json& training =
                         nlohmann::json::object());

// meta, when given, receives the full header.
Model load_checkpoint(const std::filesystem::path& path,
                      nlohmann::json* meta = nullptr);

}  // namespace tendon
