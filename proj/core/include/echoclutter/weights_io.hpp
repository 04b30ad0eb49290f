#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "echoclutter/param_store.hpp"

namespace echoclutter {

/// "WGT1", u32 entry count, then per entry: u32 name length, UTF-8 name,
/// u32 rank, u32 extents, float32 values. Little-endian throughout.
std::vector<std::uint8_t> encode_weights(const ParamStore& store);

/// Loads into an existing store. Names, order and shapes must match exactly
/// (FormatError/DimensionError otherwise); the store is untouched on error.
void decode_weights_into(ParamStore& store, const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_weights(const ParamStore& store, const std::filesystem::path& path);
void load_weights(ParamStore& store, const std::filesystem::path& path);

}  // namespace echoclutter
