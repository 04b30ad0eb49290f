#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "echoclutter/sequence.hpp"

namespace echoclutter {

/// STSQ container layout (all integers little-endian):
///
///   offset  size  field
///        0     4  magic "STSQ"
///        4     1  version (1)
///        5    12  height, width, frames (uint32 each)
///       17     4  dtype code (uint32, 1 = float32)
///       21   4*N  IEEE-754 float32 values, frame-major then row-major
inline constexpr std::size_t kStsqHeaderSize = 21;
inline constexpr std::uint8_t kStsqVersion = 1;
inline constexpr std::uint32_t kStsqDtypeFloat32 = 1;

std::vector<std::uint8_t> encode_sequence_bytes(const Sequence& seq);
Sequence decode_sequence_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

/// Writes `seq` to `path`. Throws IoError (with the path) on failure.
void encode_sequence(const Sequence& seq, const std::filesystem::path& path);

/// Throws IoError, FormatError, LengthError or RangeError.
Sequence decode_sequence(const std::filesystem::path& path);

/// Reads and validates only the header.
Dims peek_sequence_dims(const std::filesystem::path& path);

namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
}  // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace echoclutter
