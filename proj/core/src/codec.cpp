#include "echoclutter/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "echoclutter/error.hpp"

namespace echoclutter {

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFU));
  }
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string() + " for reading");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failure on " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw IoError("write failure on " + path.string());
  }
}

std::vector<std::uint8_t> encode_sequence_bytes(const Sequence& seq) {
  const Dims& d = seq.dims();
  if (d.empty()) {
    throw DimensionError("refusing to encode an empty sequence (" + to_string(d) + ")");
  }
  std::vector<std::uint8_t> out{'S', 'T', 'S', 'Q'};
  out.reserve(kStsqHeaderSize + 4 * seq.size());
  out.push_back(kStsqVersion);
  le::put_u32(out, d.height);
  le::put_u32(out, d.width);
  le::put_u32(out, d.frames);
  le::put_u32(out, kStsqDtypeFloat32);
  for (float v : seq.values()) {
    le::put_f32(out, v);
  }
  return out;
}

namespace {

Dims parse_header(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < kStsqHeaderSize) {
    throw LengthError(origin + ": header truncated: expected at least " + std::to_string(kStsqHeaderSize) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "STSQ", 4) != 0) {
    throw FormatError(origin + ": bad magic, expected \"STSQ\"");
  }
  if (bytes[4] != kStsqVersion) {
    throw FormatError(origin + ": unsupported version " + std::to_string(bytes[4]));
  }
  Dims d{le::get_u32(&bytes[5]), le::get_u32(&bytes[9]), le::get_u32(&bytes[13])};
  const std::uint32_t dtype = le::get_u32(&bytes[17]);
  if (dtype != kStsqDtypeFloat32) {
    throw FormatError(origin + ": unsupported dtype code " + std::to_string(dtype));
  }
  if (d.empty()) {
    throw FormatError(origin + ": empty dims " + to_string(d));
  }
  return d;
}

}  // namespace

Sequence decode_sequence_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const Dims d = parse_header(bytes, origin);
  const std::size_t expected = kStsqHeaderSize + 4 * d.size();
  if (bytes.size() != expected) {
    throw LengthError(origin + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<float> data(d.size());
  const std::uint8_t* p = bytes.data() + kStsqHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    const float v = le::get_f32(p);
    if (!std::isfinite(v) || v < 0.0F || v > 1.0F) {
      throw RangeError(origin + ": value " + std::to_string(v) + " at index " + std::to_string(i) +
                       " outside [0,1]");
    }
    data[i] = v;
  }
  return Sequence(d, std::move(data));
}

void encode_sequence(const Sequence& seq, const std::filesystem::path& path) {
  write_file_bytes(path, encode_sequence_bytes(seq));
}

Sequence decode_sequence(const std::filesystem::path& path) {
  return decode_sequence_bytes(read_file_bytes(path), path.string());
}

Dims peek_sequence_dims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string() + " for reading");
  }
  std::vector<std::uint8_t> header(kStsqHeaderSize);
  in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  header.resize(static_cast<std::size_t>(in.gcount()));
  return parse_header(header, path.string());
}

}  // namespace echoclutter
