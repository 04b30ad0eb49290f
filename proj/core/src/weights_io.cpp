#include "echoclutter/weights_io.hpp"

#include <cstring>

#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"

namespace echoclutter {

std::vector<std::uint8_t> encode_weights(const ParamStore& store) {
  std::vector<std::uint8_t> out{'W', 'G', 'T', '1'};
  le::put_u32(out, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& e : store.entries()) {
    le::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const Tensor& t = e.var->value;
    le::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) le::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) le::put_f32(out, v);
  }
  return out;
}

namespace {

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, const std::string& origin) : b_(b), origin_(origin) {}
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > b_.size()) {
      throw LengthError(origin_ + ": weights truncated at byte " + std::to_string(pos_));
    }
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() { return le::get_u32(take(4)); }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void decode_weights_into(ParamStore& store, const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (std::memcmp(r.take(4), "WGT1", 4) != 0) {
    throw FormatError(origin + ": bad weights magic");
  }
  const std::uint32_t count = r.u32();
  if (count != store.entries().size()) {
    throw FormatError(origin + ": " + std::to_string(count) + " entries, model expects " +
                      std::to_string(store.entries().size()));
  }
  std::vector<Tensor> values;
  values.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = r.u32();
    const auto* p = r.take(len);
    const std::string name(reinterpret_cast<const char*>(p), len);
    const auto& expected = store.entries()[k];
    if (name != expected.name) {
      throw FormatError(origin + ": entry " + std::to_string(k) + " is '" + name + "', expected '" + expected.name +
                        "'");
    }
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != expected.var->shape()) {
      throw DimensionError(origin + ": '" + name + "' has shape " + shape_string(shape) + ", expected " +
                           shape_string(expected.var->shape()));
    }
    Tensor t(shape);
    for (float& v : t.values()) v = le::get_f32(r.take(4));
    values.push_back(std::move(t));
  }
  if (!r.done()) {
    throw LengthError(origin + ": trailing bytes after weights");
  }
  store.restore(values);
}

void save_weights(const ParamStore& store, const std::filesystem::path& path) {
  write_file_bytes(path, encode_weights(store));
}

void load_weights(ParamStore& store, const std::filesystem::path& path) {
  decode_weights_into(store, read_file_bytes(path), path.string());
}

}  // namespace echoclutter
