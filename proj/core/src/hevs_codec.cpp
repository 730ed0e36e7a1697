// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>

#include "evd/error.hpp"
#include "evd/mosaic.hpp"

namespace evd {

namespace {

constexpr std::uint8_t kMagic[4] = {'H', 'E', 'V', 'S'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw CodecError(std::string("truncated .hevs file: ") + what + " needs " + std::to_string(n) +
                           " bytes, " + std::to_string(bytes_.size() - pos_) + " available",
                       pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t hevs_header_size(std::size_t pattern_id_length) noexcept {
  // magic + version + id length + id + reserved + width + height + white level
  return 4 + 1 + 1 + pattern_id_length + 2 + 4 + 4 + 2;
}

std::vector<std::uint8_t> encode_hevs(const RawImage& raw) {
  if (raw.pattern_id.size() > 255) throw ParameterError("pattern id longer than 255 bytes");
  if (raw.samples.size() != raw.width * raw.height) {
    throw ShapeError("raw image holds " + std::to_string(raw.samples.size()) + " samples for " +
                     std::to_string(raw.width) + "x" + std::to_string(raw.height));
  }
  std::vector<std::uint8_t> out;
  out.reserve(hevs_header_size(raw.pattern_id.size()) + 2 * raw.samples.size());
  for (std::uint8_t m : kMagic) out.push_back(m);
  out.push_back(kHevsVersion);
  out.push_back(static_cast<std::uint8_t>(raw.pattern_id.size()));
  for (char c : raw.pattern_id) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(0);
  out.push_back(0);
  put_u32(out, static_cast<std::uint32_t>(raw.width));
  put_u32(out, static_cast<std::uint32_t>(raw.height));
  put_u16(out, raw.white_level);
  for (auto s : raw.samples) put_u16(out, s);
  return out;
}

RawImage decode_hevs(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (std::uint8_t m : kMagic) {
    const auto at = r.pos();
    if (r.u8("magic") != m) throw CodecError("bad .hevs magic", at);
  }
  {
    const auto at = r.pos();
    const auto version = r.u8("version");
    if (version != kHevsVersion) {
      throw CodecError("unsupported .hevs version " + std::to_string(version), at);
    }
  }
  RawImage raw;
  const std::size_t id_len = r.u8("pattern id length");
  r.need(id_len, "pattern id");
  for (std::size_t i = 0; i < id_len; ++i) raw.pattern_id.push_back(static_cast<char>(r.u8("pattern id")));
  for (int i = 0; i < 2; ++i) {
    const auto at = r.pos();
    if (r.u8("reserved") != 0) throw CodecError("nonzero reserved byte", at);
  }
  raw.width = r.u32("width");
  raw.height = r.u32("height");
  raw.white_level = r.u16("white level");
  const std::size_t expected = 2 * raw.width * raw.height;
  if (r.remaining() != expected) {
    throw CodecError("payload length mismatch: expected " + std::to_string(expected) +
                         " bytes, actual " + std::to_string(r.remaining()),
                     r.pos());
  }
  raw.samples.resize(raw.width * raw.height);
  for (auto& s : raw.samples) s = r.u16("sample");
  return raw;
}

void write_hevs(const RawImage& raw, const std::filesystem::path& path) {
  const auto bytes = encode_hevs(raw);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

RawImage read_hevs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_hevs(bytes);
}

}  // namespace evd
