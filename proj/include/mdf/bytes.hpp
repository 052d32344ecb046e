#pragma once

// Big-endian byte writer/reader used by every binary format in the project.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdf/error.hpp"

namespace mdf {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }
  void i64(std::int64_t v) { put_be(static_cast<std::uint64_t>(v), 8); }
  void raw(ByteSpan b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  // u8 length prefix; throws when longer than 255 bytes.
  void str8(std::string_view s) {
    if (s.size() > 0xFF) throw Error("string too long for u8 length prefix");
    u8(static_cast<std::uint8_t>(s.size()));
    raw(s);
  }
  // u16 length prefix.
  void blob16(ByteSpan b) {
    if (b.size() > 0xFFFF) throw Error("blob too long for u16 length prefix");
    u16(static_cast<std::uint16_t>(b.size()));
    raw(b);
  }

  std::size_t size() const noexcept { return out_.size(); }
  // Overwrites a big-endian u16/u32 at `pos` (length back-patching).
  void patch_u16(std::size_t pos, std::uint16_t v) {
    out_[pos] = static_cast<std::uint8_t>(v >> 8);
    out_[pos + 1] = static_cast<std::uint8_t>(v);
  }
  void patch_u32(std::size_t pos, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_[pos + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
  }

 private:
  void put_be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes& out_;
};

// Bounds-checked reader; every short read throws MalformedFrame with the
// offset of the failed read.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan in, std::size_t base_offset = 0) : in_(in), base_(base_offset) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_be(8)); }
  ByteSpan take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str8() {
    auto n = u8();
    auto s = take(n);
    return std::string(s.begin(), s.end());
  }
  ByteSpan blob16() { return take(u16()); }

  bool done() const noexcept { return pos_ == in_.size(); }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  std::size_t offset() const noexcept { return base_ + pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw MalformedFrame("truncated", base_ + pos_);
  }
  std::uint64_t get_be(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  ByteSpan in_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

inline ByteSpan as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace mdf
