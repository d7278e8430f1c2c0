#pragma once

#include "iottrust/common.hpp"
#include "iottrust/crypto.hpp"

#include <bit>
#include <cstdint>
#include <span>
#include <string>

namespace iottrust {

// Little-endian fixed-width encoding shared by the binary containers.
class ByteWriter
{
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes& out() { return out_; }

private:
  void put(std::uint64_t v, int n)
  {
    for (int i = 0; i < n; ++i)
    {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  Bytes out_;
};

class ByteReader
{
public:
  ByteReader(std::span<const std::uint8_t> in, std::string truncated_message)
    : in_(in)
    , truncated_(std::move(truncated_message))
  {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> bytes(std::size_t n)
  {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  Digest digest()
  {
    Digest d;
    auto b = bytes(d.size());
    std::copy(b.begin(), b.end(), d.begin());
    return d;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

private:
  void need(std::size_t n)
  {
    if (in_.size() - pos_ < n)
    {
      throw DecodeError(truncated_);
    }
  }
  std::uint64_t get(int n)
  {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
    {
      v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t                   pos_{0};
  std::string                   truncated_;
};

}  // namespace iottrust
