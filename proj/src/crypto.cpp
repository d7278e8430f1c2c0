#include "iottrust/crypto.hpp"

#include "iottrust/common.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <memory>

namespace iottrust {

Digest sha256(std::span<const std::uint8_t> data)
{
  Digest out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Digest sha256(std::string_view data)
{
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

Digest sha256_concat(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  Digest out{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), a.data(), a.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), b.data(), b.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1)
  {
    throw Error("sha256 failed");
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> data)
{
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data)
  {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {

int nibble(char c)
{
  if (c >= '0' && c <= '9')
  {
    return c - '0';
  }
  if (c >= 'a' && c <= 'f')
  {
    return c - 'a' + 10;
  }
  return -1;
}

}  // namespace

Bytes from_hex(std::string_view hex)
{
  if (hex.size() % 2 != 0)
  {
    throw DecodeError("hex string has odd length");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
  {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0)
    {
      throw DecodeError("invalid hex digit");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex)
{
  if (hex.size() != 64)
  {
    throw DecodeError("digest must be 64 hex characters");
  }
  auto bytes = from_hex(hex);
  Digest d{};
  std::copy(bytes.begin(), bytes.end(), d.begin());
  return d;
}

}  // namespace iottrust
