#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iottrust {

using Bytes = std::vector<std::uint8_t>;

/// SHA-256 digest. Used as the chain hash for nonces, block links and blob addresses.
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

/// chf(a || b)
Digest sha256_concat(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

std::string to_hex(std::span<const std::uint8_t> data);

/// Strict lowercase hex decoding; throws DecodeError on anything else.
Bytes from_hex(std::string_view hex);
Digest digest_from_hex(std::string_view hex);

}  // namespace iottrust
