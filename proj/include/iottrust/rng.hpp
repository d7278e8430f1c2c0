#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace iottrust {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so uniform draws are derived from the raw engine
/// output here. Child streams come from split(), which mixes a label into the
/// seed so independent components never share a sequence.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : seed_(seed)
    , engine_(mix(seed))
  {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo when the interval is a point.
  double uniform(double lo, double hi)
  {
    double v = lo + (hi - lo) * uniform01();
    return v > hi ? hi : v;
  }

  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi)
  {
    std::uint64_t span = hi - lo;
    if (span == UINT64_MAX)
    {
      return engine_();
    }
    std::uint64_t range = span + 1;
    std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
    std::uint64_t v;
    do
    {
      v = engine_();
    } while (v >= limit);
    return lo + v % range;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  Rng split(std::string_view label) const
  {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : label)
    {
      h = (h ^ c) * 1099511628211ULL;
    }
    return Rng(mix(seed_ ^ h));
  }

  Rng split(std::uint64_t index) const { return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (index + 1))); }

private:
  static std::uint64_t mix(std::uint64_t z)
  {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t   seed_;
  std::mt19937_64 engine_;
};

}  // namespace iottrust
