#pragma once

#include "iottrust/rng.hpp"
#include "iottrust/trace.hpp"

#include <optional>

#include <cstdint>
#include <string>
#include <vector>

namespace iottrust::payloadgen {

/// Bounded random walk for sensor-like readings.
struct QuantGenParams
{
  double        range_low{0.0};
  double        range_high{1.0};
  double        hop{0.0};
  std::size_t   n{1};
  std::uint64_t rng_seed{0};
};

/// Piecewise-constant label stream with random stability periods.
struct CatGenParams
{
  std::vector<std::string> categories;
  std::size_t              n{0};
  std::size_t              stability_min{1};
  std::size_t              stability_max{1};
  std::uint64_t            rng_seed{0};
};

struct CategoricalRun
{
  std::string label;
  std::size_t length{0};
};

/// Streaming form of the quantitative generator; gen_quantitative() is its first n draws.
class QuantitativeWalk
{
public:
  explicit QuantitativeWalk(const QuantGenParams& params);

  double next();

private:
  QuantGenParams        params_;
  Rng                   rng_;
  std::optional<double> prev_;
};

/// Streaming form of the categorical generator without an end point.
class CategoricalStream
{
public:
  CategoricalStream(std::vector<std::string> categories, std::size_t stability_min, std::size_t stability_max,
                    std::uint64_t seed);

  const std::string& next();

private:
  std::vector<std::string> categories_;
  std::size_t              stability_min_;
  std::size_t              stability_max_;
  Rng                      rng_;
  std::size_t              left_{0};
  std::size_t              current_{0};
};

std::vector<double> gen_quantitative(const QuantGenParams& params);

/// Runs as drawn by the generator. Adjacent runs may share a label.
std::vector<CategoricalRun> gen_categorical_runs(const CatGenParams& params);

std::vector<std::string> gen_categorical(const CatGenParams& params);

/// Assigns values in order to packets carrying the PSH flag.
std::vector<trace::Packet> attach_payloads(std::vector<trace::Packet> packets,
                                           const std::vector<trace::PayloadValue>& values);

}  // namespace iottrust::payloadgen
