#include "iottrust/payloadgen.hpp"

#include "iottrust/rng.hpp"

#include <algorithm>
#include <cmath>

namespace iottrust::payloadgen {

QuantitativeWalk::QuantitativeWalk(const QuantGenParams& params)
  : params_(params)
  , rng_(params.rng_seed)
{
  if (!(params.range_low <= params.range_high))
  {
    throw ContractError("range_low must not exceed range_high");
  }
  if (!(params.hop >= 0.0))
  {
    throw ContractError("hop must be non-negative");
  }
}

double QuantitativeWalk::next()
{
  if (!prev_)
  {
    prev_ = rng_.uniform(params_.range_low, params_.range_high);
    return *prev_;
  }
  double prev = *prev_;
  double lo = std::max(params_.range_low, prev - params_.hop);
  double hi = std::min(params_.range_high, prev + params_.hop);
  double v = std::clamp(rng_.uniform(lo, hi), params_.range_low, params_.range_high);
  // prev +- hop is rounded; walk back toward prev until the step is within hop exactly.
  while (std::abs(v - prev) > params_.hop)
  {
    v = std::nextafter(v, prev);
  }
  prev_ = v;
  return v;
}

std::vector<double> gen_quantitative(const QuantGenParams& params)
{
  if (params.n < 1)
  {
    throw ContractError("n must be at least 1");
  }
  QuantitativeWalk walk(params);
  std::vector<double> out;
  out.reserve(params.n);
  while (out.size() < params.n)
  {
    out.push_back(walk.next());
  }
  return out;
}

CategoricalStream::CategoricalStream(std::vector<std::string> categories, std::size_t stability_min,
                                     std::size_t stability_max, std::uint64_t seed)
  : categories_(std::move(categories))
  , stability_min_(stability_min)
  , stability_max_(stability_max)
  , rng_(seed)
{
  if (categories_.empty())
  {
    throw ContractError("at least one category required");
  }
  if (stability_min_ < 1 || stability_min_ > stability_max_)
  {
    throw ContractError("stability period must satisfy 1 <= min <= max");
  }
}

const std::string& CategoricalStream::next()
{
  if (left_ == 0)
  {
    left_ = static_cast<std::size_t>(rng_.uniform_int(stability_min_, stability_max_)) + 1;
    current_ = static_cast<std::size_t>(rng_.uniform_int(0, categories_.size() - 1));
  }
  --left_;
  return categories_[current_];
}

std::vector<CategoricalRun> gen_categorical_runs(const CatGenParams& params)
{
  if (params.categories.empty())
  {
    throw ContractError("at least one category required");
  }
  if (params.n == 0)
  {
    return {};
  }
  if (params.stability_min < 1 || params.stability_min > params.stability_max ||
      params.stability_max > params.n)
  {
    throw ContractError("stability period must satisfy 1 <= min <= max <= n");
  }

  Rng rng(params.rng_seed);
  std::vector<CategoricalRun> runs;
  std::size_t i = 0;
  while (i < params.n)
  {
    auto stab = static_cast<std::size_t>(rng.uniform_int(params.stability_min, params.stability_max));
    const auto& label = params.categories[rng.uniform_int(0, params.categories.size() - 1)];
    // Indices i..i+stab inclusive, truncated at n.
    if (i + stab < params.n)
    {
      runs.push_back({label, stab + 1});
      i += stab + 1;
    }
    else
    {
      runs.push_back({label, params.n - i});
      i = params.n;
    }
  }
  return runs;
}

std::vector<std::string> gen_categorical(const CatGenParams& params)
{
  std::vector<std::string> out;
  out.reserve(params.n);
  for (const auto& run : gen_categorical_runs(params))
  {
    out.insert(out.end(), run.length, run.label);
  }
  return out;
}

std::vector<trace::Packet> attach_payloads(std::vector<trace::Packet> packets,
                                           const std::vector<trace::PayloadValue>& values)
{
  auto psh = static_cast<std::size_t>(std::count_if(packets.begin(), packets.end(), [](const auto& p) {
    return (p.tcp_flags & trace::kTcpPsh) != 0;
  }));
  if (psh > values.size())
  {
    throw ContractError(std::to_string(psh - values.size()) + " payload values missing");
  }
  std::size_t next = 0;
  for (auto& p : packets)
  {
    if ((p.tcp_flags & trace::kTcpPsh) != 0)
    {
      p.payload = values[next++];
    }
  }
  return packets;
}

}  // namespace iottrust::payloadgen
