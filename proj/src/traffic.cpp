#include "iottrust/traffic.hpp"

#include <algorithm>

namespace iottrust::sim {

BehaviorTemplate make_template(Rng& rng, std::size_t period, TemplateStyle style, PayloadKind payload)
{
  if (period < 2)
  {
    throw ContractError("template period must be at least 2");
  }
  BehaviorTemplate t;
  t.payload = payload;
  static constexpr std::uint8_t kBenignFlags[] = {0x02, 0x10, 0x18, 0x11, 0x18, 0x10};
  static constexpr double kIats[] = {0.2, 0.5, 1.0, 1.5};
  std::vector<std::uint32_t> used_lengths;
  for (std::size_t i = 0; i < period; ++i)
  {
    PacketPrototype p;
    switch (style)
    {
      case TemplateStyle::benign:
        p.src_port = static_cast<std::uint16_t>(1024 + rng.uniform_int(0, 8000));
        p.tcp_flags = kBenignFlags[i % std::size(kBenignFlags)];
        p.protocol = i % 5 == 4 ? 17 : 6;
        p.iat = kIats[rng.uniform_int(0, std::size(kIats) - 1)];
        break;
      case TemplateStyle::malign:
        p.src_port = static_cast<std::uint16_t>(49152 + rng.uniform_int(0, 16000));
        p.tcp_flags = static_cast<std::uint8_t>(i % 2 == 0 ? 0x02 : 0x14);
        p.protocol = 6;
        p.iat = kIats[rng.uniform_int(0, std::size(kIats) - 1)];
        break;
      case TemplateStyle::flood:
        p.src_port = static_cast<std::uint16_t>(49152 + rng.uniform_int(0, 16000));
        p.tcp_flags = 0x02;
        p.protocol = i % 2 == 0 ? 6 : 17;
        p.iat = 0.05;
        break;
    }
    // Distinct lengths per step so every step maps to its own symbol.
    std::uint32_t length = 0;
    do
    {
      length = style == TemplateStyle::benign  ? static_cast<std::uint32_t>(60 + rng.uniform_int(0, 1400))
               : style == TemplateStyle::malign ? static_cast<std::uint32_t>(1460 + rng.uniform_int(0, 40))
                                                : static_cast<std::uint32_t>(40 + rng.uniform_int(0, 12));
    } while (std::find(used_lengths.begin(), used_lengths.end(), length) != used_lengths.end());
    used_lengths.push_back(length);
    p.length = length;
    t.cycle.push_back(p);
  }
  return t;
}

TrafficGenerator::TrafficGenerator(DeviceId src, DeviceId dst, BehaviorTemplate behavior, TrafficParams params,
                                   Rng rng, double start_time)
  : src_(std::move(src))
  , dst_(std::move(dst))
  , behavior_(std::move(behavior))
  , params_(std::move(params))
  , rng_(std::move(rng))
  , next_time_(start_time)
{
  if (behavior_.cycle.empty())
  {
    throw ContractError("behavior template is empty");
  }
  if (params_.burst_packets < 1)
  {
    throw ContractError("burst must contain at least one packet");
  }
  auto quant = params_.quant;
  quant.rng_seed = rng_.split("quant").next_u64();
  quant_ = std::make_unique<payloadgen::QuantitativeWalk>(quant);
  cat_ = std::make_unique<payloadgen::CategoricalStream>(params_.categories, params_.stability_min,
                                                         params_.stability_max, rng_.split("cat").next_u64());
  pending_ = rng_.bernoulli(params_.noise) ? rng_.uniform_int(1, behavior_.cycle.size() - 1) : 0;
}

double TrafficGenerator::gap_before(const PacketPrototype& proto) const
{
  return proto.iat / std::max(params_.rate_multiplier, 1e-9);
}

trace::Packet TrafficGenerator::next()
{
  const auto& cycle = behavior_.cycle;
  // pending_ is the offset of the emitted prototype from the cycle position (0 = on pattern).
  const auto& proto = cycle[(position_ + pending_) % cycle.size()];

  trace::Packet p;
  p.timestamp = next_time_;
  p.src = src_;
  p.dst = dst_;
  p.src_port = proto.src_port;
  p.tcp_flags = proto.tcp_flags;
  p.protocol = proto.protocol;
  p.length = proto.length;
  if ((p.tcp_flags & trace::kTcpPsh) != 0)
  {
    if (behavior_.payload == PayloadKind::numeric)
    {
      p.payload = trace::PayloadValue::numeric(quant_->next());
    }
    else if (behavior_.payload == PayloadKind::categorical)
    {
      p.payload = trace::PayloadValue::categorical(cat_->next());
    }
  }

  position_ = (position_ + 1) % cycle.size();
  ++in_burst_;
  pending_ = rng_.bernoulli(params_.noise) ? rng_.uniform_int(1, cycle.size() - 1) : 0;
  const auto& upcoming = cycle[(position_ + pending_) % cycle.size()];
  if (in_burst_ >= params_.burst_packets)
  {
    in_burst_ = 0;
    next_time_ += params_.burst_gap;
  }
  else
  {
    next_time_ += gap_before(upcoming);
  }
  return p;
}

void TrafficGenerator::swap_behavior(BehaviorTemplate behavior, std::optional<double> rate_multiplier)
{
  if (behavior.cycle.empty())
  {
    throw ContractError("behavior template is empty");
  }
  double old_gap = in_burst_ == 0 ? 0.0 : gap_before(behavior_.cycle[(position_ + pending_) % behavior_.cycle.size()]);
  behavior_ = std::move(behavior);
  if (rate_multiplier)
  {
    params_.rate_multiplier = *rate_multiplier;
  }
  position_ %= behavior_.cycle.size();
  pending_ = 0;
  if (in_burst_ != 0)
  {
    next_time_ += gap_before(behavior_.cycle[position_]) - old_gap;
  }
}

std::vector<trace::Packet> generate(TrafficGenerator& gen, std::size_t n)
{
  std::vector<trace::Packet> out;
  out.reserve(n);
  while (out.size() < n)
  {
    out.push_back(gen.next());
  }
  return out;
}

}  // namespace iottrust::sim
