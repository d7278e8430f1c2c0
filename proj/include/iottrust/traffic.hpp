#pragma once

#include "iottrust/payloadgen.hpp"
#include "iottrust/rng.hpp"
#include "iottrust/trace.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace iottrust::sim {

enum class PayloadKind
{
  none,
  numeric,
  categorical,
};

/// One step of a device's periodic emission pattern.
struct PacketPrototype
{
  std::uint16_t src_port{0};
  std::uint8_t  tcp_flags{0};
  int           protocol{6};
  std::uint32_t length{0};
  double        iat{1.0};  // gap preceding this packet inside a burst
};

/// Cyclic emission pattern of one directed device pair.
struct BehaviorTemplate
{
  std::vector<PacketPrototype> cycle;
  PayloadKind                  payload{PayloadKind::none};
};

enum class TemplateStyle
{
  benign,
  malign,
  flood,
};

/// Random template of the given period. Benign templates use registered ports,
/// moderate lengths and PSH-carrying data packets; malign templates use dynamic
/// ports and scan-like lengths; flood templates are short high-rate requests.
BehaviorTemplate make_template(Rng& rng, std::size_t period, TemplateStyle style, PayloadKind payload);

struct TrafficParams
{
  double      noise{0.2};            // probability a packet deviates from the cycle
  std::size_t burst_packets{120};    // packets per interaction sequence
  double      burst_gap{60.0};       // idle time between bursts
  double      rate_multiplier{1.0};  // divides every in-burst IAT

  payloadgen::QuantGenParams quant{20.0, 25.0, 0.5, 1, 0};
  std::vector<std::string>   categories{"idle", "heat", "cool", "fan"};
  std::size_t                stability_min{40};
  std::size_t                stability_max{80};
};

/// Emits the packets of one directed pair following a template with noise.
///
/// With probability `noise` a packet is replaced by another prototype of the same
/// template; the cycle position advances either way.
class TrafficGenerator
{
public:
  TrafficGenerator(DeviceId src, DeviceId dst, BehaviorTemplate behavior, TrafficParams params, Rng rng,
                   double start_time = 0.0);

  /// Time of the packet next() would return.
  double peek_time() const { return next_time_; }

  trace::Packet next();

  /// Switches to another template from the next packet on.
  void swap_behavior(BehaviorTemplate behavior, std::optional<double> rate_multiplier = std::nullopt);

  const DeviceId& src() const { return src_; }
  const DeviceId& dst() const { return dst_; }

private:
  double gap_before(const PacketPrototype& proto) const;

  DeviceId                                      src_;
  DeviceId                                      dst_;
  BehaviorTemplate                              behavior_;
  TrafficParams                                 params_;
  Rng                                           rng_;
  std::unique_ptr<payloadgen::QuantitativeWalk> quant_;
  std::unique_ptr<payloadgen::CategoricalStream> cat_;
  std::size_t                                   position_{0};
  std::size_t                                   in_burst_{0};
  double                                        next_time_;
  std::size_t                                   pending_{0};
};

/// n packets of one pair starting at t = 0.
std::vector<trace::Packet> generate(TrafficGenerator& gen, std::size_t n);

}  // namespace iottrust::sim
