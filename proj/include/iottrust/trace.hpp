#pragma once

#include "iottrust/common.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace iottrust::trace {

/// Application payload: a numeric reading or a categorical label.
struct PayloadValue
{
  std::variant<double, std::string> value;

  static PayloadValue numeric(double v) { return PayloadValue{v}; }
  static PayloadValue categorical(std::string label) { return PayloadValue{std::move(label)}; }

  bool is_numeric() const { return std::holds_alternative<double>(value); }
  double number() const { return std::get<double>(value); }
  const std::string& category() const { return std::get<std::string>(value); }

  bool operator==(const PayloadValue&) const = default;
};

inline constexpr std::uint8_t kTcpPsh = 0x08;

struct Packet
{
  double        timestamp{0.0};
  DeviceId      src;
  DeviceId      dst;
  std::uint16_t src_port{0};
  std::uint8_t  tcp_flags{0};
  int           protocol{6};
  std::uint32_t length{0};

  std::optional<PayloadValue> payload;

  bool operator==(const Packet&) const = default;
};

/// Consecutive same-direction packets whose inter-arrival gaps stay within tau_split.
struct InteractionSequence
{
  DeviceId            src;
  DeviceId            dst;
  double              start_time{0.0};
  std::vector<Packet> packets;
};

/// All interaction sequences for one directed device pair, ordered by start time.
struct CommunicationSet
{
  DeviceId                         src;
  DeviceId                         dst;
  std::vector<InteractionSequence> sequences;

  bool empty() const { return sequences.empty(); }
};

enum class TraceFormat
{
  jsonl,
  csv,
};

inline constexpr double kDefaultTauSplit = 30.0;

/// Parses a trace. Line numbers in errors are 1-based.
std::vector<Packet> ingest_trace(std::string_view text, TraceFormat format = TraceFormat::jsonl);

/// Canonical JSONL encoding: keys ts, src, dst, sport, flags, proto, len, payload.
std::string write_trace(const std::vector<Packet>& packets);

/// Groups packets per directed pair; a new sequence starts when the gap exceeds tau_split.
std::vector<InteractionSequence> split_sequences(const std::vector<Packet>& packets, double tau_split);

CommunicationSet build_communication_set(const std::vector<InteractionSequence>& sequences,
                                         const DeviceId& src, const DeviceId& dst);

}  // namespace iottrust::trace
