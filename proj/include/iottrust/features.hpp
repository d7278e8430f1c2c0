#pragma once

#include "iottrust/common.hpp"
#include "iottrust/trace.hpp"

#include <json.hpp>

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iottrust::features {

/// Engineered per-packet feature values; one distinct tuple is one symbol.
struct FeatureTuple
{
  int source_port_type{0};  // 0 user, 1 system, 2 dynamic
  int packet_length_bin{0};
  int tcp_flags{0};
  int protocol{0};
  int iat_bin{0};

  std::optional<int> payload_bin;
  std::optional<int> payload_shift;

  auto operator<=>(const FeatureTuple&) const = default;
  bool operator==(const FeatureTuple&) const = default;
};

/// Binning metadata learned once from safe-period traffic and then frozen.
struct BinningProfile
{
  std::array<double, 2>        iat_edges{0.0, 0.0};
  std::vector<std::uint32_t>   length_top9;
  std::optional<std::array<double, 2>> payload_central;
  std::vector<std::string>     payload_categories;  // index = category id

  std::optional<int> category_id(const std::string& label) const;
};

inline constexpr std::size_t kLengthBins = 9;

BinningProfile build_binning_profile(const trace::CommunicationSet& safe_set);

int source_port_type(std::uint16_t port);

/// Per-packet features of one interaction sequence.
std::vector<FeatureTuple> engineer(const trace::InteractionSequence& seq, const BinningProfile& profile);

/// Incremental form of engineer() for live monitoring.
///
/// Feeding the packets of a split stream one at a time yields the same tuples
/// as engineer() applied to each sequence, provided the same tau_split is used.
class FeatureStream
{
public:
  FeatureStream(const BinningProfile& profile, double tau_split);

  FeatureTuple push(const trace::Packet& packet);

  /// True when the last pushed packet opened a new interaction sequence.
  bool started_sequence() const { return started_; }

private:
  const BinningProfile* profile_;
  double                tau_split_;
  std::optional<double> last_ts_;
  std::optional<int>    last_payload_bin_;
  bool                  started_{false};
};

class SymbolVocabulary
{
public:
  /// Returns the id for a tuple, assigning the next free id when unfrozen.
  /// A frozen vocabulary maps unseen tuples to unknown_id().
  Symbol map(const FeatureTuple& tuple);

  std::optional<Symbol> find(const FeatureTuple& tuple) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t size() const { return ids_.size(); }

  /// Reserved id for unseen tuples after freezing.
  Symbol unknown_id() const { return static_cast<Symbol>(ids_.size()); }

  const std::vector<FeatureTuple>& tuples() const { return tuples_; }

private:
  std::map<FeatureTuple, Symbol> ids_;
  std::vector<FeatureTuple>      tuples_;
  bool                           frozen_{false};
};

struct SymbolSequence
{
  DeviceId            src;
  DeviceId            dst;
  std::vector<Symbol> symbols;
};

SymbolSequence to_symbols(std::span<const FeatureTuple> tuples, SymbolVocabulary& vocab,
                          const DeviceId& src = {}, const DeviceId& dst = {});

nlohmann::json profile_to_json(const BinningProfile& profile);
BinningProfile profile_from_json(const nlohmann::json& doc);

nlohmann::json vocabulary_to_json(const SymbolVocabulary& vocab);
SymbolVocabulary vocabulary_from_json(const nlohmann::json& doc);

}  // namespace iottrust::features
