#include "iottrust/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iottrust::features {

using nlohmann::json;

std::optional<int> BinningProfile::category_id(const std::string& label) const
{
  auto it = std::find(payload_categories.begin(), payload_categories.end(), label);
  if (it == payload_categories.end())
  {
    return std::nullopt;
  }
  return static_cast<int>(it - payload_categories.begin());
}

BinningProfile build_binning_profile(const trace::CommunicationSet& safe_set)
{
  std::size_t packet_count = 0;
  for (const auto& s : safe_set.sequences)
  {
    packet_count += s.packets.size();
  }
  if (packet_count == 0)
  {
    throw ContractError("empty safe period");
  }

  BinningProfile profile;

  double iat_lo = std::numeric_limits<double>::infinity();
  double iat_hi = -std::numeric_limits<double>::infinity();
  std::map<std::uint32_t, std::size_t> length_counts;
  double pl_lo = std::numeric_limits<double>::infinity();
  double pl_hi = -std::numeric_limits<double>::infinity();

  for (const auto& seq : safe_set.sequences)
  {
    for (std::size_t i = 0; i < seq.packets.size(); ++i)
    {
      const auto& p = seq.packets[i];
      if (i > 0)
      {
        double iat = p.timestamp - seq.packets[i - 1].timestamp;
        iat_lo = std::min(iat_lo, iat);
        iat_hi = std::max(iat_hi, iat);
      }
      ++length_counts[p.length];
      if (p.payload)
      {
        if (p.payload->is_numeric())
        {
          pl_lo = std::min(pl_lo, p.payload->number());
          pl_hi = std::max(pl_hi, p.payload->number());
        }
        else if (!profile.category_id(p.payload->category()))
        {
          profile.payload_categories.push_back(p.payload->category());
        }
      }
    }
  }

  if (!std::isfinite(iat_lo))
  {
    iat_lo = 0.0;
    iat_hi = 0.0;
  }
  // Degenerate range: keep the edges strictly increasing so the safe IAT lands in bin 0.
  double width = (iat_hi - iat_lo) / 3.0;
  if (!(width > 0.0))
  {
    width = 1e-9;
  }
  profile.iat_edges = {iat_lo + width, iat_lo + 2.0 * width};

  std::vector<std::pair<std::uint32_t, std::size_t>> by_freq(length_counts.begin(), length_counts.end());
  std::stable_sort(by_freq.begin(), by_freq.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < by_freq.size() && i < kLengthBins; ++i)
  {
    profile.length_top9.push_back(by_freq[i].first);
  }

  if (std::isfinite(pl_lo))
  {
    profile.payload_central = std::array<double, 2>{pl_lo, pl_hi};
  }
  return profile;
}

int source_port_type(std::uint16_t port)
{
  if (port <= 1023)
  {
    return 1;
  }
  if (port <= 49151)
  {
    return 0;
  }
  return 2;
}

namespace {

int length_bin(const BinningProfile& profile, std::uint32_t length)
{
  auto it = std::find(profile.length_top9.begin(), profile.length_top9.end(), length);
  if (it == profile.length_top9.end())
  {
    return static_cast<int>(kLengthBins);
  }
  return static_cast<int>(it - profile.length_top9.begin());
}

int iat_bin(const BinningProfile& profile, double iat)
{
  if (iat < profile.iat_edges[0])
  {
    return 0;
  }
  if (iat < profile.iat_edges[1])
  {
    return 1;
  }
  return 2;
}

int payload_bin(const BinningProfile& profile, const trace::PayloadValue& value)
{
  if (value.is_numeric())
  {
    // Without a safe-period reference every numeric reading is out of range.
    if (!profile.payload_central)
    {
      return 2;
    }
    double v = value.number();
    if (v < (*profile.payload_central)[0])
    {
      return 0;
    }
    if (v > (*profile.payload_central)[1])
    {
      return 2;
    }
    return 1;
  }
  auto id = profile.category_id(value.category());
  return id ? *id : static_cast<int>(profile.payload_categories.size());
}

FeatureTuple base_tuple(const BinningProfile& profile, const trace::Packet& p)
{
  FeatureTuple t;
  t.source_port_type = source_port_type(p.src_port);
  t.packet_length_bin = length_bin(profile, p.length);
  t.tcp_flags = p.tcp_flags;
  t.protocol = p.protocol;
  return t;
}

}  // namespace

std::vector<FeatureTuple> engineer(const trace::InteractionSequence& seq, const BinningProfile& profile)
{
  std::vector<FeatureTuple> out;
  out.reserve(seq.packets.size());
  std::optional<int> prev_bin;
  for (std::size_t i = 0; i < seq.packets.size(); ++i)
  {
    const auto& p = seq.packets[i];
    auto t = base_tuple(profile, p);
    t.iat_bin = i == 0 ? 0 : iat_bin(profile, p.timestamp - seq.packets[i - 1].timestamp);
    if (p.payload)
    {
      int bin = payload_bin(profile, *p.payload);
      t.payload_bin = bin;
      t.payload_shift = prev_bin ? std::abs(bin - *prev_bin) : 0;
      prev_bin = bin;
    }
    out.push_back(t);
  }
  return out;
}

FeatureStream::FeatureStream(const BinningProfile& profile, double tau_split)
  : profile_(&profile)
  , tau_split_(tau_split)
{}

FeatureTuple FeatureStream::push(const trace::Packet& packet)
{
  started_ = !last_ts_ || packet.timestamp - *last_ts_ > tau_split_;
  if (started_)
  {
    last_payload_bin_.reset();
  }
  auto t = base_tuple(*profile_, packet);
  t.iat_bin = started_ ? 0 : iat_bin(*profile_, packet.timestamp - *last_ts_);
  if (packet.payload)
  {
    int bin = payload_bin(*profile_, *packet.payload);
    t.payload_bin = bin;
    t.payload_shift = last_payload_bin_ ? std::abs(bin - *last_payload_bin_) : 0;
    last_payload_bin_ = bin;
  }
  last_ts_ = packet.timestamp;
  return t;
}

Symbol SymbolVocabulary::map(const FeatureTuple& tuple)
{
  auto it = ids_.find(tuple);
  if (it != ids_.end())
  {
    return it->second;
  }
  if (frozen_)
  {
    return unknown_id();
  }
  auto id = static_cast<Symbol>(ids_.size());
  ids_.emplace(tuple, id);
  tuples_.push_back(tuple);
  return id;
}

std::optional<Symbol> SymbolVocabulary::find(const FeatureTuple& tuple) const
{
  auto it = ids_.find(tuple);
  if (it == ids_.end())
  {
    return std::nullopt;
  }
  return it->second;
}

SymbolSequence to_symbols(std::span<const FeatureTuple> tuples, SymbolVocabulary& vocab,
                          const DeviceId& src, const DeviceId& dst)
{
  SymbolSequence out{src, dst, {}};
  out.symbols.reserve(tuples.size());
  for (const auto& t : tuples)
  {
    out.symbols.push_back(vocab.map(t));
  }
  return out;
}

json profile_to_json(const BinningProfile& profile)
{
  json doc = json::object();
  doc["iat_edges"] = profile.iat_edges;
  doc["length_top9"] = profile.length_top9;
  doc["payload_central"] = profile.payload_central ? json(*profile.payload_central) : json(nullptr);
  json cats = json::object();
  for (std::size_t i = 0; i < profile.payload_categories.size(); ++i)
  {
    cats[profile.payload_categories[i]] = i;
  }
  doc["payload_categories"] = cats;
  return doc;
}

BinningProfile profile_from_json(const json& doc)
{
  try
  {
    BinningProfile p;
    p.iat_edges = doc.at("iat_edges").get<std::array<double, 2>>();
    p.length_top9 = doc.at("length_top9").get<std::vector<std::uint32_t>>();
    if (!doc.at("payload_central").is_null())
    {
      p.payload_central = doc.at("payload_central").get<std::array<double, 2>>();
    }
    const auto& cats = doc.at("payload_categories");
    p.payload_categories.resize(cats.size());
    for (const auto& [label, id] : cats.items())
    {
      auto idx = id.get<std::size_t>();
      if (idx >= p.payload_categories.size())
      {
        throw DecodeError("category id out of range");
      }
      p.payload_categories[idx] = label;
    }
    return p;
  }
  catch (const json::exception& e)
  {
    throw DecodeError(std::string("invalid binning profile: ") + e.what());
  }
}

namespace {

json opt_json(const std::optional<int>& v)
{
  return v ? json(*v) : json(nullptr);
}

std::optional<int> opt_from(const json& v)
{
  if (v.is_null())
  {
    return std::nullopt;
  }
  return v.get<int>();
}

}  // namespace

json vocabulary_to_json(const SymbolVocabulary& vocab)
{
  json entries = json::array();
  for (const auto& t : vocab.tuples())
  {
    entries.push_back(json::array({t.source_port_type, t.packet_length_bin, t.tcp_flags, t.protocol,
                                   t.iat_bin, opt_json(t.payload_bin), opt_json(t.payload_shift)}));
  }
  return json{{"frozen", vocab.frozen()}, {"tuples", entries}};
}

SymbolVocabulary vocabulary_from_json(const json& doc)
{
  try
  {
    SymbolVocabulary vocab;
    for (const auto& e : doc.at("tuples"))
    {
      FeatureTuple t{e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(), e.at(3).get<int>(),
                     e.at(4).get<int>(), opt_from(e.at(5)), opt_from(e.at(6))};
      auto before = vocab.size();
      vocab.map(t);
      if (vocab.size() == before)
      {
        throw DecodeError("duplicate tuple in vocabulary");
      }
    }
    if (doc.at("frozen").get<bool>())
    {
      vocab.freeze();
    }
    return vocab;
  }
  catch (const json::exception& e)
  {
    throw DecodeError(std::string("invalid vocabulary: ") + e.what());
  }
}

}  // namespace iottrust::features
