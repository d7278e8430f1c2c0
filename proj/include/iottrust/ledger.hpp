#pragma once

#include "iottrust/common.hpp"
#include "iottrust/consensus.hpp"
#include "iottrust/crypto.hpp"

#include <json.hpp>

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace iottrust::ledger {

inline constexpr LogicalTime kForever = std::numeric_limits<LogicalTime>::max();

struct LedgerParams
{
  std::size_t c{1};
  double      tol{0.1};
  double      gamma{0.5};
  double      c_th{0.5};
  double      r_default{1.0};
  double      r_init_new{0.0};
  LogicalTime t_ban{1000};
  std::size_t q{10000};
};

nlohmann::json params_to_json(const LedgerParams& p);
LedgerParams params_from_json(const nlohmann::json& doc);

/// Inverse hash chain: elements are revealed from chf^(q-1)(seed) down to the seed.
class HashChain
{
public:
  HashChain(Bytes seed, std::size_t q);

  /// chf^q(seed), the value published at registration.
  const Digest& head() const { return elements_.back(); }
  std::size_t length() const { return elements_.size() - 1; }

  /// Elements still unrevealed.
  std::size_t remaining() const { return cursor_; }

  /// Next element in reveal order, or nullopt once the seed has been revealed.
  std::optional<Digest> reveal();

  /// chf^i(seed)
  const Digest& element(std::size_t i) const { return elements_.at(i); }

private:
  std::vector<Digest> elements_;
  std::size_t         cursor_;
};

struct NodeRecord
{
  DeviceId                   id;
  Digest                     chain_head{};
  std::size_t                chain_index{0};
  double                     reliability{0.0};
  std::optional<LogicalTime> banned_until;
};

enum class NonceCheck
{
  ok,
  mismatch,
  exhausted,
};

std::string_view to_string(NonceCheck check);

/// Accepts revealed iff chf(revealed) equals the current head, then advances the head.
NonceCheck verify_nonce(NodeRecord& record, const Digest& revealed);

struct Block
{
  std::uint64_t  height{0};
  Digest         prev{};
  nlohmann::json payload;
  Digest         digest{};
};

/// Canonical one-line JSON encoding of a block (sorted keys, no whitespace).
std::string encode_block(const Block& block);

/// In-process append-only ledger running the reliability contract.
///
/// Single writer. Every state change is a block whose payload carries enough
/// to re-execute it, so replay() rebuilds identical state from a dump.
class Ledger
{
public:
  explicit Ledger(LedgerParams params = {});

  const LedgerParams& params() const { return params_; }

  /// Pessimistic admission: starts below the control threshold and banned for t_ban.
  const NodeRecord& register_node(const DeviceId& id, const Digest& chain_head, std::size_t q, LogicalTime now);

  /// Runs the contract on one transaction and appends its result block.
  consensus::ConsensusOutcome execute_sm(const consensus::PathTransaction& tx);

  /// Stored reliability, or r_default once a ban has elapsed.
  double query_reliability(const DeviceId& id, LogicalTime now) const;

  /// Reliability at or above c_th.
  bool engaged(const DeviceId& id, LogicalTime now) const;

  bool contains(const DeviceId& id) const { return records_.count(id) != 0; }
  const NodeRecord& record(const DeviceId& id) const;
  const std::map<DeviceId, NodeRecord>& records() const { return records_; }

  const std::vector<Block>& blocks() const { return blocks_; }

  /// True if the digest was ever accepted as a nonce.
  bool nonce_used(const Digest& nonce) const { return used_nonces_.count(nonce) != 0; }

  /// Nonces accepted for a node, in reveal order.
  std::vector<Digest> revealed_nonces(const DeviceId& id) const;

  /// One canonical block per line.
  std::string dump() const;

  /// Re-executes a dump from genesis; throws DecodeError if it is not byte-identical
  /// to the re-execution.
  static Ledger replay(std::string_view dump);

private:
  void append(nlohmann::json payload);
  nlohmann::json restore_expired(LogicalTime now);

  LedgerParams                                 params_;
  std::map<DeviceId, NodeRecord>               records_;
  std::map<DeviceId, std::vector<Digest>>      revealed_;
  std::set<Digest>                             used_nonces_;
  std::vector<Block>                           blocks_;
};

/// Recomputes the digest chain and checks every line is canonically encoded.
bool verify_ledger(std::string_view dump);
bool verify_blocks(const std::vector<Block>& blocks);

nlohmann::json transaction_to_json(const consensus::PathTransaction& tx);
consensus::PathTransaction transaction_from_json(const nlohmann::json& doc);

}  // namespace iottrust::ledger
