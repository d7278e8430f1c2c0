#pragma once

#include "iottrust/common.hpp"
#include "iottrust/crypto.hpp"
#include "iottrust/features.hpp"
#include "iottrust/ledger.hpp"
#include "iottrust/predictor.hpp"
#include "iottrust/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace iottrust::delegation {

enum class DeviceClass
{
  basic,
  capable,
  powerful,
};

DeviceClass parse_device_class(std::string_view name);  // "BD", "CD", "PD"
std::string_view to_string(DeviceClass c);

enum class TaskKind
{
  train,
  infer,
};

std::string_view to_string(TaskKind k);

/// Content-addressed immutable blobs, optionally mirrored to a directory
/// where each file is named by the hex digest of its contents.
class BlobStore
{
public:
  BlobStore() = default;
  explicit BlobStore(std::filesystem::path directory);

  Digest put(std::span<const std::uint8_t> bytes);
  /// Throws Error when the address is unknown or the stored bytes no longer hash to it.
  Bytes fetch(const Digest& address) const;
  bool contains(const Digest& address) const;
  std::size_t size() const;

private:
  std::optional<std::filesystem::path> directory_;
  mutable std::shared_mutex            mutex_;
  mutable std::map<Digest, Bytes>      blobs_;
};

/// JSON messages seen on the simulated wire, plus the blobs they reference.
class WireLog
{
public:
  void record(nlohmann::json message);
  const std::vector<nlohmann::json>& messages() const { return messages_; }

private:
  std::vector<nlohmann::json> messages_;
};

Bytes make_salt(Rng& rng, std::size_t length = 16);

/// chf(u32 little-endian symbol || salt)
Digest hash_symbol(Symbol symbol, std::span<const std::uint8_t> salt);
std::vector<Digest> hash_symbols(std::span<const Symbol> symbols, std::span<const std::uint8_t> salt);

/// Training examples over salted digests. No raw symbol ever appears.
struct HashedDataset
{
  std::uint32_t       window{0};
  std::vector<Digest> contexts;  // window digests per example, back to back
  std::vector<Digest> labels;
};

Bytes encode_dataset(const HashedDataset& ds);
HashedDataset decode_dataset(std::span<const std::uint8_t> bytes);

/// Assigns dense ids to digests in first-seen order.
class DigestVocabulary
{
public:
  Symbol map(const Digest& d);
  /// Dense id, or unknown_id() for digests never seen.
  Symbol find(const Digest& d) const;
  Symbol unknown_id() const { return static_cast<Symbol>(order_.size()); }
  std::size_t size() const { return order_.size(); }
  const std::vector<Digest>& digests() const { return order_; }

private:
  std::map<Digest, Symbol> ids_;
  std::vector<Digest>      order_;
};

/// Model trained over dense re-mapped digests together with its digest table.
struct HashedModel
{
  DigestVocabulary            vocabulary;
  predictor::FingerprintModel model;

  /// Misprediction rate over positions >= model.window() of a digest window
  /// that includes its own lookback context.
  double misprediction(std::span<const Digest> window) const;
};

Bytes encode_hashed_model(const HashedModel& m);
HashedModel decode_hashed_model(std::span<const std::uint8_t> bytes);

struct DelegationRequest
{
  DeviceId requester;
  TaskKind kind{TaskKind::train};
  Digest   blob{};
  Digest   salt_fingerprint{};  // chf(salt); identifies the session
};

nlohmann::json request_to_json(const DelegationRequest& r);

/// Requester side of one session: owns the salt and the raw-to-digest mapping.
class Session
{
public:
  Session(DeviceId requester, Bytes salt);

  const DeviceId& requester() const { return requester_; }
  const Digest& fingerprint() const { return fingerprint_; }

  std::vector<Digest> hash(std::span<const Symbol> symbols) const;
  HashedDataset make_dataset(std::span<const features::SymbolSequence> sequences, std::size_t window) const;
  DelegationRequest request(TaskKind kind, const Digest& blob) const;

private:
  DeviceId requester_;
  Bytes    salt_;
  Digest   fingerprint_;
};

/// Delegate side. Learns only digests, addresses and the requester id.
class Delegate
{
public:
  Delegate(DeviceId id, BlobStore& store, WireLog* log = nullptr);

  const DeviceId& id() const { return id_; }

  /// Fetches the dataset, trains, stores the model blob and keeps it for inference.
  Digest train(const DelegationRequest& request, const predictor::TrainConfig& config);
  /// Loads a model blob for an inference-only session.
  void load(const DelegationRequest& request);
  double infer(const Digest& session, std::span<const Digest> window);
  bool has_session(const Digest& session) const { return sessions_.count(session) != 0; }
  void terminate(const Digest& session) { sessions_.erase(session); }
  std::size_t session_count() const { return sessions_.size(); }

private:
  DeviceId                      id_;
  BlobStore*                    store_;
  WireLog*                      log_;
  std::map<Digest, HashedModel> sessions_;
};

/// Requester-side handle on a delegated inference session. Ends for good as
/// soon as the delegate's ledger reliability is observed below c_th.
class InferenceLink
{
public:
  InferenceLink(Session session, Delegate& delegate, WireLog* log = nullptr);

  double infer(std::span<const Symbol> raw_window, const ledger::Ledger& ledger, LogicalTime now);
  bool open() const { return open_; }
  const DeviceId& delegate_id() const { return delegate_->id(); }

private:
  Session   session_;
  Delegate* delegate_;
  WireLog*  log_;
  bool      open_{true};
};

/// Neighbourhood queries needed for delegate selection.
struct Neighborhood
{
  std::function<std::vector<DeviceId>(const DeviceId&)> neighbors;  // ascending ids
  std::function<DeviceClass(const DeviceId&)>           device_class;
};

/// Nodes within `levels` hops (nearest level first, ids ascending within a level)
/// whose reliability exceeds c_th and whose class can take the task.
std::vector<DeviceId> eligible_delegates(const DeviceId& requester, TaskKind kind, std::size_t levels,
                                         const Neighborhood& hood, const ledger::Ledger& ledger, LogicalTime now);

/// First eligible candidate that accepts; throws "no delegate available".
DeviceId select_delegate(const DeviceId& requester, TaskKind kind, std::size_t levels, const Neighborhood& hood,
                         const ledger::Ledger& ledger, LogicalTime now,
                         const std::function<bool(const DeviceId&)>& accepts);

struct PrivacyFinding
{
  std::size_t message{0};
  std::string what;
};

/// Scans every message and every blob it references for the target id, for
/// unsalted digests of raw symbols, for raw training contexts in packed or
/// JSON form, and for integer symbol fields.
std::vector<PrivacyFinding> privacy_scan(const WireLog& log, const BlobStore& store, const DeviceId& target,
                                         std::span<const Symbol> raw_vocabulary,
                                         std::span<const features::SymbolSequence> raw_sequences,
                                         std::size_t window);

}  // namespace iottrust::delegation
