#pragma once

#include "iottrust/consensus.hpp"
#include "iottrust/ledger.hpp"

#include <optional>
#include <string>
#include <vector>

namespace iottrust::consensus {

/// Node-side behaviour the protocol needs from each participant.
class Participants
{
public:
  virtual ~Participants() = default;

  /// Next element of the node's inverse hash chain.
  virtual Digest next_nonce(const DeviceId& node) = 0;

  /// Evaluator's trust score for target, or nullopt without recent traffic.
  virtual std::optional<double> evaluate(const DeviceId& evaluator, const DeviceId& target) = 0;

  /// Score as forwarded by an intermediate path member on its way back to the source.
  virtual double relay(const DeviceId& /*node*/, const DeviceId& /*target*/, double tau) { return tau; }
};

struct DroppedPath
{
  std::vector<DeviceId> nodes;
  std::string           reason;
};

struct CollectedScores
{
  std::vector<ScoredPath>  paths;
  std::vector<DroppedPath> dropped;
};

/// Asks each path's evaluator for its score and relays it back through the path.
CollectedScores collect_scores(const std::vector<std::vector<DeviceId>>& paths, const DeviceId& target,
                               Participants& participants);

/// Sorts paths lexicographically by node list and attaches one fresh nonce per member.
std::vector<PathReport> attach_nonces(std::vector<ScoredPath> paths, Participants& participants);

struct AssessParams
{
  std::size_t maximum_depth{2};
};

struct Assessment
{
  PathTransaction          transaction;
  ConsensusOutcome         outcome;
  std::vector<DroppedPath> dropped;
};

/// discover -> collect -> transaction -> contract. Nodes below c_th at `now` are not engaged.
/// `forged` paths, if any, are appended to the transaction as submitted (used to model
/// replay attempts by a dishonest submitter).
Assessment assess(const DeviceId& source, const DeviceId& target, const AssessParams& params,
                  const NetworkView& network, Participants& participants, ledger::Ledger& ledger,
                  LogicalTime now, const std::vector<PathReport>& forged = {});

}  // namespace iottrust::consensus
