#pragma once

#include "iottrust/common.hpp"
#include "iottrust/crypto.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iottrust::consensus {

/// Scores within tol of each other agree; the slack absorbs decimal-grid rounding.
inline constexpr double kAgreementSlack = 1e-9;

/// An evaluation path as reported to the ledger: first hop .. evaluator,
/// one hash-chain nonce per member, and the trust score it returned.
struct PathReport
{
  std::vector<DeviceId> nodes;
  std::vector<Digest>   nonces;
  double                tau{0.0};

  const DeviceId& evaluator() const { return nodes.back(); }
};

struct PathTransaction
{
  DeviceId                submitter;
  DeviceId                target;
  std::vector<PathReport> paths;
  LogicalTime             logical_time{0};
};

struct ConsensusOutcome
{
  DeviceId                        target;
  std::vector<std::size_t>        consensus_set;  // indices into the transaction's paths
  std::optional<double>           trustworthiness;
  std::map<DeviceId, double>      delta_rl;
  std::vector<std::size_t>        voided;  // paths rejected by nonce verification
  bool                            no_consensus{true};
};

/// Largest subset of scores fitting in an interval of width tol, if it has at
/// least c + 1 members. Ties on size: smallest spread, then lowest mean.
/// Returned indices are ascending.
std::optional<std::vector<std::size_t>> find_consensus_set(std::span<const double> scores, std::size_t c,
                                                           double tol);

/// Mean of the member scores, summed in ascending index order in extended precision.
double trustworthiness(std::span<const double> scores, std::span<const std::size_t> members);

struct ScoredPath
{
  std::vector<DeviceId> nodes;
  double                tau{0.0};
};

/// Reliability variation per node: disagreeing paths contribute max(-1, -|tau - T|),
/// each consensus path contributes gamma.
std::map<DeviceId, double> compute_delta_rl(std::span<const ScoredPath> paths,
                                            std::span<const std::size_t> consensus_set, double trust,
                                            double gamma);

nlohmann::json outcome_to_json(const ConsensusOutcome& outcome);

/// Neighbourhood as seen by the request flood.
class NetworkView
{
public:
  virtual ~NetworkView() = default;

  /// Neighbours in ascending id order.
  virtual std::vector<DeviceId> neighbors(const DeviceId& node) const = 0;

  /// True when node owns a fingerprint model of target.
  virtual bool is_evaluator(const DeviceId& node, const DeviceId& target) const = 0;
};

/// Bounded-depth request flood. Each receiver appends itself, replies when it is
/// an evaluator and forwards while depth remains. Paths never repeat a node and
/// never pass through the source or the target. Nodes rejected by `engaged`
/// neither forward nor reply.
std::vector<std::vector<DeviceId>> discover_paths(const DeviceId& source, const DeviceId& target,
                                                  std::size_t maximum_depth, const NetworkView& network,
                                                  const std::function<bool(const DeviceId&)>& engaged = {});

}  // namespace iottrust::consensus
