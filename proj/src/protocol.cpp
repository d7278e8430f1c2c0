#include "iottrust/protocol.hpp"

#include <algorithm>

namespace iottrust::consensus {

CollectedScores collect_scores(const std::vector<std::vector<DeviceId>>& paths, const DeviceId& target,
                               Participants& participants)
{
  CollectedScores out;
  for (const auto& nodes : paths)
  {
    auto tau = participants.evaluate(nodes.back(), target);
    if (!tau)
    {
      out.dropped.push_back({nodes, "evaluator has no recent traffic"});
      continue;
    }
    double value = *tau;
    for (auto it = nodes.rbegin() + 1; it != nodes.rend(); ++it)
    {
      value = participants.relay(*it, target, value);
    }
    out.paths.push_back({nodes, std::clamp(value, 0.0, 1.0)});
  }
  return out;
}

std::vector<PathReport> attach_nonces(std::vector<ScoredPath> paths, Participants& participants)
{
  std::stable_sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) { return a.nodes < b.nodes; });
  std::vector<PathReport> out;
  out.reserve(paths.size());
  for (auto& p : paths)
  {
    PathReport r{std::move(p.nodes), {}, p.tau};
    for (const auto& node : r.nodes)
    {
      r.nonces.push_back(participants.next_nonce(node));
    }
    out.push_back(std::move(r));
  }
  return out;
}

Assessment assess(const DeviceId& source, const DeviceId& target, const AssessParams& params,
                  const NetworkView& network, Participants& participants, ledger::Ledger& ledger,
                  LogicalTime now, const std::vector<PathReport>& forged)
{
  if (!ledger.contains(source))
  {
    throw ContractError("source '" + source + "' is not registered");
  }
  auto engaged = [&](const DeviceId& id) { return ledger.engaged(id, now); };
  auto paths = discover_paths(source, target, params.maximum_depth, network, engaged);
  auto collected = collect_scores(paths, target, participants);

  Assessment a;
  a.dropped = std::move(collected.dropped);
  a.transaction.submitter = source;
  a.transaction.target = target;
  a.transaction.logical_time = now;
  a.transaction.paths = attach_nonces(std::move(collected.paths), participants);
  a.transaction.paths.insert(a.transaction.paths.end(), forged.begin(), forged.end());
  a.outcome = ledger.execute_sm(a.transaction);
  return a;
}

}  // namespace iottrust::consensus
