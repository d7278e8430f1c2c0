#include "iottrust/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace iottrust::consensus {

using nlohmann::json;

namespace {
// spreads and means computed from grid scores differ by rounding only
constexpr double kTieEpsilon = 1e-12;
}  // namespace

std::optional<std::vector<std::size_t>> find_consensus_set(std::span<const double> scores, std::size_t c,
                                                           double tol)
{
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Any subset fitting in [lo, lo + tol] is dominated by the full run of sorted
  // scores in that range, so the candidates are maximal runs.
  std::optional<std::vector<std::size_t>> best;
  double best_spread = 0.0;
  double best_mean = 0.0;
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < order.size(); ++lo)
  {
    hi = std::max(hi, lo);
    while (hi + 1 < order.size() && scores[order[hi + 1]] - scores[order[lo]] <= tol + kAgreementSlack)
    {
      ++hi;
    }
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    if (members.size() < c + 1)
    {
      continue;
    }
    std::sort(members.begin(), members.end());
    double spread = scores[order[hi]] - scores[order[lo]];
    double mean = trustworthiness(scores, members);
    bool better = !best || members.size() > best->size() ||
                  (members.size() == best->size() &&
                   (spread < best_spread - kTieEpsilon ||
                    (std::abs(spread - best_spread) <= kTieEpsilon && mean < best_mean - kTieEpsilon)));
    if (better)
    {
      best = std::move(members);
      best_spread = spread;
      best_mean = mean;
    }
  }
  return best;
}

double trustworthiness(std::span<const double> scores, std::span<const std::size_t> members)
{
  if (members.empty())
  {
    throw ContractError("trustworthiness of an empty consensus set");
  }
  // Extended accumulation: n copies of one score average back to that score exactly.
  long double sum = 0.0L;
  for (auto i : members)
  {
    sum += scores[i];
  }
  return static_cast<double>(sum / static_cast<long double>(members.size()));
}

std::map<DeviceId, double> compute_delta_rl(std::span<const ScoredPath> paths,
                                            std::span<const std::size_t> consensus_set, double trust,
                                            double gamma)
{
  if (consensus_set.empty())
  {
    throw ContractError("delta RL requires a consensus set");
  }
  std::set<std::size_t> in_cs(consensus_set.begin(), consensus_set.end());
  std::map<DeviceId, double> negative;
  std::map<DeviceId, std::size_t> positive;
  for (std::size_t i = 0; i < paths.size(); ++i)
  {
    std::set<DeviceId> members(paths[i].nodes.begin(), paths[i].nodes.end());
    for (const auto& node : members)
    {
      if (in_cs.count(i) != 0)
      {
        ++positive[node];
        negative.try_emplace(node, 0.0);
      }
      else
      {
        negative[node] += std::max(-1.0, -std::abs(paths[i].tau - trust));
      }
    }
  }
  std::map<DeviceId, double> out;
  for (const auto& [node, neg] : negative)
  {
    auto it = positive.find(node);
    std::size_t n_cs = it == positive.end() ? 0 : it->second;
    out[node] = neg + gamma * static_cast<double>(n_cs);
  }
  return out;
}

json outcome_to_json(const ConsensusOutcome& outcome)
{
  json doc = json::object();
  doc["target"] = outcome.target;
  doc["consensus_set"] = outcome.consensus_set;
  doc["trustworthiness"] = outcome.trustworthiness ? json(*outcome.trustworthiness) : json(nullptr);
  doc["delta_rl"] = outcome.delta_rl;
  doc["voided"] = outcome.voided;
  doc["no_consensus"] = outcome.no_consensus;
  return doc;
}

namespace {

void flood(const DeviceId& node, std::vector<DeviceId>& path, std::size_t depth, const DeviceId& source,
           const DeviceId& target, const NetworkView& network,
           const std::function<bool(const DeviceId&)>& engaged, std::vector<std::vector<DeviceId>>& out)
{
  path.push_back(node);
  if (network.is_evaluator(node, target))
  {
    out.push_back(path);
  }
  if (depth > 1)
  {
    for (const auto& next : network.neighbors(node))
    {
      if (next == source || next == target || std::find(path.begin(), path.end(), next) != path.end())
      {
        continue;
      }
      if (engaged && !engaged(next))
      {
        continue;
      }
      flood(next, path, depth - 1, source, target, network, engaged, out);
    }
  }
  path.pop_back();
}

}  // namespace

std::vector<std::vector<DeviceId>> discover_paths(const DeviceId& source, const DeviceId& target,
                                                  std::size_t maximum_depth, const NetworkView& network,
                                                  const std::function<bool(const DeviceId&)>& engaged)
{
  if (maximum_depth < 1)
  {
    throw ContractError("maximum_depth must be at least 1");
  }
  std::vector<std::vector<DeviceId>> out;
  std::vector<DeviceId> path;
  for (const auto& first : network.neighbors(source))
  {
    if (first == target || first == source || (engaged && !engaged(first)))
    {
      continue;
    }
    flood(first, path, maximum_depth, source, target, network, engaged, out);
  }
  return out;
}

}  // namespace iottrust::consensus
