#include "iottrust/consensus.hpp"
#include "iottrust/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

using namespace iottrust;
using namespace iottrust::consensus;

namespace {

class Graph : public NetworkView
{
public:
  void link(const DeviceId& a, const DeviceId& b)
  {
    adj_[a].insert(b);
    adj_[b].insert(a);
  }
  void evaluator(const DeviceId& n) { evaluators_.insert(n); }
  std::vector<DeviceId> neighbors(const DeviceId& node) const override
  {
    auto it = adj_.find(node);
    return it == adj_.end() ? std::vector<DeviceId>{} : std::vector<DeviceId>(it->second.begin(), it->second.end());
  }
  bool is_evaluator(const DeviceId& node, const DeviceId&) const override { return evaluators_.count(node) != 0; }

private:
  std::map<DeviceId, std::set<DeviceId>> adj_;
  std::set<DeviceId> evaluators_;
};

Graph figure_three()
{
  Graph g;
  for (const char* n : {"a", "b", "c"})
  {
    g.link("s", n);
  }
  g.link("a", "d");
  g.link("b", "f");
  g.link("c", "f");
  for (const char* n : {"b", "d", "f"})
  {
    g.evaluator(n);
    g.link(n, "x");
  }
  return g;
}

struct Pick
{
  std::size_t size{0};
  double      spread{0};
  double      mean{0};
};

// Every subset, filtered by the same agreement predicate.
std::optional<Pick> brute_force(const std::vector<double>& s, std::size_t c, double tol)
{
  std::optional<Pick> best;
  for (std::uint32_t mask = 1; mask < (1u << s.size()); ++mask)
  {
    double lo = 2, hi = -1, sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
      if (mask & (1u << i))
      {
        lo = std::min(lo, s[i]);
        hi = std::max(hi, s[i]);
        sum += s[i];
        ++n;
      }
    }
    if (n < c + 1 || hi - lo > tol + kAgreementSlack)
    {
      continue;
    }
    Pick p{n, hi - lo, sum / static_cast<double>(n)};
    if (!best || p.size > best->size || (p.size == best->size && p.spread < best->spread - 1e-12) ||
        (p.size == best->size && std::abs(p.spread - best->spread) <= 1e-12 && p.mean < best->mean - 1e-12))
    {
      best = p;
    }
  }
  return best;
}

}  // namespace

TEST(Discover, FigureThree)
{
  auto g = figure_three();
  auto paths = discover_paths("s", "x", 2, g);
  std::vector<std::vector<DeviceId>> expected{{"a", "d"}, {"b"}, {"b", "f"}, {"c", "f"}};
  EXPECT_EQ(paths, expected);
}

TEST(Discover, DepthOneWithoutEvaluatorNeighbour)
{
  Graph g;
  g.link("s", "a");
  g.link("a", "e");
  g.evaluator("e");
  EXPECT_TRUE(discover_paths("s", "x", 1, g).empty());
}

TEST(Discover, AdjacentEvaluatorDepthOne)
{
  auto paths = discover_paths("s", "x", 1, figure_three());
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0], std::vector<DeviceId>{"b"});
}

TEST(Discover, ExcludedNodesNeverAppear)
{
  auto g = figure_three();
  auto paths = discover_paths("s", "x", 2, g, [](const DeviceId& n) { return n != "f"; });
  std::vector<std::vector<DeviceId>> expected{{"a", "d"}, {"b"}};
  EXPECT_EQ(paths, expected);
}

TEST(Discover, RandomGraphsAcyclicAndBounded)
{
  Rng rng(12);
  for (int round = 0; round < 100; ++round)
  {
    Graph g;
    std::size_t n = rng.uniform_int(3, 10);
    std::vector<DeviceId> ids;
    for (std::size_t i = 0; i < n; ++i)
    {
      ids.push_back("n" + std::to_string(i));
    }
    ids.push_back("s");
    ids.push_back("x");
    for (std::size_t i = 0; i < ids.size(); ++i)
    {
      for (std::size_t j = i + 1; j < ids.size(); ++j)
      {
        if (rng.bernoulli(0.35))
        {
          g.link(ids[i], ids[j]);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i)
    {
      if (rng.bernoulli(0.4))
      {
        g.evaluator(ids[i]);
      }
    }
    std::size_t depth = rng.uniform_int(1, 4);
    std::set<DeviceId> banned{ids[0]};
    auto paths = discover_paths("s", "x", depth, g, [&](const DeviceId& d) { return !banned.count(d); });
    for (const auto& p : paths)
    {
      EXPECT_LE(p.size(), depth);
      EXPECT_EQ(std::set<DeviceId>(p.begin(), p.end()).size(), p.size());
      EXPECT_TRUE(g.is_evaluator(p.back(), "x"));
      for (const auto& node : p)
      {
        EXPECT_NE(node, "s");
        EXPECT_NE(node, "x");
        EXPECT_FALSE(banned.count(node));
      }
      auto first = g.neighbors("s");
      EXPECT_TRUE(std::find(first.begin(), first.end(), p[0]) != first.end());
      for (std::size_t k = 1; k < p.size(); ++k)
      {
        auto nb = g.neighbors(p[k - 1]);
        EXPECT_TRUE(std::find(nb.begin(), nb.end(), p[k]) != nb.end());
      }
    }
  }
}

TEST(ConsensusSet, ThreePaths)
{
  std::vector<double> s{0.90, 0.91, 0.40};
  auto cs = find_consensus_set(s, 1, 0.05);
  ASSERT_TRUE(cs);
  EXPECT_EQ(*cs, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(trustworthiness(s, *cs), 0.905, 1e-12);
}

TEST(ConsensusSet, AllEqual)
{
  std::vector<double> s(5, 0.7);
  auto cs = find_consensus_set(s, 1, 0.1);
  ASSERT_TRUE(cs);
  EXPECT_EQ(cs->size(), 5u);
  EXPECT_DOUBLE_EQ(trustworthiness(s, *cs), 0.7);
}

TEST(ConsensusSet, TooFewAgreeing)
{
  std::vector<double> s{0.9, 0.9, 0.1};
  EXPECT_FALSE(find_consensus_set(s, 2, 0.1));
  EXPECT_FALSE(find_consensus_set({}, 0, 0.1));
}

TEST(ConsensusSet, ExactToleranceOnGridAgrees)
{
  std::vector<double> s{0.8, 0.9};
  EXPECT_TRUE(find_consensus_set(s, 1, 0.1));
}

TEST(ConsensusSet, TieBreaks)
{
  // Two pairs of equal size; the tighter pair wins.
  std::vector<double> a{0.1, 0.15, 0.6, 0.62};
  EXPECT_EQ(*find_consensus_set(a, 1, 0.1), (std::vector<std::size_t>{2, 3}));
  // Equal spread; the lower mean wins.
  std::vector<double> b{0.7, 0.75, 0.2, 0.25};
  EXPECT_EQ(*find_consensus_set(b, 1, 0.1), (std::vector<std::size_t>{2, 3}));
}

TEST(ConsensusSet, MatchesSubsetScan)
{
  Rng rng(2024);
  for (int round = 0; round < 3000; ++round)
  {
    std::size_t n = rng.uniform_int(0, 12);
    std::vector<double> s;
    bool grid = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i)
    {
      s.push_back(grid ? static_cast<double>(rng.uniform_int(0, 20)) * 0.05 : rng.uniform01());
    }
    std::size_t c = rng.uniform_int(0, 3);
    double tol = grid ? 0.05 * static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform(0.0, 0.3);
    auto got = find_consensus_set(s, c, tol);
    auto want = brute_force(s, c, tol);
    ASSERT_EQ(got.has_value(), want.has_value()) << round;
    if (!got)
    {
      continue;
    }
    double lo = 2, hi = -1;
    for (auto i : *got)
    {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    EXPECT_TRUE(std::is_sorted(got->begin(), got->end()));
    EXPECT_EQ(got->size(), want->size);
    EXPECT_NEAR(hi - lo, want->spread, 1e-12);
    EXPECT_NEAR(trustworthiness(s, *got), want->mean, 1e-12);
  }
}

TEST(ConsensusSet, MinorityCannotMoveTrustBeyondTolerance)
{
  // c adversarial scores swept over the grid against c + 1 honest scores at 0.9.
  const double tol = 0.1;
  for (std::size_t c = 1; c <= 2; ++c)
  {
    std::vector<double> honest(c + 1, 0.9);
    std::vector<std::size_t> idx(c, 0);
    while (true)
    {
      auto s = honest;
      for (auto k : idx)
      {
        s.push_back(static_cast<double>(k) * 0.05);
      }
      auto cs = find_consensus_set(s, c, tol);
      ASSERT_TRUE(cs);
      double t = trustworthiness(s, *cs);
      EXPECT_LE(std::abs(t - 0.9), tol + 1e-9);
      bool all_far = std::all_of(idx.begin(), idx.end(), [](auto k) { return std::abs(k * 0.05 - 0.9) > 0.1 + 1e-9; });
      if (all_far)
      {
        EXPECT_DOUBLE_EQ(t, 0.9);
      }
      std::size_t pos = 0;
      while (pos < c && ++idx[pos] > 20)
      {
        idx[pos++] = 0;
      }
      if (pos == c)
      {
        break;
      }
    }
  }
}

TEST(DeltaRl, ConsensusOnlyNode)
{
  std::vector<ScoredPath> p{{{"y", "e1"}, 0.9}, {{"y", "e2"}, 0.9}};
  auto d = compute_delta_rl(p, std::vector<std::size_t>{0, 1}, 0.9, 0.5);
  EXPECT_DOUBLE_EQ(d.at("y"), 1.0);
}

TEST(DeltaRl, DisagreeingOnlyNode)
{
  std::vector<ScoredPath> p{{{"e1"}, 0.9}, {{"e2"}, 0.9}, {{"z"}, 0.4}};
  auto d = compute_delta_rl(p, std::vector<std::size_t>{0, 1}, 0.9, 0.5);
  EXPECT_NEAR(d.at("z"), -0.5, 1e-12);
  EXPECT_DOUBLE_EQ(d.at("e1"), 0.5);
}

TEST(DeltaRl, Balancing)
{
  std::vector<ScoredPath> p{{{"y", "e1"}, 0.9}, {{"e2"}, 0.9}, {{"y", "z"}, 0.6}};
  auto d = compute_delta_rl(p, std::vector<std::size_t>{0, 1}, 0.9, 0.5);
  EXPECT_NEAR(d.at("y"), 0.2, 1e-12);
  EXPECT_NEAR(d.at("z"), -0.3, 1e-12);
}

TEST(DeltaRl, ClampLowerBound)
{
  Rng rng(6);
  for (int round = 0; round < 500; ++round)
  {
    std::vector<ScoredPath> p;
    std::vector<std::size_t> cs;
    std::size_t n_c = rng.uniform_int(1, 4);
    std::size_t n_d = rng.uniform_int(0, 4);
    for (std::size_t i = 0; i < n_c; ++i)
    {
      p.push_back({{"y", "c" + std::to_string(i)}, 0.5});
      cs.push_back(i);
    }
    for (std::size_t i = 0; i < n_d; ++i)
    {
      // Bias can exceed one only outside [0, 1]; the clamp must hold regardless.
      p.push_back({{"y", "d" + std::to_string(i)}, rng.uniform(-2.0, 3.0)});
    }
    double gamma = rng.uniform(0.0, 1.0);
    auto d = compute_delta_rl(p, cs, 0.5, gamma);
    EXPECT_GE(d.at("y"), gamma * n_c - static_cast<double>(n_d) - 1e-12);
  }
}

TEST(DeltaRl, NodesOutsidePathsHaveNoEntry)
{
  std::vector<ScoredPath> p{{{"a"}, 0.5}, {{"b"}, 0.5}};
  auto d = compute_delta_rl(p, std::vector<std::size_t>{0, 1}, 0.5, 0.5);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_FALSE(d.count("c"));
}

TEST(Outcome, Json)
{
  ConsensusOutcome o;
  o.target = "t";
  auto doc = outcome_to_json(o);
  EXPECT_TRUE(doc["no_consensus"].get<bool>());
  EXPECT_TRUE(doc["trustworthiness"].is_null());
}

TEST(ConsensusSet, RepeatedScoreAveragesExactly)
{
  Rng rng(41);
  for (int i = 0; i < 20000; ++i)
  {
    double t = rng.uniform01();
    for (std::size_t n = 1; n <= 8; ++n)
    {
      std::vector<double> s(n, t);
      std::vector<std::size_t> members(n);
      std::iota(members.begin(), members.end(), 0);
      ASSERT_EQ(trustworthiness(s, members), t) << n;
    }
  }
}
