#include "iottrust/ledger.hpp"

#include <algorithm>
#include <cmath>

namespace iottrust::ledger {

using nlohmann::json;

json params_to_json(const LedgerParams& p)
{
  return json{{"c", p.c},
              {"tol", p.tol},
              {"gamma", p.gamma},
              {"c_th", p.c_th},
              {"r_default", p.r_default},
              {"r_init_new", p.r_init_new},
              {"t_ban", p.t_ban},
              {"q", p.q}};
}

LedgerParams params_from_json(const json& doc)
{
  LedgerParams p;
  p.c = doc.at("c").get<std::size_t>();
  p.tol = doc.at("tol").get<double>();
  p.gamma = doc.at("gamma").get<double>();
  p.c_th = doc.at("c_th").get<double>();
  p.r_default = doc.at("r_default").get<double>();
  p.r_init_new = doc.at("r_init_new").get<double>();
  p.t_ban = doc.at("t_ban").get<LogicalTime>();
  p.q = doc.at("q").get<std::size_t>();
  return p;
}

HashChain::HashChain(Bytes seed, std::size_t q)
  : cursor_(q)
{
  if (q < 1)
  {
    throw ContractError("hash chain length must be at least 1");
  }
  elements_.reserve(q + 1);
  // element 0 is the seed itself when it is 32 bytes; otherwise its digest
  Digest first{};
  if (seed.size() == first.size())
  {
    std::copy(seed.begin(), seed.end(), first.begin());
  }
  else
  {
    first = sha256(seed);
  }
  elements_.push_back(first);
  for (std::size_t i = 1; i <= q; ++i)
  {
    elements_.push_back(sha256(elements_.back()));
  }
}

std::optional<Digest> HashChain::reveal()
{
  if (cursor_ == 0)
  {
    return std::nullopt;
  }
  --cursor_;
  return elements_[cursor_];
}

std::string_view to_string(NonceCheck check)
{
  switch (check)
  {
    case NonceCheck::ok:
      return "ok";
    case NonceCheck::mismatch:
      return "mismatch";
    case NonceCheck::exhausted:
      return "exhausted";
  }
  return "unknown";
}

NonceCheck verify_nonce(NodeRecord& record, const Digest& revealed)
{
  if (record.chain_index == 0)
  {
    return NonceCheck::exhausted;
  }
  if (sha256(revealed) != record.chain_head)
  {
    return NonceCheck::mismatch;
  }
  record.chain_head = revealed;
  --record.chain_index;
  return NonceCheck::ok;
}

std::string encode_block(const Block& block)
{
  json doc = {{"height", block.height},
              {"prev", to_hex(block.prev)},
              {"payload", block.payload},
              {"digest", to_hex(block.digest)}};
  return doc.dump();
}

namespace {

Digest block_digest(const Digest& prev, const json& payload)
{
  auto body = payload.dump();
  return sha256_concat(prev, std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

LogicalTime add_saturating(LogicalTime a, LogicalTime b)
{
  return a > kForever - b ? kForever : a + b;
}

json optional_time(const std::optional<LogicalTime>& t)
{
  return t ? json(*t) : json(nullptr);
}

}  // namespace

json transaction_to_json(const consensus::PathTransaction& tx)
{
  json paths = json::array();
  for (const auto& p : tx.paths)
  {
    json nonces = json::array();
    for (const auto& n : p.nonces)
    {
      nonces.push_back(to_hex(n));
    }
    paths.push_back(json{{"nodes", p.nodes}, {"nonces", nonces}, {"tau", p.tau}});
  }
  return json{{"submitter", tx.submitter}, {"target", tx.target}, {"time", tx.logical_time}, {"paths", paths}};
}

consensus::PathTransaction transaction_from_json(const json& doc)
{
  consensus::PathTransaction tx;
  tx.submitter = doc.at("submitter").get<std::string>();
  tx.target = doc.at("target").get<std::string>();
  tx.logical_time = doc.at("time").get<LogicalTime>();
  for (const auto& p : doc.at("paths"))
  {
    consensus::PathReport r;
    r.nodes = p.at("nodes").get<std::vector<DeviceId>>();
    for (const auto& n : p.at("nonces"))
    {
      r.nonces.push_back(digest_from_hex(n.get<std::string>()));
    }
    r.tau = p.at("tau").get<double>();
    tx.paths.push_back(std::move(r));
  }
  return tx;
}

Ledger::Ledger(LedgerParams params)
  : params_(params)
{
  if (!(params_.c_th >= 0.0) || !(params_.tol >= 0.0) || !(params_.gamma >= 0.0))
  {
    throw ConfigError("ledger parameters must be non-negative");
  }
  append(json{{"type", "genesis"}, {"params", params_to_json(params_)}});
}

void Ledger::append(json payload)
{
  Block b;
  b.height = blocks_.size();
  b.prev = blocks_.empty() ? Digest{} : blocks_.back().digest;
  b.payload = std::move(payload);
  b.digest = block_digest(b.prev, b.payload);
  blocks_.push_back(std::move(b));
}

const NodeRecord& Ledger::register_node(const DeviceId& id, const Digest& chain_head, std::size_t q,
                                        LogicalTime now)
{
  if (contains(id))
  {
    throw ContractError("node '" + id + "' already registered");
  }
  if (q < 1)
  {
    throw ContractError("hash chain length must be at least 1");
  }
  NodeRecord rec{id, chain_head, q, params_.r_init_new, add_saturating(now, params_.t_ban)};
  auto& stored = records_.emplace(id, rec).first->second;
  append(json{{"type", "register"},
              {"id", id},
              {"head", to_hex(chain_head)},
              {"q", q},
              {"time", now},
              {"reliability", rec.reliability},
              {"banned_until", optional_time(rec.banned_until)}});
  return stored;
}

const NodeRecord& Ledger::record(const DeviceId& id) const
{
  auto it = records_.find(id);
  if (it == records_.end())
  {
    throw ContractError("unknown node '" + id + "'");
  }
  return it->second;
}

double Ledger::query_reliability(const DeviceId& id, LogicalTime now) const
{
  const auto& rec = record(id);
  if (rec.banned_until && now >= *rec.banned_until)
  {
    return params_.r_default;
  }
  return rec.reliability;
}

bool Ledger::engaged(const DeviceId& id, LogicalTime now) const
{
  return contains(id) && query_reliability(id, now) >= params_.c_th;
}

std::vector<Digest> Ledger::revealed_nonces(const DeviceId& id) const
{
  auto it = revealed_.find(id);
  return it == revealed_.end() ? std::vector<Digest>{} : it->second;
}

json Ledger::restore_expired(LogicalTime now)
{
  json restored = json::object();
  for (auto& [id, rec] : records_)
  {
    if (rec.banned_until && now >= *rec.banned_until)
    {
      rec.reliability = params_.r_default;
      rec.banned_until.reset();
      restored[id] = rec.reliability;
    }
  }
  return restored;
}

consensus::ConsensusOutcome Ledger::execute_sm(const consensus::PathTransaction& tx)
{
  for (const auto& p : tx.paths)
  {
    if (p.nodes.empty() || p.nonces.size() != p.nodes.size())
    {
      throw ContractError("path must carry one nonce per node");
    }
    std::set<DeviceId> seen(p.nodes.begin(), p.nodes.end());
    if (seen.size() != p.nodes.size())
    {
      throw ContractError("path contains a repeated node");
    }
    if (!(p.tau >= 0.0 && p.tau <= 1.0))
    {
      throw ContractError("trust score outside [0, 1]");
    }
  }

  json restored = restore_expired(tx.logical_time);

  consensus::ConsensusOutcome outcome;
  outcome.target = tx.target;

  // Nonces, in transaction order. A node on several paths reveals
  // consecutive chain elements, each linked to the one accepted before it.
  json path_status = json::array();
  std::vector<std::size_t> surviving;
  json heads = json::object();
  for (std::size_t i = 0; i < tx.paths.size(); ++i)
  {
    const auto& p = tx.paths[i];
    json failures = json::array();
    for (std::size_t k = 0; k < p.nodes.size(); ++k)
    {
      auto it = records_.find(p.nodes[k]);
      if (it == records_.end())
      {
        failures.push_back(json{{"node", p.nodes[k]}, {"reason", "unregistered"}});
        continue;
      }
      auto check = verify_nonce(it->second, p.nonces[k]);
      if (check != NonceCheck::ok)
      {
        failures.push_back(json{{"node", p.nodes[k]}, {"reason", to_string(check)}});
        continue;
      }
      used_nonces_.insert(p.nonces[k]);
      revealed_[p.nodes[k]].push_back(p.nonces[k]);
      heads[p.nodes[k]] = to_hex(p.nonces[k]);
    }
    if (failures.empty())
    {
      surviving.push_back(i);
    }
    else
    {
      outcome.voided.push_back(i);
    }
    path_status.push_back(json{{"void", !failures.empty()}, {"failures", failures}});
  }

  // Consensus over surviving paths only.
  std::vector<double> scores;
  std::vector<consensus::ScoredPath> scored;
  for (auto i : surviving)
  {
    scores.push_back(tx.paths[i].tau);
    scored.push_back({tx.paths[i].nodes, tx.paths[i].tau});
  }
  json updates = json::object();
  auto cs = consensus::find_consensus_set(scores, params_.c, params_.tol);
  if (cs)
  {
    double trust = consensus::trustworthiness(scores, *cs);
    outcome.no_consensus = false;
    outcome.trustworthiness = trust;
    for (auto local : *cs)
    {
      outcome.consensus_set.push_back(surviving[local]);
    }
    outcome.delta_rl = consensus::compute_delta_rl(scored, *cs, trust, params_.gamma);
    for (const auto& [id, delta] : outcome.delta_rl)
    {
      if (delta >= 0.0)
      {
        continue;
      }
      auto& rec = records_.at(id);
      rec.reliability = std::max(0.0, rec.reliability - std::abs(delta));
      if (rec.reliability < params_.c_th && !rec.banned_until)
      {
        rec.banned_until = add_saturating(tx.logical_time, params_.t_ban);
      }
      updates[id] = json{{"reliability", rec.reliability}, {"banned_until", optional_time(rec.banned_until)}};
    }
  }

  // Result block
  json result = consensus::outcome_to_json(outcome);
  append(json{{"type", "sm"},
              {"tx", transaction_to_json(tx)},
              {"restored", restored},
              {"paths", path_status},
              {"result", result},
              {"updates", updates},
              {"heads", heads}});
  return outcome;
}

std::string Ledger::dump() const
{
  std::string out;
  for (const auto& b : blocks_)
  {
    out += encode_block(b);
    out += '\n';
  }
  return out;
}

namespace {

std::optional<std::vector<Block>> parse_dump(std::string_view dump)
{
  if (dump.empty() || dump.back() != '\n')
  {
    return std::nullopt;
  }
  std::vector<Block> blocks;
  std::size_t start = 0;
  while (start < dump.size())
  {
    auto end = dump.find('\n', start);
    auto line = dump.substr(start, end - start);
    start = end + 1;
    try
    {
      auto doc = json::parse(line);
      if (!doc.is_object() || doc.size() != 4)
      {
        return std::nullopt;
      }
      Block b;
      b.height = doc.at("height").get<std::uint64_t>();
      b.prev = digest_from_hex(doc.at("prev").get<std::string>());
      b.payload = doc.at("payload");
      b.digest = digest_from_hex(doc.at("digest").get<std::string>());
      if (encode_block(b) != line)
      {
        return std::nullopt;
      }
      blocks.push_back(std::move(b));
    }
    catch (const json::exception&)
    {
      return std::nullopt;
    }
    catch (const DecodeError&)
    {
      return std::nullopt;
    }
  }
  return blocks;
}

}  // namespace

bool verify_blocks(const std::vector<Block>& blocks)
{
  if (blocks.empty())
  {
    return false;
  }
  Digest prev{};
  for (std::size_t i = 0; i < blocks.size(); ++i)
  {
    const auto& b = blocks[i];
    if (b.height != i || b.prev != prev || b.digest != block_digest(b.prev, b.payload))
    {
      return false;
    }
    prev = b.digest;
  }
  return true;
}

bool verify_ledger(std::string_view dump)
{
  auto blocks = parse_dump(dump);
  return blocks && verify_blocks(*blocks);
}

Ledger Ledger::replay(std::string_view dump)
{
  auto blocks = parse_dump(dump);
  if (!blocks || !verify_blocks(*blocks))
  {
    throw DecodeError("ledger dump failed verification");
  }
  try
  {
    const auto& genesis = blocks->front().payload;
    if (genesis.at("type") != "genesis")
    {
      throw DecodeError("first block is not a genesis block");
    }
    Ledger ledger(params_from_json(genesis.at("params")));
    for (std::size_t i = 1; i < blocks->size(); ++i)
    {
      const auto& p = (*blocks)[i].payload;
      auto type = p.at("type").get<std::string>();
      if (type == "register")
      {
        ledger.register_node(p.at("id").get<std::string>(), digest_from_hex(p.at("head").get<std::string>()),
                             p.at("q").get<std::size_t>(), p.at("time").get<LogicalTime>());
      }
      else if (type == "sm")
      {
        ledger.execute_sm(transaction_from_json(p.at("tx")));
      }
      else
      {
        throw DecodeError("unknown block type '" + type + "'");
      }
      if (ledger.blocks().back().digest != (*blocks)[i].digest)
      {
        throw DecodeError("re-execution diverges at height " + std::to_string(i));
      }
    }
    return ledger;
  }
  catch (const json::exception& e)
  {
    throw DecodeError(std::string("malformed block payload: ") + e.what());
  }
  catch (const ContractError& e)
  {
    throw DecodeError(std::string("block rejected on replay: ") + e.what());
  }
}

}  // namespace iottrust::ledger
