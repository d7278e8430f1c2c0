#include "iottrust/sim.hpp"

#include "iottrust/anomaly.hpp"
#include "iottrust/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <sstream>

namespace iottrust::sim {

using nlohmann::json;
using delegation::DeviceClass;

AttackType parse_attack_type(std::string_view name)
{
  static const std::pair<std::string_view, AttackType> kNames[] = {
    {"behavior_swap", AttackType::behavior_swap},
    {"self_promote", AttackType::self_promote},
    {"slander", AttackType::slander},
    {"ballot_stuff", AttackType::ballot_stuff},
    {"path_forge_replay", AttackType::path_forge_replay},
    {"dos_flood", AttackType::dos_flood},
  };
  for (const auto& [n, t] : kNames)
  {
    if (n == name)
    {
      return t;
    }
  }
  throw ConfigError("unknown attack type '" + std::string(name) + "'");
}

std::string_view to_string(AttackType t)
{
  switch (t)
  {
    case AttackType::behavior_swap:
      return "behavior_swap";
    case AttackType::self_promote:
      return "self_promote";
    case AttackType::slander:
      return "slander";
    case AttackType::ballot_stuff:
      return "ballot_stuff";
    case AttackType::path_forge_replay:
      return "path_forge_replay";
    case AttackType::dos_flood:
      return "dos_flood";
  }
  return "unknown";
}

double CostTable::train_epoch_s(DeviceClass c) const
{
  return c == DeviceClass::basic ? train_epoch_s_bd : c == DeviceClass::capable ? train_epoch_s_cd : train_epoch_s_pd;
}

double CostTable::predict_ms(DeviceClass c) const
{
  return c == DeviceClass::basic ? predict_ms_bd : c == DeviceClass::capable ? predict_ms_cd : predict_ms_pd;
}

namespace {

bool traffic_attack(AttackType t)
{
  return t == AttackType::behavior_swap || t == AttackType::dos_flood;
}

double default_forged_tau(AttackType t)
{
  return t == AttackType::self_promote ? 1.0 : 0.0;
}

PayloadKind parse_payload(const std::string& s)
{
  if (s == "none")
  {
    return PayloadKind::none;
  }
  if (s == "numeric")
  {
    return PayloadKind::numeric;
  }
  if (s == "categorical")
  {
    return PayloadKind::categorical;
  }
  throw ConfigError("unknown payload kind '" + s + "'");
}

std::string_view to_string(PayloadKind p)
{
  return p == PayloadKind::none ? "none" : p == PayloadKind::numeric ? "numeric" : "categorical";
}

template <class T>
T opt(const json& j, const char* key, T fallback, const std::string& where)
{
  if (!j.is_object() || !j.contains(key))
  {
    return fallback;
  }
  try
  {
    return j.at(key).get<T>();
  }
  catch (const json::exception&)
  {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T req(const json& j, const char* key, const std::string& where)
{
  if (!j.is_object() || !j.contains(key))
  {
    throw ConfigError(where + "." + key + ": missing");
  }
  return opt<T>(j, key, T{}, where);
}

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string fmt_opt(const std::optional<T>& v)
{
  if (!v)
  {
    return "";
  }
  if constexpr (std::is_floating_point_v<T>)
  {
    return fmt(*v);
  }
  else
  {
    return std::to_string(*v);
  }
}

}  // namespace

Scenario scenario_from_json(const json& doc)
{
  if (!doc.is_object())
  {
    throw ConfigError("scenario must be a JSON object");
  }
  Scenario s;
  s.name = opt<std::string>(doc, "name", s.name, "scenario");
  s.seed = opt<std::uint64_t>(doc, "seed", 0, "scenario");
  if (!doc.contains("devices") || !doc.at("devices").is_array())
  {
    throw ConfigError("scenario.devices: missing");
  }
  for (std::size_t i = 0; i < doc.at("devices").size(); ++i)
  {
    const auto& d = doc.at("devices")[i];
    std::string where = "devices[" + std::to_string(i) + "]";
    DeviceSpec spec;
    spec.id = req<std::string>(d, "id", where);
    spec.device_class = delegation::parse_device_class(opt<std::string>(d, "class", "CD", where));
    spec.accept_probability = opt<double>(d, "accept_probability", 1.0, where);
    spec.max_sessions = opt<std::size_t>(d, "max_sessions", spec.max_sessions, where);
    s.devices.push_back(spec);
  }
  for (const auto& l : doc.value("links", json::array()))
  {
    if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string())
    {
      throw ConfigError("links: each link must be a pair of device ids");
    }
    s.links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>());
  }
  const auto flows = doc.value("flows", json::array());
  for (std::size_t i = 0; i < flows.size(); ++i)
  {
    const auto& f = flows[i];
    std::string where = "flows[" + std::to_string(i) + "]";
    FlowSpec spec;
    spec.src = req<std::string>(f, "src", where);
    spec.dst = req<std::string>(f, "dst", where);
    spec.period = opt<std::size_t>(f, "period", spec.period, where);
    spec.payload = parse_payload(opt<std::string>(f, "payload", "none", where));
    spec.traffic.noise = opt<double>(f, "noise", spec.traffic.noise, where);
    spec.traffic.burst_packets = opt<std::size_t>(f, "burst_packets", spec.traffic.burst_packets, where);
    spec.traffic.burst_gap = opt<double>(f, "burst_gap", spec.traffic.burst_gap, where);
    spec.traffic.quant.range_low = opt<double>(f, "payload_low", spec.traffic.quant.range_low, where);
    spec.traffic.quant.range_high = opt<double>(f, "payload_high", spec.traffic.quant.range_high, where);
    spec.traffic.quant.hop = opt<double>(f, "payload_hop", spec.traffic.quant.hop, where);
    spec.traffic.categories = opt<std::vector<std::string>>(f, "categories", spec.traffic.categories, where);
    spec.traffic.stability_min = opt<std::size_t>(f, "stability_min", spec.traffic.stability_min, where);
    spec.traffic.stability_max = opt<std::size_t>(f, "stability_max", spec.traffic.stability_max, where);
    s.flows.push_back(spec);
  }
  s.safe_period = req<double>(doc, "safe_period", "scenario");
  s.duration = req<double>(doc, "duration", "scenario");
  s.tau_split = opt<double>(doc, "tau_split", s.tau_split, "scenario");

  const json proto = doc.value("protocol", json::object());
  auto& p = s.protocol;
  auto& lp = p.ledger;
  lp.c = opt<std::size_t>(proto, "c", lp.c, "protocol");
  lp.tol = opt<double>(proto, "tol", lp.tol, "protocol");
  lp.gamma = opt<double>(proto, "gamma", lp.gamma, "protocol");
  lp.c_th = opt<double>(proto, "c_th", lp.c_th, "protocol");
  lp.r_default = opt<double>(proto, "r_default", lp.r_default, "protocol");
  lp.r_init_new = opt<double>(proto, "r_init_new", lp.r_init_new, "protocol");
  lp.t_ban = opt<LogicalTime>(proto, "t_ban", lp.t_ban, "protocol");
  lp.q = opt<std::size_t>(proto, "q", lp.q, "protocol");
  p.k = opt<std::size_t>(proto, "k", p.k, "protocol");
  p.window = opt<std::size_t>(proto, "window", p.window, "protocol");
  p.window_size = opt<std::size_t>(proto, "window_size", p.window_size, "protocol");
  p.threshold = opt<double>(proto, "threshold", p.threshold, "protocol");
  p.sustain = opt<std::size_t>(proto, "sustain", p.sustain, "protocol");
  p.maximum_depth = opt<std::size_t>(proto, "maximum_depth", p.maximum_depth, "protocol");
  p.assess_every = opt<double>(proto, "assess_every", p.assess_every, "protocol");
  p.trust_threshold = opt<double>(proto, "trust_threshold", p.trust_threshold, "protocol");
  p.delegation_levels = opt<std::size_t>(proto, "delegation_levels", p.delegation_levels, "protocol");
  p.epochs = opt<std::size_t>(proto, "epochs", p.epochs, "protocol");
  p.model = predictor::parse_model_kind(opt<std::string>(proto, "model", "ngram", "protocol"));
  p.false_positive_budget = opt<double>(proto, "false_positive_budget", p.false_positive_budget, "protocol");

  const json costs = doc.value("costs", json::object());
  auto& c = s.costs;
  c.train_epoch_s_bd = opt<double>(costs, "train_epoch_s_bd", c.train_epoch_s_bd, "costs");
  c.train_epoch_s_cd = opt<double>(costs, "train_epoch_s_cd", c.train_epoch_s_cd, "costs");
  c.train_epoch_s_pd = opt<double>(costs, "train_epoch_s_pd", c.train_epoch_s_pd, "costs");
  c.predict_ms_bd = opt<double>(costs, "predict_ms_bd", c.predict_ms_bd, "costs");
  c.predict_ms_cd = opt<double>(costs, "predict_ms_cd", c.predict_ms_cd, "costs");
  c.predict_ms_pd = opt<double>(costs, "predict_ms_pd", c.predict_ms_pd, "costs");

  const auto attacks = doc.value("attacks", json::array());
  for (std::size_t i = 0; i < attacks.size(); ++i)
  {
    const auto& a = attacks[i];
    std::string where = "attacks[" + std::to_string(i) + "]";
    AttackSpec spec;
    spec.type = parse_attack_type(req<std::string>(a, "type", where));
    spec.attackers = req<std::vector<std::string>>(a, "attackers", where);
    spec.start = req<double>(a, "start", where);
    if (a.contains("end"))
    {
      spec.end = opt<double>(a, "end", 0.0, where);
    }
    spec.targets = opt<std::vector<std::string>>(a, "targets", {}, where);
    if (a.contains("tau"))
    {
      spec.tau = opt<double>(a, "tau", 0.0, where);
    }
    spec.rate = opt<double>(a, "rate", spec.rate, where);
    spec.silent = opt<bool>(a, "silent", false, where);
    spec.count = opt<std::size_t>(a, "count", spec.count, where);
    s.attacks.push_back(spec);
  }

  if (doc.contains("interests") && !(doc.at("interests").is_string() && doc.at("interests") == "auto"))
  {
    if (!doc.at("interests").is_array())
    {
      throw ConfigError("interests: expected \"auto\" or an array");
    }
    std::vector<Interest> list;
    for (std::size_t i = 0; i < doc.at("interests").size(); ++i)
    {
      const auto& it = doc.at("interests")[i];
      std::string where = "interests[" + std::to_string(i) + "]";
      list.push_back({req<std::string>(it, "source", where), req<std::string>(it, "target", where)});
    }
    s.interests = std::move(list);
  }
  validate(s);
  return s;
}

json scenario_to_json(const Scenario& s)
{
  json devices = json::array();
  for (const auto& d : s.devices)
  {
    devices.push_back(json{{"id", d.id},
                           {"class", std::string(delegation::to_string(d.device_class))},
                           {"accept_probability", d.accept_probability},
                           {"max_sessions", d.max_sessions}});
  }
  json links = json::array();
  for (const auto& [a, b] : s.links)
  {
    links.push_back(json::array({a, b}));
  }
  json flows = json::array();
  for (const auto& f : s.flows)
  {
    flows.push_back(json{{"src", f.src},
                         {"dst", f.dst},
                         {"period", f.period},
                         {"payload", std::string(to_string(f.payload))},
                         {"noise", f.traffic.noise},
                         {"burst_packets", f.traffic.burst_packets},
                         {"burst_gap", f.traffic.burst_gap},
                         {"payload_low", f.traffic.quant.range_low},
                         {"payload_high", f.traffic.quant.range_high},
                         {"payload_hop", f.traffic.quant.hop},
                         {"categories", f.traffic.categories},
                         {"stability_min", f.traffic.stability_min},
                         {"stability_max", f.traffic.stability_max}});
  }
  const auto& p = s.protocol;
  json proto = ledger::params_to_json(p.ledger);
  proto["k"] = p.k;
  proto["window"] = p.window;
  proto["window_size"] = p.window_size;
  proto["threshold"] = p.threshold;
  proto["sustain"] = p.sustain;
  proto["maximum_depth"] = p.maximum_depth;
  proto["assess_every"] = p.assess_every;
  proto["trust_threshold"] = p.trust_threshold;
  proto["delegation_levels"] = p.delegation_levels;
  proto["epochs"] = p.epochs;
  proto["model"] = std::string(predictor::to_string(p.model));
  proto["false_positive_budget"] = p.false_positive_budget;
  const auto& c = s.costs;
  json costs{{"train_epoch_s_bd", c.train_epoch_s_bd}, {"train_epoch_s_cd", c.train_epoch_s_cd},
             {"train_epoch_s_pd", c.train_epoch_s_pd}, {"predict_ms_bd", c.predict_ms_bd},
             {"predict_ms_cd", c.predict_ms_cd},       {"predict_ms_pd", c.predict_ms_pd}};
  json attacks = json::array();
  for (const auto& a : s.attacks)
  {
    json j{{"type", std::string(to_string(a.type))},
           {"attackers", a.attackers},
           {"start", a.start},
           {"targets", a.targets},
           {"rate", a.rate},
           {"silent", a.silent},
           {"count", a.count}};
    if (a.tau)
    {
      j["tau"] = *a.tau;
    }
    if (a.end)
    {
      j["end"] = *a.end;
    }
    attacks.push_back(j);
  }
  json interests = "auto";
  if (s.interests)
  {
    interests = json::array();
    for (const auto& i : *s.interests)
    {
      interests.push_back(json{{"source", i.source}, {"target", i.target}});
    }
  }
  return json{{"name", s.name},
              {"seed", s.seed},
              {"devices", devices},
              {"links", links},
              {"flows", flows},
              {"safe_period", s.safe_period},
              {"duration", s.duration},
              {"tau_split", s.tau_split},
              {"protocol", proto},
              {"costs", costs},
              {"attacks", attacks},
              {"interests", interests}};
}

void validate(const Scenario& s)
{
  std::set<DeviceId> ids;
  for (const auto& d : s.devices)
  {
    if (d.id.empty())
    {
      throw ConfigError("devices: empty id");
    }
    if (!ids.insert(d.id).second)
    {
      throw ConfigError("devices: duplicate id '" + d.id + "'");
    }
    if (!(d.accept_probability >= 0.0 && d.accept_probability <= 1.0))
    {
      throw ConfigError("devices: accept_probability of '" + d.id + "' must lie in [0, 1]");
    }
  }
  auto known = [&](const DeviceId& id, const std::string& where) {
    if (!ids.count(id))
    {
      throw ConfigError(where + ": unknown device '" + id + "'");
    }
  };
  std::set<std::pair<DeviceId, DeviceId>> linked;
  for (const auto& [a, b] : s.links)
  {
    known(a, "links");
    known(b, "links");
    if (a == b)
    {
      throw ConfigError("links: self link on '" + a + "'");
    }
    linked.insert({a, b});
    linked.insert({b, a});
  }
  std::set<std::pair<DeviceId, DeviceId>> pairs;
  for (const auto& f : s.flows)
  {
    known(f.src, "flows");
    known(f.dst, "flows");
    if (!linked.count({f.src, f.dst}))
    {
      throw ConfigError("flows: '" + f.dst + "' is not a neighbour of '" + f.src + "'");
    }
    if (!pairs.insert({f.src, f.dst}).second)
    {
      throw ConfigError("flows: duplicate flow " + f.src + " -> " + f.dst);
    }
    if (f.period < 2)
    {
      throw ConfigError("flows: period must be at least 2");
    }
    if (!(f.traffic.noise >= 0.0 && f.traffic.noise < 1.0))
    {
      throw ConfigError("flows: noise must lie in [0, 1)");
    }
    if (f.traffic.burst_packets < 1 || !(f.traffic.burst_gap > 0.0))
    {
      throw ConfigError("flows: burst_packets and burst_gap must be positive");
    }
  }
  if (!(s.safe_period > 0.0) || !(s.duration > s.safe_period))
  {
    throw ConfigError("duration must exceed a positive safe_period");
  }
  if (!(s.tau_split > 0.0))
  {
    throw ConfigError("tau_split must be positive");
  }
  const auto& p = s.protocol;
  if (p.ledger.c < 1)
  {
    throw ConfigError("protocol.c must be at least 1");
  }
  if (!(p.ledger.tol >= 0.0) || !(p.ledger.gamma >= 0.0) || !(p.ledger.c_th >= 0.0 && p.ledger.c_th <= 1.0))
  {
    throw ConfigError("protocol: tol, gamma and c_th must be non-negative, c_th at most 1");
  }
  if (p.ledger.q < 1)
  {
    throw ConfigError("protocol.q must be positive");
  }
  if (p.k < 1 || p.window < 1 || p.window_size < p.window + 1)
  {
    throw ConfigError("protocol: k, window and window_size > window required");
  }
  if (!(p.threshold > 0.0 && p.threshold < 1.0))
  {
    throw ConfigError("protocol.threshold must lie in (0, 1)");
  }
  if (p.maximum_depth < 1 || !(p.assess_every > 0.0))
  {
    throw ConfigError("protocol: maximum_depth and assess_every must be positive");
  }
  for (const auto& a : s.attacks)
  {
    if (a.attackers.empty())
    {
      throw ConfigError("attacks: at least one attacker required");
    }
    for (const auto& id : a.attackers)
    {
      known(id, "attacks");
    }
    for (const auto& id : a.targets)
    {
      known(id, "attacks");
    }
    if (a.start < s.safe_period)
    {
      throw ConfigError("attacks: start " + fmt(a.start) + " lies inside the safe period");
    }
    if (a.end && !(*a.end > a.start))
    {
      throw ConfigError("attacks: end must follow start");
    }
    if (a.type == AttackType::dos_flood && !(a.rate > 0.0))
    {
      throw ConfigError("attacks: dos_flood rate must be positive");
    }
  }
  if (s.interests)
  {
    for (const auto& i : *s.interests)
    {
      known(i.source, "interests");
      known(i.target, "interests");
      if (i.source == i.target)
      {
        throw ConfigError("interests: a device cannot assess itself");
      }
    }
  }
}

std::size_t count_sm_increases(const ledger::Ledger& ledger)
{
  std::map<DeviceId, double> r;
  std::size_t increases = 0;
  for (const auto& b : ledger.blocks())
  {
    const auto& p = b.payload;
    const auto type = p.at("type").get<std::string>();
    if (type == "register")
    {
      r[p.at("id").get<std::string>()] = p.at("reliability").get<double>();
    }
    else if (type == "sm")
    {
      for (const auto& [id, v] : p.at("restored").items())
      {
        r[id] = v.get<double>();
      }
      for (const auto& [id, u] : p.at("updates").items())
      {
        double next = u.at("reliability").get<double>();
        if (next > r[id])
        {
          ++increases;
        }
        r[id] = next;
      }
    }
  }
  return increases;
}

namespace {

/// One evaluator's live view of one target.
struct Monitor
{
  std::size_t                         flow{0};
  DeviceId                            evaluator;
  DeviceId                            target;
  DeviceClass                         device_class{DeviceClass::capable};
  std::optional<DeviceId>             delegate;
  features::BinningProfile            profile;
  features::SymbolVocabulary          vocab;
  std::unique_ptr<features::FeatureStream> stream;
  std::optional<predictor::FingerprintModel> model;   // local training
  std::optional<delegation::HashedModel>     hashed;  // delegated training
  std::optional<delegation::Session>         session;

  std::deque<Symbol>                  context;
  std::deque<features::SymbolSequence> recent;
  std::deque<std::uint8_t>            misses;
  std::size_t                         miss_count{0};
  std::size_t                         window_index{0};
  std::size_t                         run{0};
  std::size_t                         received{0};

  bool                                attacked{false};
  std::size_t                         received_at_attack{0};
  std::optional<double>               alarm_time;
  std::optional<std::size_t>          alarm_packets;
  std::optional<std::size_t>          crossing_packets;
  std::optional<std::size_t>          attacker_packets_at_alarm;

  std::size_t                         cached_at{SIZE_MAX};
  std::optional<double>               cached_tau;

  const predictor::FingerprintModel& fingerprint() const { return model ? *model : hashed->model; }

  Symbol to_model_space(Symbol raw) const
  {
    if (model)
    {
      return raw;
    }
    auto d = session->hash(std::span<const Symbol>(&raw, 1));
    return hashed->vocabulary.find(d.front());
  }
};

enum class EventKind
{
  packet,
  train,
  attack,
  attack_end,
  assess,
};

struct Event
{
  double      time{0.0};
  std::uint64_t seq{0};
  EventKind   kind{EventKind::packet};
  std::size_t index{0};
  std::uint64_t epoch{0};

  bool operator>(const Event& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
};

class Simulation : public consensus::NetworkView, public consensus::Participants
{
public:
  explicit Simulation(const Scenario& s)
    : s_(s)
    , rng_(s.seed)
    , ledger_(s.protocol.ledger)
  {
    validate(s_);
    for (const auto& d : s_.devices)
    {
      classes_[d.id] = d.device_class;
      accept_[d.id] = d.accept_probability;
      max_sessions_[d.id] = d.max_sessions;
      adjacency_[d.id];
      packets_sent_[d.id] = 0;
    }
    for (const auto& [a, b] : s_.links)
    {
      adjacency_[a].insert(b);
      adjacency_[b].insert(a);
    }
    std::size_t i = 0;
    for (const auto& d : s_.devices)
    {
      auto seed_rng = rng_.split("chain").split(i++);
      Bytes seed(32);
      for (auto& byte : seed)
      {
        byte = static_cast<std::uint8_t>(seed_rng.next_u64());
      }
      auto [it, _] = chains_.emplace(d.id, ledger::HashChain(seed, s_.protocol.ledger.q));
      ledger_.register_node(d.id, it->second.head(), s_.protocol.ledger.q, 0);
    }
    for (const auto& d : s_.devices)
    {
      if (d.device_class == DeviceClass::powerful)
      {
        delegates_.emplace(d.id, std::make_unique<delegation::Delegate>(d.id, store_, &wire_));
      }
    }
    for (std::size_t f = 0; f < s_.flows.size(); ++f)
    {
      const auto& spec = s_.flows[f];
      auto frng = rng_.split("flow").split(f);
      auto tmpl_rng = frng.split("template");
      auto tmpl = make_template(tmpl_rng, spec.period, TemplateStyle::benign, spec.payload);
      double start = frng.split("start").uniform(0.0, 5.0);
      generators_.push_back(
        std::make_unique<TrafficGenerator>(spec.src, spec.dst, tmpl, spec.traffic, frng.split("traffic"), start));
      benign_.push_back(tmpl);
      epochs_.push_back(0);
      safe_packets_.emplace_back();
      flow_monitor_.push_back(SIZE_MAX);
    }
  }

  RunReport run();

  // NetworkView
  std::vector<DeviceId> neighbors(const DeviceId& node) const override
  {
    auto it = adjacency_.find(node);
    return it == adjacency_.end() ? std::vector<DeviceId>{} : std::vector<DeviceId>(it->second.begin(), it->second.end());
  }

  bool is_evaluator(const DeviceId& node, const DeviceId& target) const override
  {
    return monitor_index_.count({node, target}) != 0;
  }

  // Participants
  Digest next_nonce(const DeviceId& node) override
  {
    auto v = chains_.at(node).reveal();
    return v ? *v : Digest{};
  }

  std::optional<double> evaluate(const DeviceId& evaluator, const DeviceId& target) override
  {
    for (const auto& a : s_.attacks)
    {
      if ((a.type == AttackType::self_promote || a.type == AttackType::ballot_stuff) && active(a) &&
          involves(a, evaluator, target))
      {
        if (a.silent)
        {
          return std::nullopt;
        }
        return a.tau.value_or(default_forged_tau(a.type));
      }
    }
    auto it = monitor_index_.find({evaluator, target});
    if (it == monitor_index_.end())
    {
      return std::nullopt;
    }
    return trust(*monitors_[it->second]);
  }

  double relay(const DeviceId& node, const DeviceId& target, double tau) override
  {
    for (const auto& a : s_.attacks)
    {
      if (a.type == AttackType::slander && active(a) && involves(a, node, target))
      {
        return a.tau.value_or(default_forged_tau(a.type));
      }
    }
    return tau;
  }

private:
  bool active(const AttackSpec& a) const { return now_ >= a.start && (!a.end || now_ < *a.end); }

  static bool involves(const AttackSpec& a, const DeviceId& attacker, const DeviceId& target)
  {
    return std::find(a.attackers.begin(), a.attackers.end(), attacker) != a.attackers.end() &&
           (a.targets.empty() || std::find(a.targets.begin(), a.targets.end(), target) != a.targets.end());
  }

  void push(double time, EventKind kind, std::size_t index, std::uint64_t epoch = 0)
  {
    queue_.push(Event{time, seq_++, kind, index, epoch});
  }

  std::optional<double> trust(Monitor& m)
  {
    if (m.cached_at == m.received)
    {
      return m.cached_tau;
    }
    m.cached_at = m.received;
    std::vector<features::SymbolSequence> seqs(m.recent.begin(), m.recent.end());
    try
    {
      auto score = anomaly::trust_score(m.fingerprint(), seqs, s_.protocol.k, s_.protocol.window_size, m.evaluator,
                                        m.target);
      m.cached_tau = score.value;
      for (const auto& seq : seqs)
      {
        if (seq.symbols.size() > m.fingerprint().window())
        {
          charge_prediction(m.evaluator, seq.symbols.size() - m.fingerprint().window());
        }
      }
    }
    catch (const ContractError&)
    {
      m.cached_tau = std::nullopt;
    }
    return m.cached_tau;
  }

  void charge_prediction(const DeviceId& device, std::size_t n)
  {
    auto& row = cost_row(device);
    row.predictions += n;
    row.predict_seconds += static_cast<double>(n) * s_.costs.predict_ms(classes_.at(device)) / 1000.0;
  }

  CostRow& cost_row(const DeviceId& device)
  {
    auto [it, inserted] = costs_.try_emplace(device);
    if (inserted)
    {
      it->second.device = device;
      it->second.device_class = classes_.at(device);
    }
    return it->second;
  }

  void on_packet(std::size_t f, const trace::Packet& p);
  void on_train();
  void on_attack(std::size_t a);
  void on_attack_end(std::size_t a);
  void on_assess(std::size_t i);
  void observe(Monitor& m, const trace::Packet& p);
  void record_reliability();
  std::vector<consensus::PathReport> forged_paths(const DeviceId& source, const DeviceId& target);

  const Scenario&                                     s_;
  Rng                                                 rng_;
  ledger::Ledger                                      ledger_;
  std::map<DeviceId, DeviceClass>                     classes_;
  std::map<DeviceId, double>                          accept_;
  std::map<DeviceId, std::size_t>                     max_sessions_;
  std::map<DeviceId, std::set<DeviceId>>              adjacency_;
  std::map<DeviceId, ledger::HashChain>               chains_;
  delegation::BlobStore                               store_;
  delegation::WireLog                                 wire_;
  std::map<DeviceId, std::unique_ptr<delegation::Delegate>> delegates_;
  std::vector<std::unique_ptr<TrafficGenerator>>      generators_;
  std::vector<std::uint64_t>                          epochs_;
  std::vector<BehaviorTemplate>                       benign_;
  std::vector<std::vector<trace::Packet>>             safe_packets_;
  std::vector<std::size_t>                            flow_monitor_;
  std::vector<std::unique_ptr<Monitor>>               monitors_;
  std::map<std::pair<DeviceId, DeviceId>, std::size_t> monitor_index_;
  std::vector<Interest>                               interests_;
  std::map<DeviceId, std::size_t>                     packets_sent_;
  std::map<DeviceId, CostRow>                         costs_;
  std::map<DeviceId, double>                          last_reliability_;
  std::map<std::pair<std::size_t, DeviceId>, std::size_t> attacker_packets_at_start_;  // (attack, attacker)
  std::map<std::pair<DeviceId, DeviceId>, Propagation> learned_;  // (source, attacker)

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t                                       seq_{0};
  double                                              now_{0.0};
  bool                                                trained_{false};

  RunReport                                           report_;
  json                                                training_notes_ = json::array();
  json                                                privacy_notes_ = json::array();
  std::size_t                                         total_packets_{0};
  std::size_t                                         no_consensus_{0};
};

void Simulation::observe(Monitor& m, const trace::Packet& p)
{
  auto tuple = m.stream->push(p);
  Symbol sym = m.to_model_space(m.vocab.map(tuple));
  ++m.received;
  if (m.stream->started_sequence() || m.recent.empty())
  {
    m.recent.push_back(features::SymbolSequence{m.target, m.evaluator, {}});
    while (m.recent.size() > s_.protocol.k + 1)
    {
      m.recent.pop_front();
    }
  }
  m.recent.back().symbols.push_back(sym);

  const auto& model = m.fingerprint();
  const std::size_t w = model.window();
  if (m.context.size() == w)
  {
    std::vector<Symbol> ctx(m.context.begin(), m.context.end());
    bool miss = model.predict(ctx) != sym;
    charge_prediction(m.evaluator, 1);
    m.misses.push_back(miss ? 1 : 0);
    m.miss_count += miss ? 1 : 0;
    if (m.misses.size() > s_.protocol.window_size)
    {
      m.miss_count -= m.misses.front();
      m.misses.pop_front();
    }
    if (m.misses.size() == s_.protocol.window_size)
    {
      double mr = static_cast<double>(m.miss_count) / static_cast<double>(s_.protocol.window_size);
      bool anomalous = mr > s_.protocol.threshold;
      m.run = anomalous ? m.run + 1 : 0;
      report_.windows.push_back({m.evaluator, m.target, m.window_index++, p.timestamp, mr, anomalous, m.attacked});
      if (!m.attacked)
      {
        ++report_.benign_windows;
        report_.benign_anomalous_windows += anomalous ? 1 : 0;
      }
      else
      {
        std::size_t since = m.received - m.received_at_attack;
        if (anomalous && !m.crossing_packets)
        {
          m.crossing_packets = since;
        }
        if (m.run >= std::max<std::size_t>(s_.protocol.sustain, 1) && !m.alarm_packets)
        {
          m.alarm_packets = since;
          m.alarm_time = p.timestamp;
          m.attacker_packets_at_alarm = packets_sent_.at(m.target);
        }
      }
    }
  }
  m.context.push_back(sym);
  if (m.context.size() > w)
  {
    m.context.pop_front();
  }
}

void Simulation::on_packet(std::size_t f, const trace::Packet& p)
{
  ++total_packets_;
  ++packets_sent_[p.src];
  if (!trained_)
  {
    safe_packets_[f].push_back(p);
    return;
  }
  if (flow_monitor_[f] != SIZE_MAX)
  {
    observe(*monitors_[flow_monitor_[f]], p);
  }
}

void Simulation::on_train()
{
  trained_ = true;
  const auto now = static_cast<LogicalTime>(std::floor(now_));
  delegation::Neighborhood hood{[this](const DeviceId& n) { return neighbors(n); },
                                [this](const DeviceId& n) { return classes_.at(n); }};
  for (std::size_t f = 0; f < s_.flows.size(); ++f)
  {
    const auto& spec = s_.flows[f];
    auto m = std::make_unique<Monitor>();
    m->flow = f;
    m->evaluator = spec.dst;
    m->target = spec.src;
    m->device_class = classes_.at(spec.dst);
    auto seqs = trace::split_sequences(safe_packets_[f], s_.tau_split);
    auto set = trace::build_communication_set(seqs, spec.src, spec.dst);
    json note{{"evaluator", spec.dst}, {"target", spec.src}};
    if (set.empty())
    {
      note["status"] = "no safe traffic";
      training_notes_.push_back(note);
      continue;
    }
    m->profile = features::build_binning_profile(set);
    std::vector<features::SymbolSequence> symbols;
    for (const auto& seq : set.sequences)
    {
      symbols.push_back(features::to_symbols(features::engineer(seq, m->profile), m->vocab, spec.src, spec.dst));
    }
    m->vocab.freeze();
    predictor::TrainConfig config;
    config.kind = s_.protocol.model;
    config.epochs = s_.protocol.epochs;
    config.seed = rng_.split("train").split(f).next_u64();
    try
    {
      if (m->device_class != DeviceClass::basic)
      {
        auto ts = predictor::make_training_set(symbols, s_.protocol.window, m->vocab.size() + 1);
        m->model = predictor::train(ts, config);
        auto& row = cost_row(spec.dst);
        row.models_trained += 1;
        row.epochs += config.epochs;
        row.train_seconds += static_cast<double>(config.epochs) * s_.costs.train_epoch_s(m->device_class);
      }
      else
      {
        auto accept_rng = rng_.split("accept").split(f);
        auto chosen = delegation::select_delegate(
          spec.dst, delegation::TaskKind::train, s_.protocol.delegation_levels, hood, ledger_, now,
          [&](const DeviceId& id) {
            return delegates_.count(id) && delegates_.at(id)->session_count() < max_sessions_.at(id) &&
                   accept_rng.bernoulli(accept_.at(id));
          });
        auto salt_rng = rng_.split("salt").split(f);
        delegation::Session session(spec.dst, delegation::make_salt(salt_rng));
        auto blob = store_.put(delegation::encode_dataset(session.make_dataset(symbols, s_.protocol.window)));
        auto model_blob = delegates_.at(chosen)->train(session.request(delegation::TaskKind::train, blob), config);
        m->hashed = delegation::decode_hashed_model(store_.fetch(model_blob));
        m->session = std::move(session);
        m->delegate = chosen;
        auto& row = cost_row(chosen);
        row.models_trained += 1;
        row.epochs += config.epochs;
        row.train_seconds += static_cast<double>(config.epochs) * s_.costs.train_epoch_s(classes_.at(chosen));

        std::vector<Symbol> raw_vocab;
        for (Symbol sym = 0; sym <= m->vocab.size(); ++sym)
        {
          raw_vocab.push_back(sym);
        }
        for (const auto& finding :
             delegation::privacy_scan(wire_, store_, spec.src, raw_vocab, symbols, s_.protocol.window))
        {
          ++report_.privacy_findings;
          privacy_notes_.push_back(json{{"target", spec.src}, {"message", finding.message}, {"what", finding.what}});
        }
      }
    }
    catch (const Error& e)
    {
      note["status"] = e.what();
      training_notes_.push_back(note);
      continue;
    }
    note["status"] = "ok";
    note["vocabulary"] = m->vocab.size();
    note["sequences"] = set.sequences.size();
    if (m->delegate)
    {
      note["delegate"] = *m->delegate;
    }
    training_notes_.push_back(note);
    m->stream = std::make_unique<features::FeatureStream>(m->profile, s_.tau_split);
    flow_monitor_[f] = monitors_.size();
    monitor_index_[{m->evaluator, m->target}] = monitors_.size();
    monitors_.push_back(std::move(m));
    safe_packets_[f].clear();
    safe_packets_[f].shrink_to_fit();
  }
  if (monitors_.empty())
  {
    throw ConfigError("safe period too short: no evaluator could train a model");
  }

  if (s_.interests)
  {
    interests_ = *s_.interests;
  }
  else
  {
    std::set<DeviceId> modelled;
    for (const auto& m : monitors_)
    {
      modelled.insert(m->target);
    }
    for (const auto& d : s_.devices)
    {
      for (const auto& target : modelled)
      {
        if (d.id != target && !is_evaluator(d.id, target))
        {
          interests_.push_back({d.id, target});
        }
      }
    }
  }
  const double n = static_cast<double>(interests_.size());
  for (std::size_t i = 0; i < interests_.size(); ++i)
  {
    push(now_ + s_.protocol.assess_every * (static_cast<double>(i) + 1.0) / (n + 1.0), EventKind::assess, i);
  }
}

void Simulation::on_attack(std::size_t index)
{
  const auto& a = s_.attacks[index];
  if (!traffic_attack(a.type))
  {
    return;
  }
  for (const auto& attacker : a.attackers)
  {
    attacker_packets_at_start_[{index, attacker}] = packets_sent_.at(attacker);
    for (std::size_t f = 0; f < generators_.size(); ++f)
    {
      if (generators_[f]->src() != attacker)
      {
        continue;
      }
      auto trng = rng_.split("attack").split(index).split(f);
      const auto& spec = s_.flows[f];
      if (a.type == AttackType::behavior_swap)
      {
        generators_[f]->swap_behavior(make_template(trng, spec.period, TemplateStyle::malign, spec.payload));
      }
      else
      {
        generators_[f]->swap_behavior(make_template(trng, spec.period, TemplateStyle::flood, spec.payload), a.rate);
      }
      push(generators_[f]->peek_time(), EventKind::packet, f, ++epochs_[f]);
    }
    for (auto& m : monitors_)
    {
      if (m->target == attacker && !m->attacked)
      {
        m->attacked = true;
        m->received_at_attack = m->received;
        m->run = 0;
      }
    }
  }
}

void Simulation::on_attack_end(std::size_t index)
{
  const auto& a = s_.attacks[index];
  if (!traffic_attack(a.type))
  {
    return;
  }
  for (const auto& attacker : a.attackers)
  {
    for (std::size_t f = 0; f < generators_.size(); ++f)
    {
      if (generators_[f]->src() == attacker)
      {
        generators_[f]->swap_behavior(benign_[f], 1.0);
        push(generators_[f]->peek_time(), EventKind::packet, f, ++epochs_[f]);
      }
    }
  }
}

std::vector<consensus::PathReport> Simulation::forged_paths(const DeviceId& source, const DeviceId& target)
{
  std::vector<consensus::PathReport> out;
  for (const auto& a : s_.attacks)
  {
    if (a.type != AttackType::path_forge_replay || !active(a) || !involves(a, source, target))
    {
      continue;
    }
    const auto& blocks = ledger_.blocks();
    for (auto it = blocks.rbegin(); it != blocks.rend() && out.size() < a.count; ++it)
    {
      if (it->payload.at("type") != "sm")
      {
        continue;
      }
      auto tx = ledger::transaction_from_json(it->payload.at("tx"));
      if (tx.target != target || tx.submitter == source)
      {
        continue;
      }
      for (auto& p : tx.paths)
      {
        if (out.size() >= a.count)
        {
          break;
        }
        p.tau = a.tau.value_or(default_forged_tau(a.type));
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

void Simulation::record_reliability()
{
  const auto now = static_cast<LogicalTime>(std::floor(now_));
  for (const auto& [id, rec] : ledger_.records())
  {
    double r = ledger_.query_reliability(id, now);
    auto it = last_reliability_.find(id);
    if (it == last_reliability_.end() || it->second != r)
    {
      last_reliability_[id] = r;
      report_.reliability.push_back({now_, id, r});
    }
  }
}

void Simulation::on_assess(std::size_t i)
{
  const auto& interest = interests_[i];
  const auto now = static_cast<LogicalTime>(std::floor(now_));
  auto forged = forged_paths(interest.source, interest.target);
  auto a = consensus::assess(interest.source, interest.target, {s_.protocol.maximum_depth}, *this, *this, ledger_,
                             now, forged);
  AssessmentRecord rec;
  rec.time = now_;
  rec.source = interest.source;
  rec.target = interest.target;
  rec.trust = a.outcome.trustworthiness;
  rec.paths = a.transaction.paths.size();
  rec.consensus = a.outcome.consensus_set.size();
  rec.voided = a.outcome.voided.size();
  rec.dropped = a.dropped.size();
  report_.assessments.push_back(rec);
  no_consensus_ += a.outcome.no_consensus ? 1 : 0;
  record_reliability();

  for (std::size_t ai = 0; ai < s_.attacks.size(); ++ai)
  {
    const auto& atk = s_.attacks[ai];
    if (!traffic_attack(atk.type) || now_ < atk.start)
    {
      continue;
    }
    for (const auto& attacker : atk.attackers)
    {
      if (attacker != interest.target || learned_.count({interest.source, attacker}))
      {
        continue;
      }
      if (rec.trust && *rec.trust < s_.protocol.trust_threshold)
      {
        Propagation prop;
        prop.source = interest.source;
        prop.attacker = attacker;
        prop.learned_time = now_;
        std::size_t sent = packets_sent_.at(attacker);
        prop.packets_since_attack = sent - attacker_packets_at_start_.at({ai, attacker});
        std::optional<std::size_t> first_alarm;
        for (const auto& m : monitors_)
        {
          if (m->target == attacker && m->attacker_packets_at_alarm)
          {
            first_alarm = first_alarm ? std::min(*first_alarm, *m->attacker_packets_at_alarm)
                                      : *m->attacker_packets_at_alarm;
          }
        }
        if (first_alarm)
        {
          prop.additional_packets = static_cast<std::int64_t>(sent) - static_cast<std::int64_t>(*first_alarm);
        }
        learned_[{interest.source, attacker}] = prop;
      }
    }
  }
  push(now_ + s_.protocol.assess_every, EventKind::assess, i);
}

RunReport Simulation::run()
{
  record_reliability();
  for (std::size_t f = 0; f < generators_.size(); ++f)
  {
    push(generators_[f]->peek_time(), EventKind::packet, f, epochs_[f]);
  }
  push(s_.safe_period, EventKind::train, 0);
  for (std::size_t a = 0; a < s_.attacks.size(); ++a)
  {
    push(s_.attacks[a].start, EventKind::attack, a);
    if (s_.attacks[a].end)
    {
      push(*s_.attacks[a].end, EventKind::attack_end, a);
    }
  }

  while (!queue_.empty())
  {
    Event e = queue_.top();
    if (e.time > s_.duration)
    {
      break;
    }
    queue_.pop();
    if (e.kind == EventKind::packet && e.epoch != epochs_[e.index])
    {
      continue;
    }
    now_ = e.time;
    switch (e.kind)
    {
      case EventKind::packet: {
        auto p = generators_[e.index]->next();
        on_packet(e.index, p);
        push(generators_[e.index]->peek_time(), EventKind::packet, e.index, epochs_[e.index]);
        break;
      }
      case EventKind::train:
        on_train();
        break;
      case EventKind::attack:
        on_attack(e.index);
        break;
      case EventKind::attack_end:
        on_attack_end(e.index);
        break;
      case EventKind::assess:
        on_assess(e.index);
        break;
    }
  }

  // Detections and propagation tables.
  for (std::size_t ai = 0; ai < s_.attacks.size(); ++ai)
  {
    const auto& atk = s_.attacks[ai];
    if (!traffic_attack(atk.type))
    {
      continue;
    }
    for (const auto& attacker : atk.attackers)
    {
      for (const auto& m : monitors_)
      {
        if (m->target != attacker)
        {
          continue;
        }
        report_.detections.push_back({m->evaluator, attacker, std::string(to_string(atk.type)), atk.start,
                                      m->alarm_time, m->alarm_packets, m->crossing_packets});
      }
      for (const auto& interest : interests_)
      {
        if (interest.target != attacker)
        {
          continue;
        }
        auto it = learned_.find({interest.source, attacker});
        Propagation prop = it != learned_.end() ? it->second : Propagation{interest.source, attacker, {}, {}, {}};
        if (std::none_of(report_.propagation.begin(), report_.propagation.end(), [&](const Propagation& p) {
              return p.source == prop.source && p.attacker == prop.attacker;
            }))
        {
          report_.propagation.push_back(prop);
        }
      }
    }
  }
  for (const auto& [id, row] : costs_)
  {
    report_.costs.push_back(row);
  }

  report_.ledger_dump = ledger_.dump();

  std::size_t detected = 0;
  double latency_sum = 0.0;
  for (const auto& d : report_.detections)
  {
    if (d.latency_packets)
    {
      ++detected;
      latency_sum += static_cast<double>(*d.latency_packets);
    }
  }
  std::size_t learned = 0;
  double since_sum = 0.0, additional_sum = 0.0;
  std::size_t additional_n = 0;
  for (const auto& p : report_.propagation)
  {
    if (p.packets_since_attack)
    {
      ++learned;
      since_sum += static_cast<double>(*p.packets_since_attack);
    }
    if (p.additional_packets)
    {
      ++additional_n;
      additional_sum += static_cast<double>(*p.additional_packets);
    }
  }
  double fp_rate = report_.benign_windows == 0
                     ? 0.0
                     : static_cast<double>(report_.benign_anomalous_windows) / static_cast<double>(report_.benign_windows);
  json monitors = json::array();
  for (const auto& m : monitors_)
  {
    json j{{"evaluator", m->evaluator},
           {"target", m->target},
           {"class", std::string(delegation::to_string(m->device_class))},
           {"vocabulary", m->vocab.size()}};
    if (m->delegate)
    {
      j["delegate"] = *m->delegate;
    }
    monitors.push_back(j);
  }
  auto mean_or_null = [](double sum, std::size_t n) { return n == 0 ? json(nullptr) : json(sum / static_cast<double>(n)); };
  const auto& blocks = ledger_.blocks();
  report_.summary = json{
    {"scenario", scenario_to_json(s_)},
    {"training", training_notes_},
    {"monitors", monitors},
    {"privacy", privacy_notes_},
    {"metrics",
     {{"packets", total_packets_},
      {"assessments", report_.assessments.size()},
      {"no_consensus", no_consensus_},
      {"benign_windows", report_.benign_windows},
      {"benign_anomalous_windows", report_.benign_anomalous_windows},
      {"false_positive_rate", fp_rate},
      {"false_positive_within_budget", fp_rate <= s_.protocol.false_positive_budget},
      {"detections", report_.detections.size()},
      {"detected", detected},
      {"mean_detection_latency_packets", mean_or_null(latency_sum, detected)},
      {"interested", report_.propagation.size()},
      {"informed", learned},
      {"mean_propagation_packets", mean_or_null(since_sum, learned)},
      {"mean_additional_packets", mean_or_null(additional_sum, additional_n)},
      {"privacy_findings", report_.privacy_findings},
      {"sm_reliability_increases", count_sm_increases(ledger_)}}},
    {"ledger",
     {{"blocks", blocks.size()}, {"head", blocks.empty() ? std::string() : to_hex(blocks.back().digest)}}}};
  return std::move(report_);
}

std::string csv_escape(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos)
  {
    return s;
  }
  std::string out = "\"";
  for (char c : s)
  {
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  }
  return out + "\"";
}

}  // namespace

RunReport run(const Scenario& scenario)
{
  Simulation sim(scenario);
  return sim.run();
}

std::string detections_csv(const std::vector<Detection>& rows)
{
  std::ostringstream out;
  out << "detector,attacker,attack,attack_start,alarm_time,latency_packets,first_crossing_packets\n";
  for (const auto& r : rows)
  {
    out << csv_escape(r.detector) << ',' << csv_escape(r.attacker) << ',' << r.attack << ',' << fmt(r.attack_start)
        << ',' << fmt_opt(r.alarm_time) << ',' << fmt_opt(r.latency_packets) << ','
        << fmt_opt(r.first_crossing_packets) << '\n';
  }
  return out.str();
}

std::string propagation_csv(const std::vector<Propagation>& rows)
{
  std::ostringstream out;
  out << "source,attacker,learned_time,packets_since_attack,additional_packets\n";
  for (const auto& r : rows)
  {
    out << csv_escape(r.source) << ',' << csv_escape(r.attacker) << ',' << fmt_opt(r.learned_time) << ','
        << fmt_opt(r.packets_since_attack) << ',' << fmt_opt(r.additional_packets) << '\n';
  }
  return out.str();
}

std::string assessments_csv(const std::vector<AssessmentRecord>& rows)
{
  std::ostringstream out;
  out << "time,source,target,trust,paths,consensus,voided,dropped\n";
  for (const auto& r : rows)
  {
    out << fmt(r.time) << ',' << csv_escape(r.source) << ',' << csv_escape(r.target) << ',' << fmt_opt(r.trust)
        << ',' << r.paths << ',' << r.consensus << ',' << r.voided << ',' << r.dropped << '\n';
  }
  return out.str();
}

std::string reliability_csv(const std::vector<ReliabilityPoint>& rows)
{
  std::ostringstream out;
  out << "time,node,reliability\n";
  for (const auto& r : rows)
  {
    out << fmt(r.time) << ',' << csv_escape(r.node) << ',' << fmt(r.reliability) << '\n';
  }
  return out.str();
}

std::string windows_csv(const std::vector<WindowPoint>& rows)
{
  std::ostringstream out;
  out << "evaluator,target,window_index,time,m_r,anomalous,under_attack\n";
  for (const auto& r : rows)
  {
    out << csv_escape(r.evaluator) << ',' << csv_escape(r.target) << ',' << r.window_index << ',' << fmt(r.time)
        << ',' << fmt(r.m_r) << ',' << (r.anomalous ? 1 : 0) << ',' << (r.under_attack ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string costs_csv(const std::vector<CostRow>& rows)
{
  std::ostringstream out;
  out << "device,class,models_trained,epochs,train_seconds,predictions,predict_seconds\n";
  for (const auto& r : rows)
  {
    out << csv_escape(r.device) << ',' << delegation::to_string(r.device_class) << ',' << r.models_trained << ','
        << r.epochs << ',' << fmt(r.train_seconds) << ',' << r.predictions << ',' << fmt(r.predict_seconds) << '\n';
  }
  return out.str();
}

void write_report(const RunReport& report, const std::filesystem::path& directory)
{
  std::filesystem::create_directories(directory);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(directory / name, std::ios::binary);
    out << text;
    if (!out)
    {
      throw Error("cannot write " + (directory / name).string());
    }
  };
  write("summary.json", report.summary.dump(2) + "\n");
  write("ledger.jsonl", report.ledger_dump);
  write("detections.csv", detections_csv(report.detections));
  write("propagation.csv", propagation_csv(report.propagation));
  write("assessments.csv", assessments_csv(report.assessments));
  write("reliability.csv", reliability_csv(report.reliability));
  write("windows.csv", windows_csv(report.windows));
  write("costs.csv", costs_csv(report.costs));
}

Scenario reference_scenario()
{
  Scenario s;
  s.name = "reference";
  s.seed = 20240611;
  // Two hubs (PD), four gateways (CD), six sensors (BD).
  const char* pd[] = {"hub-a", "hub-b"};
  const char* cd[] = {"gw-1", "gw-2", "gw-3", "gw-4"};
  const char* bd[] = {"cam-1", "lock-1", "plug-1", "plug-2", "thermo-1", "thermo-2"};
  for (auto id : pd)
  {
    s.devices.push_back({id, DeviceClass::powerful, 1.0, 8});
  }
  for (auto id : cd)
  {
    s.devices.push_back({id, DeviceClass::capable, 1.0, 8});
  }
  for (auto id : bd)
  {
    s.devices.push_back({id, DeviceClass::basic, 1.0, 8});
  }
  s.links = {{"hub-a", "hub-b"},   {"hub-a", "gw-1"},    {"hub-a", "gw-2"},     {"hub-b", "gw-3"},
             {"hub-b", "gw-4"},    {"gw-1", "gw-2"},     {"gw-3", "gw-4"},      {"gw-1", "cam-1"},
             {"gw-2", "cam-1"},    {"gw-1", "thermo-1"}, {"gw-2", "lock-1"},    {"gw-3", "plug-1"},
             {"gw-4", "plug-2"},   {"gw-3", "thermo-2"}, {"gw-4", "thermo-2"},  {"hub-a", "lock-1"},
             {"hub-b", "plug-1"},  {"thermo-1", "lock-1"}, {"plug-1", "plug-2"}, {"hub-b", "gw-2"}};
  auto flow = [&](const char* src, const char* dst, std::size_t period, PayloadKind payload) {
    FlowSpec f;
    f.src = src;
    f.dst = dst;
    f.period = period;
    f.payload = payload;
    s.flows.push_back(f);
  };
  flow("cam-1", "gw-1", 6, PayloadKind::none);
  flow("cam-1", "gw-2", 6, PayloadKind::none);
  flow("thermo-1", "gw-1", 5, PayloadKind::numeric);
  flow("thermo-1", "lock-1", 5, PayloadKind::numeric);
  flow("lock-1", "gw-2", 4, PayloadKind::none);
  flow("lock-1", "hub-a", 4, PayloadKind::none);
  flow("plug-1", "gw-3", 6, PayloadKind::none);
  flow("plug-1", "hub-b", 6, PayloadKind::none);
  flow("plug-2", "gw-4", 6, PayloadKind::none);
  flow("plug-2", "plug-1", 6, PayloadKind::none);
  flow("thermo-2", "gw-3", 5, PayloadKind::numeric);
  flow("thermo-2", "gw-4", 5, PayloadKind::numeric);
  flow("gw-1", "hub-a", 6, PayloadKind::none);
  flow("gw-1", "gw-2", 6, PayloadKind::none);
  flow("gw-3", "hub-b", 6, PayloadKind::none);
  flow("gw-3", "gw-4", 6, PayloadKind::none);
  s.safe_period = 4000.0;
  s.duration = 10000.0;
  s.protocol.maximum_depth = 3;
  AttackSpec swap;
  swap.attackers = {"cam-1"};
  swap.start = 7000.0;
  s.attacks.push_back(swap);
  validate(s);
  return s;
}

}  // namespace iottrust::sim
