#include "iottrust/sim.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace iottrust;
using namespace iottrust::sim;
using nlohmann::json;

namespace {

// Target x is modelled by e (a basic device that delegates to m) and optionally by m.
// Source s reaches e directly and through a and b; p is a second source.
json small(bool m_models_x = false)
{
  json doc = {
    {"name", "small"},
    {"seed", 11},
    {"devices",
     {{{"id", "s"}, {"class", "CD"}},
      {{"id", "x"}, {"class", "CD"}},
      {{"id", "e"}, {"class", "BD"}},
      {{"id", "a"}, {"class", "CD"}},
      {{"id", "b"}, {"class", "CD"}},
      {{"id", "m"}, {"class", "PD"}},
      {{"id", "p"}, {"class", "CD"}}}},
    {"flows", {{{"src", "x"}, {"dst", "e"}, {"period", 6}, {"payload", "numeric"}}}},
    {"safe_period", 3000},
    {"duration", 6000},
    {"protocol", {{"assess_every", 60}, {"maximum_depth", 2}}},
    {"interests", {{{"source", "s"}, {"target", "x"}}}},
  };
  doc["links"] = json::array();
  for (const auto& [u, v] : std::vector<std::pair<const char*, const char*>>{
         {"x", "e"}, {"x", "m"}, {"s", "e"}, {"s", "a"}, {"a", "e"}, {"s", "b"}, {"b", "e"}, {"s", "m"}, {"p", "e"}})
  {
    doc["links"].push_back(json::array({u, v}));
  }
  if (m_models_x)
  {
    doc["flows"].push_back({{"src", "x"}, {"dst", "m"}, {"period", 5}});
  }
  return doc;
}

RunReport run_json(const json& doc)
{
  return run(scenario_from_json(doc));
}

std::vector<std::optional<double>> trust_series(const RunReport& r, const DeviceId& source)
{
  std::vector<std::optional<double>> out;
  for (const auto& a : r.assessments)
  {
    if (a.source == source)
    {
      out.push_back(a.trust);
    }
  }
  return out;
}

double last_reliability(const RunReport& r, const DeviceId& node)
{
  double v = -1.0;
  for (const auto& p : r.reliability)
  {
    if (p.node == node)
    {
      v = p.reliability;
    }
  }
  return v;
}

}  // namespace

TEST(Scenario, ParsesAndEchoesDefaults)
{
  auto s = scenario_from_json(small());
  EXPECT_EQ(s.devices.size(), 7u);
  EXPECT_EQ(s.protocol.k, 5u);
  EXPECT_EQ(s.protocol.sustain, 3u);
  EXPECT_DOUBLE_EQ(s.tau_split, 30.0);
  auto echo = scenario_to_json(s);
  EXPECT_EQ(echo.at("protocol").at("t_ban"), 1000);
  EXPECT_EQ(echo.at("costs").at("train_epoch_s_bd"), 671.0);
  EXPECT_EQ(scenario_to_json(scenario_from_json(echo)), echo);
}

TEST(Scenario, RejectsInvalidInput)
{
  auto expect_config = [](json doc, const std::string& fragment) {
    try
    {
      scenario_from_json(doc);
      ADD_FAILURE() << "accepted: " << fragment;
    }
    catch (const ConfigError& e)
    {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  auto doc = small();
  doc["attacks"] = {{{"type", "teleport"}, {"attackers", {"x"}}, {"start", 4000}}};
  expect_config(doc, "teleport");
  doc = small();
  doc["attacks"] = {{{"type", "behavior_swap"}, {"attackers", {"x"}}, {"start", 100}}};
  expect_config(doc, "safe period");
  doc = small();
  doc["flows"].push_back({{"src", "x"}, {"dst", "s"}});
  expect_config(doc, "neighbour");
  doc = small();
  doc.erase("safe_period");
  expect_config(doc, "safe_period");
  doc = small();
  doc["devices"][0]["class"] = "XL";
  expect_config(doc, "XL");
  doc = small();
  doc["protocol"]["window_size"] = 5;
  expect_config(doc, "window_size");
  doc = small();
  doc["devices"].push_back({{"id", "s"}});
  expect_config(doc, "duplicate");
}

TEST(Scenario, ReferenceValidates)
{
  auto s = reference_scenario();
  EXPECT_EQ(s.devices.size(), 12u);
  EXPECT_NO_THROW(validate(s));
  EXPECT_EQ(scenario_from_json(scenario_to_json(s)).flows.size(), s.flows.size());
}

TEST(Sim, SafePeriodTooShort)
{
  auto doc = small();
  doc["safe_period"] = 4;
  EXPECT_THROW(run_json(doc), ConfigError);
}

TEST(Sim, BenignBaseline)
{
  auto r = run_json(small(true));
  EXPECT_TRUE(r.detections.empty());
  ASSERT_GT(r.benign_windows, 1000u);
  double fp = static_cast<double>(r.benign_anomalous_windows) / static_cast<double>(r.benign_windows);
  EXPECT_LE(fp, 0.05);
  for (const auto& w : r.windows)
  {
    EXPECT_FALSE(w.under_attack);
  }
  EXPECT_EQ(r.summary.at("metrics").at("sm_reliability_increases"), 0);
  EXPECT_EQ(r.summary.at("metrics").at("privacy_findings"), 0);
  EXPECT_TRUE(ledger::verify_ledger(r.ledger_dump));
  std::size_t with_trust = 0;
  for (const auto& a : r.assessments)
  {
    if (a.trust)
    {
      ++with_trust;
      EXPECT_GT(*a.trust, 0.5);
    }
  }
  EXPECT_GT(with_trust, 0u);
}

TEST(Sim, BasicDeviceDelegatesTraining)
{
  auto r = run_json(small());
  const auto& monitors = r.summary.at("monitors");
  ASSERT_EQ(monitors.size(), 1u);
  EXPECT_EQ(monitors[0].at("evaluator"), "e");
  EXPECT_EQ(monitors[0].at("delegate"), "m");
  for (const auto& c : r.costs)
  {
    if (c.device_class == delegation::DeviceClass::basic)
    {
      EXPECT_EQ(c.models_trained, 0u);
    }
    EXPECT_DOUBLE_EQ(c.train_seconds, static_cast<double>(c.epochs) * CostTable{}.train_epoch_s(c.device_class));
    EXPECT_NEAR(c.predict_seconds, static_cast<double>(c.predictions) * CostTable{}.predict_ms(c.device_class) / 1000.0,
                1e-6 * (1.0 + c.predict_seconds));
  }
}

TEST(Sim, Deterministic)
{
  auto doc = small(true);
  doc["attacks"] = {{{"type", "behavior_swap"}, {"attackers", {"x"}}, {"start", 4000}}};
  auto a = run_json(doc);
  auto b = run_json(doc);
  EXPECT_EQ(a.ledger_dump, b.ledger_dump);
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
  EXPECT_EQ(windows_csv(a.windows), windows_csv(b.windows));
  EXPECT_EQ(assessments_csv(a.assessments), assessments_csv(b.assessments));
  EXPECT_EQ(reliability_csv(a.reliability), reliability_csv(b.reliability));
  doc["seed"] = 12;
  EXPECT_NE(run_json(doc).ledger_dump, a.ledger_dump);
}

TEST(Sim, BehaviorSwapDetectedAndPropagated)
{
  auto doc = small(true);
  doc["attacks"] = {{{"type", "behavior_swap"}, {"attackers", {"x"}}, {"start", 4000}}};
  auto r = run_json(doc);
  ASSERT_EQ(r.detections.size(), 2u);
  for (const auto& d : r.detections)
  {
    ASSERT_TRUE(d.latency_packets) << d.detector;
    ASSERT_TRUE(d.first_crossing_packets);
    EXPECT_LE(*d.first_crossing_packets, *d.latency_packets);
    EXPECT_LT(*d.latency_packets, 200u);
    EXPECT_GE(*d.alarm_time, 4000.0);
  }
  ASSERT_EQ(r.propagation.size(), 1u);
  EXPECT_EQ(r.propagation[0].source, "s");
  EXPECT_TRUE(r.propagation[0].packets_since_attack);
}

TEST(Sim, DosFloodRaisedByEveryDirectEvaluator)
{
  auto doc = small(true);
  doc["attacks"] = {{{"type", "dos_flood"}, {"attackers", {"x"}}, {"start", 4000}, {"rate", 10}}};
  auto r = run_json(doc);
  ASSERT_EQ(r.detections.size(), 2u);
  for (const auto& d : r.detections)
  {
    EXPECT_TRUE(d.latency_packets) << d.detector;
  }
}

TEST(Sim, SlanderLeavesTrustUnchanged)
{
  auto base = small();
  auto attacked = small();
  attacked["attacks"] = {{{"type", "slander"}, {"attackers", {"a"}}, {"targets", {"x"}}, {"start", 4000}}};
  auto r0 = run_json(base);
  auto r1 = run_json(attacked);
  EXPECT_EQ(trust_series(r0, "s"), trust_series(r1, "s"));
  EXPECT_DOUBLE_EQ(last_reliability(r0, "a"), 1.0);
  EXPECT_LT(last_reliability(r1, "a"), 1.0);
  EXPECT_EQ(r1.summary.at("metrics").at("sm_reliability_increases"), 0);
}

TEST(Sim, SelfPromoteMatchesSilentRun)
{
  auto forged = small(true);
  auto silent = small(true);
  forged["attacks"] = {{{"type", "self_promote"}, {"attackers", {"m"}}, {"targets", {"x"}}, {"start", 4000}}};
  silent["attacks"] = {
    {{"type", "self_promote"}, {"attackers", {"m"}}, {"targets", {"x"}}, {"start", 4000}, {"silent", true}}};
  auto a = run_json(forged);
  auto b = run_json(silent);
  auto ta = trust_series(a, "s");
  auto tb = trust_series(b, "s");
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < a.assessments.size(); ++i)
  {
    if (a.assessments[i].time >= 4000.0)
    {
      EXPECT_EQ(a.assessments[i].trust, b.assessments[i].trust) << a.assessments[i].time;
    }
  }
}

TEST(Sim, PathForgeReplayIsVoided)
{
  auto doc = small();
  doc["interests"].push_back({{"source", "p"}, {"target", "x"}});
  doc["attacks"] = {{{"type", "path_forge_replay"}, {"attackers", {"p"}}, {"targets", {"x"}}, {"start", 4000}}};
  auto r = run_json(doc);
  std::size_t voided = 0;
  for (const auto& a : r.assessments)
  {
    if (a.source == "p" && a.time >= 4000.0)
    {
      voided += a.voided;
    }
    else
    {
      EXPECT_EQ(a.voided, 0u);
    }
  }
  EXPECT_GT(voided, 0u);
  for (const auto& id : {"s", "e", "a", "b"})
  {
    EXPECT_DOUBLE_EQ(last_reliability(r, id), 1.0) << id;
  }
}

TEST(Report, CsvHeadersAndFiles)
{
  EXPECT_EQ(detections_csv({}), "detector,attacker,attack,attack_start,alarm_time,latency_packets,first_crossing_packets\n");
  EXPECT_EQ(windows_csv({}), "evaluator,target,window_index,time,m_r,anomalous,under_attack\n");
  EXPECT_EQ(assessments_csv({}), "time,source,target,trust,paths,consensus,voided,dropped\n");
  EXPECT_EQ(reliability_csv({}), "time,node,reliability\n");
  EXPECT_EQ(propagation_csv({}), "source,attacker,learned_time,packets_since_attack,additional_packets\n");
  EXPECT_EQ(costs_csv({}), "device,class,models_trained,epochs,train_seconds,predictions,predict_seconds\n");

  auto r = run_json(small());
  auto dir = std::filesystem::temp_directory_path() / "iottrust_report_test";
  std::filesystem::remove_all(dir);
  write_report(r, dir);
  for (const auto* name : {"summary.json", "ledger.jsonl", "detections.csv", "propagation.csv", "assessments.csv",
                           "reliability.csv", "windows.csv", "costs.csv"})
  {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::ifstream in(dir / "summary.json");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(json::parse(ss.str()), r.summary);
  std::filesystem::remove_all(dir);
}

TEST(Report, UnwritablePath)
{
  RunReport r;
  EXPECT_ANY_THROW(write_report(r, "/proc/iottrust-cannot-write"));
}

TEST(Sim, OpportunisticSwapStillDetected)
{
  auto doc = small(true);
  doc["attacks"] = {{{"type", "behavior_swap"}, {"attackers", {"x"}}, {"start", 4000}, {"end", 4400}}};
  auto r = run_json(doc);
  ASSERT_EQ(r.detections.size(), 2u);
  for (const auto& d : r.detections)
  {
    ASSERT_TRUE(d.alarm_time) << d.detector;
    EXPECT_LT(*d.alarm_time, 4400.0);
  }
  doc["attacks"][0]["end"] = 3999;
  EXPECT_THROW(run_json(doc), ConfigError);
}
