#pragma once

#include "iottrust/delegation.hpp"
#include "iottrust/ledger.hpp"
#include "iottrust/predictor.hpp"
#include "iottrust/traffic.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iottrust::sim {

struct DeviceSpec
{
  DeviceId                 id;
  delegation::DeviceClass  device_class{delegation::DeviceClass::capable};
  double                   accept_probability{1.0};  // willingness to act as a delegate
  std::size_t              max_sessions{8};          // load above which delegation requests are declined
};

/// One directed traffic stream; the receiver is the evaluator of the sender.
struct FlowSpec
{
  DeviceId      src;
  DeviceId      dst;
  std::size_t   period{6};
  PayloadKind   payload{PayloadKind::none};
  TrafficParams traffic;
};

enum class AttackType
{
  behavior_swap,
  self_promote,
  slander,
  ballot_stuff,
  path_forge_replay,
  dos_flood,
};

AttackType parse_attack_type(std::string_view name);
std::string_view to_string(AttackType t);

struct AttackSpec
{
  AttackType            type{AttackType::behavior_swap};
  std::vector<DeviceId> attackers;
  double                start{0.0};
  std::optional<double> end;           // traffic attacks: the attacker reverts to its benign pattern
  std::vector<DeviceId> targets;       // forged-score attacks: whose score is forged (empty = all)
  std::optional<double> tau;           // forged score
  double                rate{10.0};    // dos_flood rate multiplier
  bool                  silent{false}; // controlled evaluators withhold their score instead
  std::size_t           count{1};      // path_forge_replay: forged paths per transaction
};

struct ProtocolParams
{
  ledger::LedgerParams ledger;
  std::size_t          k{5};
  std::size_t          window{predictor::kDefaultWindow};
  std::size_t          window_size{100};
  double               threshold{0.5};
  std::size_t          sustain{3};
  std::size_t          maximum_depth{2};
  double               assess_every{120.0};
  double               trust_threshold{0.5};  // T below this means "do not trust"
  std::size_t          delegation_levels{2};
  std::size_t          epochs{10};
  predictor::ModelKind model{predictor::ModelKind::ngram};
  double               false_positive_budget{0.05};
};

/// Modelled per-class compute costs; bookkeeping only.
struct CostTable
{
  double train_epoch_s_bd{671.0};
  double train_epoch_s_cd{30.0};
  double train_epoch_s_pd{3.0};
  double predict_ms_bd{1500.0};
  double predict_ms_cd{86.0};
  double predict_ms_pd{7.0};

  double train_epoch_s(delegation::DeviceClass c) const;
  double predict_ms(delegation::DeviceClass c) const;
};

struct Interest
{
  DeviceId source;
  DeviceId target;
};

struct Scenario
{
  std::string                         name{"scenario"};
  std::uint64_t                       seed{0};
  std::vector<DeviceSpec>             devices;
  std::vector<std::pair<DeviceId, DeviceId>> links;
  std::vector<FlowSpec>               flows;
  double                              safe_period{0.0};
  double                              duration{0.0};
  double                              tau_split{trace::kDefaultTauSplit};
  ProtocolParams                      protocol;
  CostTable                           costs;
  std::vector<AttackSpec>             attacks;
  std::optional<std::vector<Interest>> interests;  // nullopt = every non-evaluator watches every modelled device
};

/// Throws ConfigError with the offending field on invalid input.
Scenario scenario_from_json(const nlohmann::json& doc);
/// Full echo including defaults.
nlohmann::json scenario_to_json(const Scenario& s);
void validate(const Scenario& s);

struct Detection
{
  DeviceId                   detector;
  DeviceId                   attacker;
  std::string                attack;
  double                     attack_start{0.0};
  std::optional<double>      alarm_time;
  std::optional<std::size_t> latency_packets;         // flow packets from attack start to sustained alarm
  std::optional<std::size_t> first_crossing_packets;  // same, single window above threshold
};

struct Propagation
{
  DeviceId                    source;
  DeviceId                    attacker;
  std::optional<double>       learned_time;
  std::optional<std::size_t>  packets_since_attack;  // attacker packets from attack start
  std::optional<std::int64_t> additional_packets;    // attacker packets after the first direct alarm
};

struct AssessmentRecord
{
  double                time{0.0};
  DeviceId              source;
  DeviceId              target;
  std::optional<double> trust;
  std::size_t           paths{0};
  std::size_t           consensus{0};
  std::size_t           voided{0};
  std::size_t           dropped{0};
};

struct ReliabilityPoint
{
  double   time{0.0};
  DeviceId node;
  double   reliability{0.0};
};

struct WindowPoint
{
  DeviceId    evaluator;
  DeviceId    target;
  std::size_t window_index{0};
  double      time{0.0};
  double      m_r{0.0};
  bool        anomalous{false};
  bool        under_attack{false};
};

struct CostRow
{
  DeviceId                device;
  delegation::DeviceClass device_class{delegation::DeviceClass::capable};
  std::size_t             models_trained{0};
  std::size_t             epochs{0};
  double                  train_seconds{0.0};
  std::size_t             predictions{0};
  double                  predict_seconds{0.0};
};

struct RunReport
{
  nlohmann::json                summary;
  std::string                   ledger_dump;
  std::vector<Detection>        detections;
  std::vector<Propagation>      propagation;
  std::vector<AssessmentRecord> assessments;
  std::vector<ReliabilityPoint> reliability;
  std::vector<WindowPoint>      windows;
  std::vector<CostRow>          costs;
  std::size_t                   benign_windows{0};
  std::size_t                   benign_anomalous_windows{0};
  std::size_t                   privacy_findings{0};
};

RunReport run(const Scenario& scenario);

/// summary.json, ledger.jsonl and one CSV per table.
void write_report(const RunReport& report, const std::filesystem::path& directory);

std::string detections_csv(const std::vector<Detection>& rows);
std::string propagation_csv(const std::vector<Propagation>& rows);
std::string assessments_csv(const std::vector<AssessmentRecord>& rows);
std::string reliability_csv(const std::vector<ReliabilityPoint>& rows);
std::string windows_csv(const std::vector<WindowPoint>& rows);
std::string costs_csv(const std::vector<CostRow>& rows);

/// Twelve devices of mixed classes, one behavior_swap attacker.
Scenario reference_scenario();

/// SM updates that raised a stored reliability; always 0 for a correct contract.
std::size_t count_sm_increases(const ledger::Ledger& ledger);

}  // namespace iottrust::sim
