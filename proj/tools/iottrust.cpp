#include "iottrust/ledger.hpp"
#include "iottrust/payloadgen.hpp"
#include "iottrust/sim.hpp"
#include "iottrust/trace.hpp"
#include "iottrust/traffic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace iottrust;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 verification or invariant failure, 2 bad input.
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ParseError("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text)
{
  if (path.empty() || path == "-")
  {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
  {
    throw Error("cannot write " + path);
  }
}

std::string g17(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json parse_json(const std::string& text, const std::string& path)
{
  try
  {
    return json::parse(text);
  }
  catch (const json::parse_error& e)
  {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Traffic fingerprinting trust toolkit"};
  app.require_subcommand(1);

  // payloadgen
  auto* pg = app.add_subcommand("payloadgen", "synthetic payload values");
  pg->require_subcommand(1);
  payloadgen::QuantGenParams qp;
  auto* quant = pg->add_subcommand("quant", "bounded random walk, one value per line");
  quant->add_option("--low", qp.range_low, "range low")->required();
  quant->add_option("--high", qp.range_high, "range high")->required();
  quant->add_option("--hop", qp.hop, "maximum step")->required();
  quant->add_option("-n", qp.n, "number of values")->required();
  quant->add_option("--seed", qp.rng_seed, "rng seed");
  payloadgen::CatGenParams cp;
  auto* cat = pg->add_subcommand("cat", "piecewise-constant labels, one per line");
  cat->add_option("--categories", cp.categories, "labels")->required()->delimiter(',');
  cat->add_option("-n", cp.n, "number of values")->required();
  cat->add_option("--stab-min", cp.stability_min, "minimum stability")->required();
  cat->add_option("--stab-max", cp.stability_max, "maximum stability")->required();
  cat->add_option("--seed", cp.rng_seed, "rng seed");

  // trace
  auto* tr = app.add_subcommand("trace", "packet traces");
  tr->require_subcommand(1);
  std::string gen_src = "dev-a", gen_dst = "dev-b", gen_payload = "none", gen_out;
  std::size_t gen_period = 6, gen_packets = 1000;
  std::uint64_t gen_seed = 0;
  double gen_noise = 0.2;
  auto* tgen = tr->add_subcommand("gen", "generate a benign trace of one directed pair as JSONL");
  tgen->add_option("--src", gen_src);
  tgen->add_option("--dst", gen_dst);
  tgen->add_option("--period", gen_period);
  tgen->add_option("--packets", gen_packets);
  tgen->add_option("--payload", gen_payload)->check(CLI::IsMember({"none", "numeric", "categorical"}));
  tgen->add_option("--noise", gen_noise);
  tgen->add_option("--seed", gen_seed);
  tgen->add_option("--out", gen_out, "output file (default stdout)");
  std::string split_in;
  double tau_split = trace::kDefaultTauSplit;
  bool split_csv = false;
  auto* tsplit = tr->add_subcommand("split", "list interaction sequences of a trace");
  tsplit->add_option("trace", split_in)->required();
  tsplit->add_option("--tau-split", tau_split, "sequence split threshold in seconds");
  tsplit->add_flag("--csv", split_csv, "input is CSV");

  // ledger
  auto* lg = app.add_subcommand("ledger", "ledger dumps");
  lg->require_subcommand(1);
  std::string ledger_in, ledger_node;
  LogicalTime ledger_time = 0;
  auto* lverify = lg->add_subcommand("verify", "check digest chain and canonical encoding");
  lverify->add_option("dump", ledger_in)->required();
  auto* lrel = lg->add_subcommand("reliability", "reliability of a node after replaying a dump");
  lrel->add_option("dump", ledger_in)->required();
  lrel->add_option("node", ledger_node)->required();
  lrel->add_option("--time", ledger_time, "logical time of the query");

  // sim
  auto* sm = app.add_subcommand("sim", "network simulation");
  sm->require_subcommand(1);
  std::string scenario_in, out_dir;
  std::optional<double> sim_tau_split;
  auto* srun = sm->add_subcommand("run", "run a scenario and write its report");
  srun->add_option("scenario", scenario_in)->required();
  srun->add_option("--out", out_dir)->required();
  srun->add_option("--tau-split", sim_tau_split, "override the scenario's split threshold");
  auto* sverify = sm->add_subcommand("verify-ledger", "replay a run's ledger dump");
  sverify->add_option("dump", ledger_in)->required();
  std::string ref_out;
  auto* sref = sm->add_subcommand("reference", "write the reference scenario");
  sref->add_option("--out", ref_out, "output file (default stdout)");

  // report
  auto* rp = app.add_subcommand("report", "run reports");
  rp->require_subcommand(1);
  std::string summary_in;
  bool inspect_json = false;
  auto* rinspect = rp->add_subcommand("inspect", "print the headline metrics of summary.json");
  rinspect->add_option("summary", summary_in)->required();
  rinspect->add_flag("--json", inspect_json, "print the canonical summary instead");

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (quant->parsed())
    {
      for (double v : payloadgen::gen_quantitative(qp))
      {
        std::cout << g17(v) << '\n';
      }
    }
    else if (cat->parsed())
    {
      for (const auto& v : payloadgen::gen_categorical(cp))
      {
        std::cout << v << '\n';
      }
    }
    else if (tgen->parsed())
    {
      Rng rng(gen_seed);
      auto kind = gen_payload == "numeric"       ? sim::PayloadKind::numeric
                  : gen_payload == "categorical" ? sim::PayloadKind::categorical
                                                 : sim::PayloadKind::none;
      auto tmpl_rng = rng.split("template");
      auto tmpl = sim::make_template(tmpl_rng, gen_period, sim::TemplateStyle::benign, kind);
      sim::TrafficParams params;
      params.noise = gen_noise;
      sim::TrafficGenerator gen(gen_src, gen_dst, tmpl, params, rng.split("traffic"));
      write_output(gen_out, trace::write_trace(sim::generate(gen, gen_packets)));
    }
    else if (tsplit->parsed())
    {
      if (!(tau_split > 0.0))
      {
        throw ConfigError("--tau-split must be positive");
      }
      auto packets = trace::ingest_trace(read_file(split_in), split_csv ? trace::TraceFormat::csv : trace::TraceFormat::jsonl);
      std::cout << "src,dst,start_time,packets\n";
      for (const auto& s : trace::split_sequences(packets, tau_split))
      {
        std::cout << s.src << ',' << s.dst << ',' << g17(s.start_time) << ',' << s.packets.size() << '\n';
      }
    }
    else if (lverify->parsed() || sverify->parsed())
    {
      auto dump = read_file(ledger_in);
      if (!ledger::verify_ledger(dump))
      {
        std::cout << "invalid\n";
        return kFailed;
      }
      try
      {
        ledger::Ledger::replay(dump);
      }
      catch (const Error& e)
      {
        std::cout << "invalid: " << e.what() << '\n';
        return kFailed;
      }
      std::cout << "ok\n";
    }
    else if (lrel->parsed())
    {
      auto replayed = ledger::Ledger::replay(read_file(ledger_in));
      std::cout << g17(replayed.query_reliability(ledger_node, ledger_time)) << '\n';
    }
    else if (srun->parsed())
    {
      auto scenario = sim::scenario_from_json(parse_json(read_file(scenario_in), scenario_in));
      if (sim_tau_split)
      {
        scenario.tau_split = *sim_tau_split;
        sim::validate(scenario);
      }
      auto report = sim::run(scenario);
      sim::write_report(report, out_dir);
      const auto& m = report.summary.at("metrics");
      std::cout << "packets " << m.at("packets") << ", assessments " << m.at("assessments") << ", detected "
                << m.at("detected") << "/" << m.at("detections") << ", informed " << m.at("informed") << "/"
                << m.at("interested") << '\n';
      bool ok = ledger::verify_ledger(report.ledger_dump) && m.at("sm_reliability_increases") == 0 &&
                m.at("privacy_findings") == 0;
      if (!ok)
      {
        std::cerr << "invariant violated\n";
        return kFailed;
      }
    }
    else if (sref->parsed())
    {
      write_output(ref_out, sim::scenario_to_json(sim::reference_scenario()).dump(2) + "\n");
    }
    else if (rinspect->parsed())
    {
      auto summary = parse_json(read_file(summary_in), summary_in);
      if (inspect_json)
      {
        std::cout << summary.dump(2) << '\n';
      }
      else
      {
        std::cout << "scenario " << summary.at("scenario").at("name").get<std::string>() << '\n';
        for (const auto& [k, v] : summary.at("metrics").items())
        {
          std::cout << "  " << k << ": " << v.dump() << '\n';
        }
        std::cout << "ledger blocks " << summary.at("ledger").at("blocks") << ", head "
                  << summary.at("ledger").at("head").get<std::string>() << '\n';
      }
    }
  }
  catch (const ConfigError& e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadInput;
  }
  catch (const ParseError& e)
  {
    std::cerr << "parse error: " << e.what() << '\n';
    return kBadInput;
  }
  catch (const Error& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  catch (const json::exception& e)
  {
    std::cerr << "malformed document: " << e.what() << '\n';
    return kBadInput;
  }
  return 0;
}
