#include "iottrust/trace.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <sstream>

namespace iottrust::trace {

using nlohmann::json;

namespace {

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view what)
{
  std::ostringstream msg;
  msg << "line " << line << ": field '" << field << "': " << what;
  throw ParseError(msg.str());
}

template <typename Int>
Int parse_int_field(const json& rec, std::size_t line, const char* key, long long lo, long long hi)
{
  auto it = rec.find(key);
  if (it == rec.end())
  {
    fail(line, key, "missing");
  }
  if (!it->is_number_integer())
  {
    fail(line, key, "expected integer");
  }
  auto v = it->get<long long>();
  if (v < lo || v > hi)
  {
    fail(line, key, "out of range");
  }
  return static_cast<Int>(v);
}

std::string parse_device(const json& rec, std::size_t line, const char* key)
{
  auto it = rec.find(key);
  if (it == rec.end())
  {
    fail(line, key, "missing");
  }
  if (it->is_string())
  {
    auto s = it->get<std::string>();
    if (s.empty())
    {
      fail(line, key, "empty device id");
    }
    return s;
  }
  if (it->is_number_integer())
  {
    return std::to_string(it->get<long long>());
  }
  fail(line, key, "expected string");
}

Packet packet_from_record(const json& rec, std::size_t line)
{
  if (!rec.is_object())
  {
    fail(line, "<record>", "expected JSON object");
  }
  Packet p;
  auto ts = rec.find("ts");
  if (ts == rec.end())
  {
    fail(line, "ts", "missing");
  }
  if (!ts->is_number())
  {
    fail(line, "ts", "expected number");
  }
  p.timestamp = ts->get<double>();
  if (!(p.timestamp >= 0.0))
  {
    fail(line, "ts", "negative timestamp");
  }
  p.src = parse_device(rec, line, "src");
  p.dst = parse_device(rec, line, "dst");
  if (p.src == p.dst)
  {
    fail(line, "dst", "source and destination coincide");
  }
  p.src_port = parse_int_field<std::uint16_t>(rec, line, "sport", 0, 65535);
  p.tcp_flags = parse_int_field<std::uint8_t>(rec, line, "flags", 0, 255);
  p.protocol = parse_int_field<int>(rec, line, "proto", 0, 255);
  p.length = parse_int_field<std::uint32_t>(rec, line, "len", 0, 0xffffffffLL);

  auto pl = rec.find("payload");
  if (pl != rec.end() && !pl->is_null())
  {
    if (pl->is_number())
    {
      p.payload = PayloadValue::numeric(pl->get<double>());
    }
    else if (pl->is_string())
    {
      auto s = pl->get<std::string>();
      if (!s.empty())
      {
        p.payload = PayloadValue::categorical(std::move(s));
      }
    }
    else
    {
      fail(line, "payload", "expected number or string");
    }
  }
  return p;
}

std::vector<std::string_view> split_lines(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size())
  {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos)
    {
      end = text.size();
    }
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r')
    {
      line.remove_suffix(1);
    }
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool blank(std::string_view s)
{
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::vector<std::string> split_csv(std::string_view line)
{
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line)
  {
    if (c == ',')
    {
      cells.push_back(cur);
      cur.clear();
    }
    else
    {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

// Converts a CSV row to the JSON record shape so both formats share validation.
json csv_record(const std::vector<std::string>& header, const std::vector<std::string>& cells,
                std::size_t line)
{
  if (cells.size() != header.size())
  {
    fail(line, "<row>", "column count does not match header");
  }
  json rec = json::object();
  for (std::size_t i = 0; i < header.size(); ++i)
  {
    const auto& key = header[i];
    const auto& cell = cells[i];
    if (key == "src" || key == "dst")
    {
      rec[key] = cell;
    }
    else if (key == "payload")
    {
      if (cell.empty())
      {
        continue;
      }
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end != nullptr && *end == '\0')
      {
        rec[key] = v;
      }
      else
      {
        rec[key] = cell;
      }
    }
    else if (key == "ts")
    {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0')
      {
        fail(line, key, "expected number");
      }
      rec[key] = v;
    }
    else
    {
      char* end = nullptr;
      long long v = std::strtoll(cell.c_str(), &end, 10);
      if (cell.empty() || *end != '\0')
      {
        fail(line, key, "expected integer");
      }
      rec[key] = v;
    }
  }
  return rec;
}

}  // namespace

std::vector<Packet> ingest_trace(std::string_view text, TraceFormat format)
{
  std::vector<Packet> packets;
  auto lines = split_lines(text);
  if (format == TraceFormat::jsonl)
  {
    for (std::size_t i = 0; i < lines.size(); ++i)
    {
      if (blank(lines[i]))
      {
        continue;
      }
      json rec;
      try
      {
        rec = json::parse(lines[i]);
      }
      catch (const json::parse_error&)
      {
        fail(i + 1, "<record>", "invalid JSON");
      }
      packets.push_back(packet_from_record(rec, i + 1));
    }
    return packets;
  }

  std::vector<std::string> header;
  for (std::size_t i = 0; i < lines.size(); ++i)
  {
    if (blank(lines[i]))
    {
      continue;
    }
    auto cells = split_csv(lines[i]);
    if (header.empty())
    {
      header = cells;
      continue;
    }
    packets.push_back(packet_from_record(csv_record(header, cells, i + 1), i + 1));
  }
  return packets;
}

std::string write_trace(const std::vector<Packet>& packets)
{
  std::string out;
  for (const auto& p : packets)
  {
    json rec = {{"ts", p.timestamp},       {"src", p.src},        {"dst", p.dst},
                {"sport", p.src_port},     {"flags", p.tcp_flags}, {"proto", p.protocol},
                {"len", p.length}};
    if (p.payload)
    {
      if (p.payload->is_numeric())
      {
        rec["payload"] = p.payload->number();
      }
      else
      {
        rec["payload"] = p.payload->category();
      }
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<InteractionSequence> split_sequences(const std::vector<Packet>& packets, double tau_split)
{
  if (!(tau_split > 0.0))
  {
    throw ContractError("tau_split must be positive");
  }
  std::vector<InteractionSequence> out;
  std::map<std::pair<DeviceId, DeviceId>, std::size_t> open;
  for (const auto& p : packets)
  {
    auto key = std::make_pair(p.src, p.dst);
    auto it = open.find(key);
    // A gap equal to tau_split keeps the packet in the running sequence.
    if (it != open.end() && p.timestamp - out[it->second].packets.back().timestamp <= tau_split)
    {
      out[it->second].packets.push_back(p);
      continue;
    }
    out.push_back(InteractionSequence{p.src, p.dst, p.timestamp, {p}});
    open[key] = out.size() - 1;
  }
  return out;
}

CommunicationSet build_communication_set(const std::vector<InteractionSequence>& sequences,
                                         const DeviceId& src, const DeviceId& dst)
{
  CommunicationSet set{src, dst, {}};
  for (const auto& s : sequences)
  {
    if (s.src == src && s.dst == dst)
    {
      set.sequences.push_back(s);
    }
  }
  std::stable_sort(set.sequences.begin(), set.sequences.end(),
                   [](const auto& a, const auto& b) { return a.start_time < b.start_time; });
  return set;
}

}  // namespace iottrust::trace
