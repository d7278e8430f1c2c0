#include "iottrust/trace.hpp"
#include "iottrust/traffic.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace iottrust;
using namespace iottrust::trace;

namespace {

Packet at(double t, const char* src = "A", const char* dst = "B")
{
  Packet p;
  p.timestamp = t;
  p.src = src;
  p.dst = dst;
  p.src_port = 5000;
  p.tcp_flags = 0x10;
  p.protocol = 6;
  p.length = 60;
  return p;
}

}  // namespace

TEST(Ingest, WellFormedRecord)
{
  auto packets = ingest_trace(
    R"({"ts":1.5,"src":"cam","dst":"hub","sport":443,"flags":24,"proto":6,"len":120,"payload":21.5})");
  ASSERT_EQ(packets.size(), 1u);
  EXPECT_DOUBLE_EQ(packets[0].timestamp, 1.5);
  EXPECT_EQ(packets[0].src, "cam");
  EXPECT_EQ(packets[0].dst, "hub");
  EXPECT_EQ(packets[0].src_port, 443);
  EXPECT_EQ(packets[0].tcp_flags, 24);
  EXPECT_EQ(packets[0].length, 120u);
  ASSERT_TRUE(packets[0].payload);
  EXPECT_DOUBLE_EQ(packets[0].payload->number(), 21.5);
}

TEST(Ingest, MissingTimestampCitesLine)
{
  try
  {
    ingest_trace(R"({"src":"a","dst":"b","sport":1,"flags":0,"proto":6,"len":1})");
    FAIL() << "expected ParseError";
  }
  catch (const ParseError& e)
  {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 1"), std::string::npos);
    EXPECT_NE(msg.find("ts"), std::string::npos);
  }
}

TEST(Ingest, ErrorNamesLaterLine)
{
  std::string text = R"({"ts":0,"src":"a","dst":"b","sport":1,"flags":0,"proto":6,"len":1})"
                     "\n"
                     R"({"ts":1,"src":"a","dst":"b","sport":70000,"flags":0,"proto":6,"len":1})";
  try
  {
    ingest_trace(text);
    FAIL();
  }
  catch (const ParseError& e)
  {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("sport"), std::string::npos);
  }
}

TEST(Ingest, EmptyInputIsEmpty)
{
  EXPECT_TRUE(ingest_trace("").empty());
  EXPECT_TRUE(ingest_trace("\n\n").empty());
}

TEST(Ingest, RejectsSelfLoopAndNegativeTime)
{
  EXPECT_THROW(ingest_trace(R"({"ts":0,"src":"a","dst":"a","sport":1,"flags":0,"proto":6,"len":1})"), ParseError);
  EXPECT_THROW(ingest_trace(R"({"ts":-1,"src":"a","dst":"b","sport":1,"flags":0,"proto":6,"len":1})"), ParseError);
}

TEST(Ingest, EmptyPayloadStringMeansNoPayload)
{
  auto p = ingest_trace(R"({"ts":0,"src":"a","dst":"b","sport":1,"flags":0,"proto":6,"len":1,"payload":""})");
  EXPECT_FALSE(p[0].payload);
}

TEST(Ingest, CsvAlias)
{
  auto packets = ingest_trace("ts,src,dst,sport,flags,proto,len,payload\n"
                              "0.5,a,b,80,24,6,100,on\n"
                              "1.0,a,b,80,16,6,60,\n",
                              TraceFormat::csv);
  ASSERT_EQ(packets.size(), 2u);
  EXPECT_EQ(packets[0].payload->category(), "on");
  EXPECT_FALSE(packets[1].payload);
}

TEST(Ingest, RoundTripOfGeneratedTrace)
{
  Rng rng(7);
  auto tmpl = sim::make_template(rng, 6, sim::TemplateStyle::benign, sim::PayloadKind::numeric);
  sim::TrafficGenerator gen("s1", "hub", tmpl, {}, Rng(8));
  auto packets = sim::generate(gen, 500);
  EXPECT_EQ(ingest_trace(write_trace(packets)), packets);
}

TEST(Ingest, BenignTraceOfTableSize)
{
  Rng rng(11);
  auto tmpl = sim::make_template(rng, 6, sim::TemplateStyle::benign, sim::PayloadKind::categorical);
  sim::TrafficGenerator gen("plug", "hub", tmpl, {}, Rng(12));
  auto text = write_trace(sim::generate(gen, 12793));
  EXPECT_EQ(ingest_trace(text).size(), 12793u);
}

TEST(Split, AllGapsBelowThreshold)
{
  auto seqs = split_sequences({at(0), at(1), at(2)}, 5.0);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0].packets.size(), 3u);
}

TEST(Split, GapAboveThresholdSplits)
{
  auto seqs = split_sequences({at(0), at(1), at(10)}, 5.0);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].packets.size(), 2u);
  EXPECT_EQ(seqs[1].packets.size(), 1u);
  EXPECT_DOUBLE_EQ(seqs[1].start_time, 10.0);
}

TEST(Split, GapEqualToThresholdStays)
{
  EXPECT_EQ(split_sequences({at(0), at(5)}, 5.0).size(), 1u);
}

TEST(Split, DirectionsAreSeparate)
{
  auto seqs = split_sequences({at(0, "A", "B"), at(0.5, "B", "A"), at(1, "A", "B"), at(1.5, "B", "A")}, 5.0);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].src, "A");
  EXPECT_EQ(seqs[1].src, "B");
  EXPECT_EQ(seqs[0].packets.size(), 2u);
}

TEST(Split, RejectsNonPositiveTau)
{
  EXPECT_THROW(split_sequences({}, 0.0), ContractError);
}

TEST(Split, PartitionProperty)
{
  // Random multi-pair streams: every packet lands in exactly one sequence, gaps
  // inside are <= tau, gaps between consecutive sequences of a pair are > tau.
  Rng rng(99);
  const char* names[] = {"a", "b", "c"};
  for (int round = 0; round < 50; ++round)
  {
    std::vector<Packet> packets;
    double t = 0.0;
    auto n = rng.uniform_int(0, 200);
    for (std::uint64_t i = 0; i < n; ++i)
    {
      t += rng.uniform(0.0, 12.0);
      auto s = rng.uniform_int(0, 2);
      auto d = (s + 1 + rng.uniform_int(0, 1)) % 3;
      auto p = at(t, names[s], names[d]);
      p.length = static_cast<std::uint32_t>(i);
      packets.push_back(p);
    }
    double tau = rng.uniform(1.0, 10.0);
    auto seqs = split_sequences(packets, tau);
    std::multiset<std::uint32_t> seen;
    std::map<std::pair<DeviceId, DeviceId>, double> last_end;
    for (const auto& s : seqs)
    {
      for (std::size_t i = 0; i < s.packets.size(); ++i)
      {
        EXPECT_EQ(s.packets[i].src, s.src);
        EXPECT_EQ(s.packets[i].dst, s.dst);
        seen.insert(s.packets[i].length);
        if (i > 0)
        {
          EXPECT_LE(s.packets[i].timestamp - s.packets[i - 1].timestamp, tau);
        }
      }
      auto key = std::make_pair(s.src, s.dst);
      if (last_end.count(key))
      {
        EXPECT_GT(s.start_time - last_end[key], tau);
      }
      last_end[key] = s.packets.back().timestamp;
    }
    EXPECT_EQ(seen.size(), packets.size());
    EXPECT_EQ(std::set<std::uint32_t>(seen.begin(), seen.end()).size(), packets.size());
  }
}

TEST(CommunicationSet, Empty)
{
  EXPECT_TRUE(build_communication_set({}, "A", "B").empty());
}

TEST(CommunicationSet, FiltersAndSorts)
{
  std::vector<InteractionSequence> seqs{
    {"A", "B", 30.0, {at(30)}}, {"B", "A", 1.0, {at(1, "B", "A")}}, {"A", "B", 10.0, {at(10)}},
    {"B", "A", 2.0, {at(2, "B", "A")}}, {"A", "B", 20.0, {at(20)}},
  };
  auto set = build_communication_set(seqs, "A", "B");
  ASSERT_EQ(set.sequences.size(), 3u);
  EXPECT_DOUBLE_EQ(set.sequences[0].start_time, 10.0);
  EXPECT_DOUBLE_EQ(set.sequences[1].start_time, 20.0);
  EXPECT_DOUBLE_EQ(set.sequences[2].start_time, 30.0);
}
