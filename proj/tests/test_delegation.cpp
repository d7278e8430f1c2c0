#include "iottrust/anomaly.hpp"
#include "iottrust/delegation.hpp"
#include "iottrust/traffic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

using namespace iottrust;
using namespace iottrust::delegation;
using features::SymbolSequence;

namespace {

Bytes bytes_of(std::string_view s)
{
  return Bytes(s.begin(), s.end());
}

struct Corpus
{
  std::vector<SymbolSequence> train;
  std::vector<SymbolSequence> test;
  std::vector<Symbol>         vocabulary;
};

// Benign generated traffic of one pair mapped to symbols; the vocabulary is
// built in stream order over the training half.
Corpus benign_corpus(std::uint64_t seed)
{
  Rng rng(seed);
  auto tmpl = sim::make_template(rng, 6, sim::TemplateStyle::benign, sim::PayloadKind::numeric);
  sim::TrafficGenerator gen("thermo", "hub", tmpl, {}, rng.split("traffic"));
  auto seqs = trace::split_sequences(sim::generate(gen, 6000), 30.0);
  std::size_t half = seqs.size() / 2;
  trace::CommunicationSet safe{"thermo", "hub", {seqs.begin(), seqs.begin() + static_cast<std::ptrdiff_t>(half)}};
  auto profile = features::build_binning_profile(safe);
  features::SymbolVocabulary vocab;
  Corpus c;
  for (std::size_t i = 0; i < seqs.size(); ++i)
  {
    if (i == half)
    {
      vocab.freeze();
    }
    auto s = features::to_symbols(features::engineer(seqs[i], profile), vocab, "thermo", "hub");
    (i < half ? c.train : c.test).push_back(s);
  }
  for (Symbol s = 0; s <= vocab.size(); ++s)
  {
    c.vocabulary.push_back(s);
  }
  return c;
}

class Ring
{
public:
  Ring(std::map<DeviceId, DeviceClass> classes, std::map<DeviceId, std::vector<DeviceId>> adj)
    : classes_(std::move(classes))
    , adj_(std::move(adj))
  {}
  Neighborhood hood() const
  {
    return Neighborhood{[this](const DeviceId& n) {
                          auto it = adj_.find(n);
                          return it == adj_.end() ? std::vector<DeviceId>{} : it->second;
                        },
                        [this](const DeviceId& n) { return classes_.at(n); }};
  }

private:
  std::map<DeviceId, DeviceClass>            classes_;
  std::map<DeviceId, std::vector<DeviceId>> adj_;
};

ledger::Ledger ledger_with(const std::vector<DeviceId>& ids)
{
  ledger::LedgerParams p;
  p.t_ban = 10;
  ledger::Ledger l(p);
  for (const auto& id : ids)
  {
    l.register_node(id, sha256(id), 100, 0);
  }
  return l;
}

}  // namespace

TEST(BlobStore, RoundTripAndAddress)
{
  BlobStore store;
  auto data = bytes_of("fingerprint");
  auto a = store.put(data);
  EXPECT_EQ(a, sha256(data));
  EXPECT_EQ(store.fetch(a), data);
  EXPECT_EQ(store.put(data), a);
  EXPECT_EQ(store.size(), 1u);
}

TEST(BlobStore, CorruptedAddressFails)
{
  BlobStore store;
  auto hex = to_hex(store.put(bytes_of("dataset")));
  hex[5] = hex[5] == '0' ? '1' : '0';
  EXPECT_THROW(store.fetch(digest_from_hex(hex)), Error);
}

TEST(BlobStore, DirectoryBackedDetectsTampering)
{
  auto dir = std::filesystem::temp_directory_path() / "iottrust-blob-test";
  std::filesystem::remove_all(dir);
  Digest a;
  {
    BlobStore store(dir);
    a = store.put(bytes_of("model bytes"));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / to_hex(a)));
  {
    BlobStore reopened(dir);
    EXPECT_EQ(reopened.fetch(a), bytes_of("model bytes"));
  }
  {
    std::ofstream out(dir / to_hex(a), std::ios::binary | std::ios::trunc);
    out << "model bytez";
  }
  BlobStore again(dir);
  EXPECT_THROW(again.fetch(a), Error);
  std::filesystem::remove_all(dir);
}

TEST(BlobStore, ConcurrentPutsAndFetches)
{
  BlobStore store;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
  {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 200; ++i)
      {
        auto b = bytes_of("blob-" + std::to_string(i % 50) + "-" + std::to_string(t % 2));
        auto a = store.put(b);
        ASSERT_EQ(store.fetch(a), b);
      }
    });
  }
  for (auto& th : threads)
  {
    th.join();
  }
  EXPECT_EQ(store.size(), 100u);
}

TEST(Hashing, Deterministic)
{
  Rng rng(1);
  auto salt = make_salt(rng);
  EXPECT_EQ(hash_symbol(7, salt), hash_symbol(7, salt));
  EXPECT_NE(hash_symbol(7, salt), hash_symbol(8, salt));
  EXPECT_THROW(make_salt(rng, 8), ContractError);
}

TEST(Hashing, SaltsGiveDisjointDigests)
{
  Rng rng(2);
  auto s1 = make_salt(rng);
  auto s2 = make_salt(rng);
  std::vector<Symbol> symbols(500);
  for (Symbol i = 0; i < 500; ++i)
  {
    symbols[i] = i;
  }
  auto a = hash_symbols(symbols, s1);
  auto b = hash_symbols(symbols, s2);
  std::set<Digest> sa(a.begin(), a.end());
  for (const auto& d : b)
  {
    EXPECT_FALSE(sa.count(d));
  }
}

TEST(Containers, DatasetRoundTripAndTruncation)
{
  Rng rng(3);
  Session session("req", make_salt(rng));
  std::vector<SymbolSequence> seqs{{"a", "b", {0, 1, 2, 0, 1, 2, 0, 1}}};
  auto ds = session.make_dataset(seqs, 3);
  EXPECT_EQ(ds.labels.size(), 5u);
  auto bytes = encode_dataset(ds);
  auto back = decode_dataset(bytes);
  EXPECT_EQ(back.contexts, ds.contexts);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_THROW(decode_dataset(std::span(bytes).first(bytes.size() - 1)), DecodeError);
  EXPECT_THROW(decode_dataset(std::span(bytes).first(10)), DecodeError);
}

TEST(Selection, AllBelowThreshold)
{
  Ring ring({{"r", DeviceClass::basic}, {"p1", DeviceClass::powerful}}, {{"r", {"p1"}}, {"p1", {"r"}}});
  auto l = ledger_with({"r", "p1"});
  // Both still inside their admission ban.
  EXPECT_TRUE(eligible_delegates("r", TaskKind::train, 1, ring.hood(), l, 5).empty());
  EXPECT_THROW(select_delegate("r", TaskKind::train, 1, ring.hood(), l, 5, {}), Error);
}

TEST(Selection, ClassFilter)
{
  Ring ring({{"r", DeviceClass::basic}, {"c1", DeviceClass::capable}, {"c2", DeviceClass::capable}},
            {{"r", {"c1", "c2"}}});
  auto l = ledger_with({"r", "c1", "c2"});
  EXPECT_TRUE(eligible_delegates("r", TaskKind::train, 1, ring.hood(), l, 20).empty());
  EXPECT_EQ(eligible_delegates("r", TaskKind::infer, 1, ring.hood(), l, 20), (std::vector<DeviceId>{"c1", "c2"}));
}

TEST(Selection, FirstDeclinesSecondChosen)
{
  Ring ring({{"r", DeviceClass::basic}, {"p1", DeviceClass::powerful}, {"p2", DeviceClass::powerful}},
            {{"r", {"p1", "p2"}}});
  auto l = ledger_with({"r", "p1", "p2"});
  auto chosen = select_delegate("r", TaskKind::train, 1, ring.hood(), l, 20, [](const DeviceId& d) { return d != "p1"; });
  EXPECT_EQ(chosen, "p2");
}

TEST(Selection, LevelsWidenSearch)
{
  Ring ring({{"r", DeviceClass::basic}, {"b1", DeviceClass::basic}, {"p9", DeviceClass::powerful}},
            {{"r", {"b1"}}, {"b1", {"r", "p9"}}, {"p9", {"b1"}}});
  auto l = ledger_with({"r", "b1", "p9"});
  EXPECT_TRUE(eligible_delegates("r", TaskKind::train, 1, ring.hood(), l, 20).empty());
  EXPECT_EQ(eligible_delegates("r", TaskKind::train, 2, ring.hood(), l, 20), std::vector<DeviceId>{"p9"});
}

TEST(Pipeline, HashedMatchesRawDecisions)
{
  auto corpus = benign_corpus(5);
  const std::size_t window = 10;
  auto raw_model = predictor::train(predictor::make_training_set(corpus.train, window, corpus.vocabulary.size()), {});

  Rng rng(6);
  BlobStore store;
  WireLog log;
  Session session("thermo-evaluator", make_salt(rng));
  auto address = store.put(encode_dataset(session.make_dataset(corpus.train, window)));
  Delegate pd("pd-1", store, &log);
  auto model_blob = pd.train(session.request(TaskKind::train, address), {});
  auto hashed = decode_hashed_model(store.fetch(model_blob));

  std::vector<Symbol> stream;
  for (const auto& s : corpus.test)
  {
    stream.insert(stream.end(), s.symbols.begin(), s.symbols.end());
  }
  for (int i = 0; i < 100; ++i)
  {
    std::size_t start = rng.uniform_int(0, stream.size() - 110);
    auto raw = std::span(stream).subspan(start, 110);
    auto trace = anomaly::predict_stream(raw_model, raw);
    std::size_t miss = 0;
    for (std::size_t k = window; k < raw.size(); ++k)
    {
      miss += trace.hit[k] ? 0 : 1;
    }
    double raw_mr = static_cast<double>(miss) / 100.0;
    auto digests = session.hash(raw);
    double hashed_mr = hashed.misprediction(digests);
    ASSERT_EQ(hashed_mr, raw_mr) << "window " << i;
    ASSERT_EQ(hashed_mr > 0.5, raw_mr > 0.5);
    // Position-level decisions as well.
    for (std::size_t k = window; k < raw.size(); ++k)
    {
      auto ctx = std::span(digests).subspan(k - window, window);
      std::vector<Symbol> dense;
      for (const auto& d : ctx)
      {
        dense.push_back(hashed.vocabulary.find(d));
      }
      bool hit = hashed.model.predict(dense) == hashed.vocabulary.find(digests[k]);
      ASSERT_EQ(hit, static_cast<bool>(trace.hit[k]));
    }
  }
}

TEST(Pipeline, DelegatedInferenceEqualsLocal)
{
  auto corpus = benign_corpus(9);
  Rng rng(10);
  BlobStore store;
  WireLog log;
  Session session("bd-1", make_salt(rng));
  Delegate pd("pd-1", store, &log);
  auto blob = pd.train(session.request(TaskKind::train, store.put(encode_dataset(session.make_dataset(corpus.train, 10)))), {});
  auto local = decode_hashed_model(store.fetch(blob));

  Delegate cd("cd-1", store, &log);
  cd.load(session.request(TaskKind::infer, blob));
  auto l = ledger_with({"cd-1"});
  InferenceLink link(session, cd, &log);
  const auto& stream = corpus.test.front().symbols;
  for (int i = 0; i < 100; ++i)
  {
    std::size_t start = rng.uniform_int(0, stream.size() - 60);
    auto raw = std::span(stream).subspan(start, 60);
    EXPECT_EQ(link.infer(raw, l, 20), local.misprediction(session.hash(raw)));
  }
}

TEST(Pipeline, PerfectWindowIsZero)
{
  std::vector<SymbolSequence> seqs{{"a", "b", {}}};
  for (int i = 0; i < 300; ++i)
  {
    seqs[0].symbols.push_back(static_cast<Symbol>(i % 6));
  }
  Rng rng(11);
  BlobStore store;
  Session session("r", make_salt(rng));
  Delegate pd("pd", store);
  pd.train(session.request(TaskKind::train, store.put(encode_dataset(session.make_dataset(seqs, 10)))), {});
  auto window = session.hash(std::span(seqs[0].symbols).subspan(17, 100));
  EXPECT_EQ(pd.infer(session.fingerprint(), window), 0.0);
  EXPECT_THROW(pd.infer(sha256(std::string_view("other")), window), ContractError);
}

TEST(Pipeline, SessionEndsWhenDelegateLosesReliability)
{
  std::vector<SymbolSequence> seqs{{"a", "b", {}}};
  for (int i = 0; i < 100; ++i)
  {
    seqs[0].symbols.push_back(static_cast<Symbol>(i % 4));
  }
  Rng rng(12);
  BlobStore store;
  Session session("r", make_salt(rng));
  Delegate pd("pd", store);
  pd.train(session.request(TaskKind::train, store.put(encode_dataset(session.make_dataset(seqs, 10)))), {});
  auto l = ledger_with({"pd"});
  InferenceLink link(session, pd);
  auto w = std::span(seqs[0].symbols).subspan(0, 30);
  EXPECT_NO_THROW(link.infer(w, l, 20));
  // Inside the admission ban the delegate is under c_th.
  EXPECT_THROW(link.infer(w, l, 5), ContractError);
  EXPECT_FALSE(link.open());
  EXPECT_FALSE(pd.has_session(session.fingerprint()));
  EXPECT_THROW(link.infer(w, l, 20), ContractError);
}

TEST(Privacy, WireLogIsClean)
{
  auto corpus = benign_corpus(13);
  Rng rng(14);
  BlobStore store;
  WireLog log;
  Session session("bd-7", make_salt(rng));
  Delegate pd("pd-2", store, &log);
  auto blob = pd.train(session.request(TaskKind::train, store.put(encode_dataset(session.make_dataset(corpus.train, 10)))), {});
  Delegate cd("cd-3", store, &log);
  cd.load(session.request(TaskKind::infer, blob));
  auto l = ledger_with({"cd-3"});
  InferenceLink link(session, cd, &log);
  link.infer(std::span(corpus.test[0].symbols).subspan(0, 100), l, 20);

  auto findings = privacy_scan(log, store, "thermo", corpus.vocabulary, corpus.train, 10);
  for (const auto& f : findings)
  {
    ADD_FAILURE() << "message " << f.message << ": " << f.what;
  }
  EXPECT_GE(log.messages().size(), 5u);
}

TEST(Privacy, ScanCatchesLeaks)
{
  auto corpus = benign_corpus(15);
  BlobStore store;
  WireLog log;
  log.record({{"type", "oops"}, {"about", "thermo"}});
  nlohmann::json raw = nlohmann::json::array();
  for (std::size_t i = 0; i < 10; ++i)
  {
    raw.push_back(corpus.train[0].symbols[i]);
  }
  log.record({{"type", "oops"}, {"window", raw}});
  Symbol s = corpus.vocabulary[1];
  Bytes le{static_cast<std::uint8_t>(s), 0, 0, 0};
  log.record({{"type", "oops"}, {"h", to_hex(sha256(le))}});
  auto findings = privacy_scan(log, store, "thermo", corpus.vocabulary, corpus.train, 10);
  std::set<std::size_t> flagged;
  for (const auto& f : findings)
  {
    flagged.insert(f.message);
  }
  EXPECT_EQ(flagged, (std::set<std::size_t>{0, 1, 2}));
}
