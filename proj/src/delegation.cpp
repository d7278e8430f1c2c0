#include "iottrust/delegation.hpp"

#include "byte_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

namespace iottrust::delegation {

using nlohmann::json;

DeviceClass parse_device_class(std::string_view name)
{
  if (name == "BD")
  {
    return DeviceClass::basic;
  }
  if (name == "CD")
  {
    return DeviceClass::capable;
  }
  if (name == "PD")
  {
    return DeviceClass::powerful;
  }
  throw ConfigError("unknown device class '" + std::string(name) + "' (expected BD, CD or PD)");
}

std::string_view to_string(DeviceClass c)
{
  switch (c)
  {
    case DeviceClass::basic:
      return "BD";
    case DeviceClass::capable:
      return "CD";
    case DeviceClass::powerful:
      return "PD";
  }
  return "?";
}

std::string_view to_string(TaskKind k)
{
  return k == TaskKind::train ? "train" : "infer";
}

// --- blob store -------------------------------------------------------------

BlobStore::BlobStore(std::filesystem::path directory)
  : directory_(std::move(directory))
{
  std::filesystem::create_directories(*directory_);
}

Digest BlobStore::put(std::span<const std::uint8_t> bytes)
{
  Digest address = sha256(bytes);
  std::unique_lock lock(mutex_);
  if (blobs_.count(address) != 0)
  {
    return address;
  }
  if (directory_)
  {
    auto path = *directory_ / to_hex(address);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out)
      {
        throw Error("cannot write blob " + path.string());
      }
    }
    std::filesystem::rename(tmp, path);
  }
  blobs_.emplace(address, Bytes(bytes.begin(), bytes.end()));
  return address;
}

Bytes BlobStore::fetch(const Digest& address) const
{
  {
    std::shared_lock lock(mutex_);
    auto it = blobs_.find(address);
    if (it != blobs_.end())
    {
      if (sha256(it->second) != address)
      {
        throw Error("blob " + to_hex(address) + " is corrupted");
      }
      return it->second;
    }
  }
  if (directory_)
  {
    auto path = *directory_ / to_hex(address);
    std::ifstream in(path, std::ios::binary);
    if (in)
    {
      Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (sha256(bytes) != address)
      {
        throw Error("blob " + to_hex(address) + " is corrupted");
      }
      std::unique_lock lock(mutex_);
      blobs_.emplace(address, bytes);
      return bytes;
    }
  }
  throw Error("blob " + to_hex(address) + " not found");
}

bool BlobStore::contains(const Digest& address) const
{
  std::shared_lock lock(mutex_);
  if (blobs_.count(address) != 0)
  {
    return true;
  }
  return directory_ && std::filesystem::exists(*directory_ / to_hex(address));
}

std::size_t BlobStore::size() const
{
  std::shared_lock lock(mutex_);
  return blobs_.size();
}

void WireLog::record(json message)
{
  messages_.push_back(std::move(message));
}

// --- hashing ----------------------------------------------------------------

Bytes make_salt(Rng& rng, std::size_t length)
{
  if (length < 16)
  {
    throw ContractError("salt must be at least 16 bytes");
  }
  Bytes salt(length);
  for (auto& b : salt)
  {
    b = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  }
  return salt;
}

Digest hash_symbol(Symbol symbol, std::span<const std::uint8_t> salt)
{
  std::array<std::uint8_t, 4> le{static_cast<std::uint8_t>(symbol), static_cast<std::uint8_t>(symbol >> 8),
                                 static_cast<std::uint8_t>(symbol >> 16), static_cast<std::uint8_t>(symbol >> 24)};
  return sha256_concat(le, salt);
}

std::vector<Digest> hash_symbols(std::span<const Symbol> symbols, std::span<const std::uint8_t> salt)
{
  std::vector<Digest> out;
  out.reserve(symbols.size());
  for (auto s : symbols)
  {
    out.push_back(hash_symbol(s, salt));
  }
  return out;
}

// --- containers -------------------------------------------------------------

namespace {

constexpr std::array<std::uint8_t, 4> kDatasetMagic{'I', 'F', 'P', 'H'};
constexpr std::array<std::uint8_t, 4> kModelMagic{'I', 'F', 'P', 'D'};
constexpr std::uint32_t kContainerVersion = 1;

void expect_magic(ByteReader& in, const std::array<std::uint8_t, 4>& magic, const char* what)
{
  auto m = in.bytes(4);
  if (!std::equal(m.begin(), m.end(), magic.begin()))
  {
    throw DecodeError(std::string("not a ") + what);
  }
}

}  // namespace

Bytes encode_dataset(const HashedDataset& ds)
{
  if (ds.window == 0 || ds.contexts.size() != ds.labels.size() * ds.window)
  {
    throw ContractError("dataset contexts do not match window and label count");
  }
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.u32(kContainerVersion);
  w.u32(ds.window);
  w.u64(ds.labels.size());
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
  {
    for (std::size_t k = 0; k < ds.window; ++k)
    {
      w.bytes(ds.contexts[i * ds.window + k]);
    }
    w.bytes(ds.labels[i]);
  }
  return std::move(w.out());
}

HashedDataset decode_dataset(std::span<const std::uint8_t> bytes)
{
  ByteReader in(bytes, "dataset truncated");
  expect_magic(in, kDatasetMagic, "hashed dataset");
  if (in.u32() != kContainerVersion)
  {
    throw DecodeError("unsupported dataset version");
  }
  HashedDataset ds;
  ds.window = in.u32();
  auto count = in.u64();
  if (ds.window == 0 || count > in.remaining() / (32 * (static_cast<std::uint64_t>(ds.window) + 1)))
  {
    throw DecodeError("dataset header inconsistent with its size");
  }
  ds.contexts.reserve(count * ds.window);
  ds.labels.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i)
  {
    for (std::uint32_t k = 0; k < ds.window; ++k)
    {
      ds.contexts.push_back(in.digest());
    }
    ds.labels.push_back(in.digest());
  }
  if (!in.done())
  {
    throw DecodeError("trailing bytes after dataset");
  }
  return ds;
}

Symbol DigestVocabulary::map(const Digest& d)
{
  auto [it, fresh] = ids_.emplace(d, static_cast<Symbol>(order_.size()));
  if (fresh)
  {
    order_.push_back(d);
  }
  return it->second;
}

Symbol DigestVocabulary::find(const Digest& d) const
{
  auto it = ids_.find(d);
  return it == ids_.end() ? unknown_id() : it->second;
}

double HashedModel::misprediction(std::span<const Digest> window) const
{
  std::size_t w = model.window();
  if (window.size() <= w)
  {
    throw ContractError("inference window must be longer than the model context");
  }
  std::vector<Symbol> dense;
  dense.reserve(window.size());
  for (const auto& d : window)
  {
    dense.push_back(vocabulary.find(d));
  }
  std::size_t miss = 0;
  for (std::size_t i = w; i < dense.size(); ++i)
  {
    miss += model.predict(std::span(dense).subspan(i - w, w)) != dense[i] ? 1 : 0;
  }
  return static_cast<double>(miss) / static_cast<double>(dense.size() - w);
}

Bytes encode_hashed_model(const HashedModel& m)
{
  ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(static_cast<std::uint32_t>(m.vocabulary.size()));
  for (const auto& d : m.vocabulary.digests())
  {
    w.bytes(d);
  }
  w.bytes(m.model.serialize());
  return std::move(w.out());
}

HashedModel decode_hashed_model(std::span<const std::uint8_t> bytes)
{
  ByteReader in(bytes, "delegated model truncated");
  expect_magic(in, kModelMagic, "delegated model");
  auto count = in.u32();
  if (count > in.remaining() / 32)
  {
    throw DecodeError("delegated model table larger than its blob");
  }
  DigestVocabulary vocab;
  for (std::uint32_t i = 0; i < count; ++i)
  {
    vocab.map(in.digest());
  }
  if (vocab.size() != count)
  {
    throw DecodeError("duplicate digest in delegated model table");
  }
  auto model = predictor::FingerprintModel::deserialize(in.bytes(in.remaining()));
  return HashedModel{std::move(vocab), std::move(model)};
}

json request_to_json(const DelegationRequest& r)
{
  return json{{"type", "delegate_request"},
              {"from", r.requester},
              {"kind", to_string(r.kind)},
              {"blob", to_hex(r.blob)},
              {"salt_fingerprint", to_hex(r.salt_fingerprint)}};
}

// --- requester --------------------------------------------------------------

Session::Session(DeviceId requester, Bytes salt)
  : requester_(std::move(requester))
  , salt_(std::move(salt))
  , fingerprint_(sha256(salt_))
{
  if (salt_.size() < 16)
  {
    throw ContractError("salt must be at least 16 bytes");
  }
}

std::vector<Digest> Session::hash(std::span<const Symbol> symbols) const
{
  return hash_symbols(symbols, salt_);
}

HashedDataset Session::make_dataset(std::span<const features::SymbolSequence> sequences, std::size_t window) const
{
  HashedDataset ds;
  ds.window = static_cast<std::uint32_t>(window);
  for (const auto& seq : sequences)
  {
    if (seq.symbols.size() <= window)
    {
      continue;
    }
    auto h = hash(seq.symbols);
    for (std::size_t i = window; i < h.size(); ++i)
    {
      ds.contexts.insert(ds.contexts.end(), h.begin() + static_cast<std::ptrdiff_t>(i - window),
                         h.begin() + static_cast<std::ptrdiff_t>(i));
      ds.labels.push_back(h[i]);
    }
  }
  if (ds.labels.empty())
  {
    throw ContractError("insufficient data");
  }
  return ds;
}

DelegationRequest Session::request(TaskKind kind, const Digest& blob) const
{
  return DelegationRequest{requester_, kind, blob, fingerprint_};
}

// --- delegate ---------------------------------------------------------------

Delegate::Delegate(DeviceId id, BlobStore& store, WireLog* log)
  : id_(std::move(id))
  , store_(&store)
  , log_(log)
{}

Digest Delegate::train(const DelegationRequest& request, const predictor::TrainConfig& config)
{
  if (request.kind != TaskKind::train)
  {
    throw ContractError("not a training request");
  }
  if (log_)
  {
    auto msg = request_to_json(request);
    msg["to"] = id_;
    log_->record(msg);
  }
  auto ds = decode_dataset(store_->fetch(request.blob));

  // Dense ids in first-seen order over (context, label) of each example.
  DigestVocabulary vocab;
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
  {
    for (std::size_t k = 0; k < ds.window; ++k)
    {
      vocab.map(ds.contexts[i * ds.window + k]);
    }
    vocab.map(ds.labels[i]);
  }
  predictor::TrainingSet ts(ds.window, vocab.size() + 1);
  std::vector<Symbol> ctx(ds.window);
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
  {
    for (std::size_t k = 0; k < ds.window; ++k)
    {
      ctx[k] = vocab.find(ds.contexts[i * ds.window + k]);
    }
    ts.add(ctx, vocab.find(ds.labels[i]));
  }
  HashedModel hm{std::move(vocab), predictor::train(ts, config)};
  auto address = store_->put(encode_hashed_model(hm));
  sessions_.insert_or_assign(request.salt_fingerprint, std::move(hm));
  if (log_)
  {
    log_->record(json{{"type", "model_ready"}, {"from", id_}, {"to", request.requester}, {"blob", to_hex(address)}});
  }
  return address;
}

void Delegate::load(const DelegationRequest& request)
{
  if (request.kind != TaskKind::infer)
  {
    throw ContractError("not an inference request");
  }
  if (log_)
  {
    auto msg = request_to_json(request);
    msg["to"] = id_;
    log_->record(msg);
  }
  sessions_.insert_or_assign(request.salt_fingerprint, decode_hashed_model(store_->fetch(request.blob)));
}

double Delegate::infer(const Digest& session, std::span<const Digest> window)
{
  auto it = sessions_.find(session);
  if (it == sessions_.end())
  {
    throw ContractError("unknown delegation session");
  }
  return it->second.misprediction(window);
}

InferenceLink::InferenceLink(Session session, Delegate& delegate, WireLog* log)
  : session_(std::move(session))
  , delegate_(&delegate)
  , log_(log)
{}

double InferenceLink::infer(std::span<const Symbol> raw_window, const ledger::Ledger& ledger, LogicalTime now)
{
  if (open_ && !(ledger.query_reliability(delegate_->id(), now) >= ledger.params().c_th))
  {
    open_ = false;
    delegate_->terminate(session_.fingerprint());
  }
  if (!open_)
  {
    throw ContractError("delegation session with '" + delegate_->id() + "' terminated");
  }
  auto hashed = session_.hash(raw_window);
  if (log_)
  {
    json window = json::array();
    for (const auto& d : hashed)
    {
      window.push_back(to_hex(d));
    }
    log_->record(json{{"type", "infer_request"},
                      {"from", session_.requester()},
                      {"to", delegate_->id()},
                      {"session", to_hex(session_.fingerprint())},
                      {"window", window}});
  }
  double mr = delegate_->infer(session_.fingerprint(), hashed);
  if (log_)
  {
    log_->record(json{{"type", "infer_reply"}, {"from", delegate_->id()}, {"to", session_.requester()}, {"m_r", mr}});
  }
  return mr;
}

// --- selection --------------------------------------------------------------

std::vector<DeviceId> eligible_delegates(const DeviceId& requester, TaskKind kind, std::size_t levels,
                                         const Neighborhood& hood, const ledger::Ledger& ledger, LogicalTime now)
{
  std::vector<DeviceId> out;
  std::set<DeviceId> seen{requester};
  std::vector<DeviceId> frontier{requester};
  for (std::size_t level = 0; level < levels && !frontier.empty(); ++level)
  {
    std::set<DeviceId> next;
    for (const auto& node : frontier)
    {
      for (const auto& n : hood.neighbors(node))
      {
        if (seen.insert(n).second)
        {
          next.insert(n);
        }
      }
    }
    for (const auto& n : next)
    {
      auto cls = hood.device_class(n);
      bool class_ok = kind == TaskKind::train ? cls == DeviceClass::powerful : cls != DeviceClass::basic;
      if (class_ok && ledger.contains(n) && ledger.query_reliability(n, now) > ledger.params().c_th)
      {
        out.push_back(n);
      }
    }
    frontier.assign(next.begin(), next.end());
  }
  return out;
}

DeviceId select_delegate(const DeviceId& requester, TaskKind kind, std::size_t levels, const Neighborhood& hood,
                         const ledger::Ledger& ledger, LogicalTime now,
                         const std::function<bool(const DeviceId&)>& accepts)
{
  for (const auto& c : eligible_delegates(requester, kind, levels, hood, ledger, now))
  {
    if (!accepts || accepts(c))
    {
      return c;
    }
  }
  throw Error("no delegate available");
}

// --- privacy scan -------------------------------------------------------------

namespace {

std::string packed(std::span<const Symbol> symbols)
{
  std::string out;
  for (auto s : symbols)
  {
    for (int i = 0; i < 4; ++i)
    {
      out.push_back(static_cast<char>((s >> (8 * i)) & 0xff));
    }
  }
  return out;
}

std::string json_array(std::span<const Symbol> symbols)
{
  std::string out = "[";
  for (std::size_t i = 0; i < symbols.size(); ++i)
  {
    out += (i ? "," : "") + std::to_string(symbols[i]);
  }
  return out + "]";
}

bool is_hex_digest(const std::string& s)
{
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

// Fixed-length substring search against a set of needles.
bool contains_any(std::string_view haystack, const std::unordered_set<std::string>& needles, std::size_t len)
{
  if (needles.empty() || haystack.size() < len)
  {
    return false;
  }
  for (std::size_t i = 0; i + len <= haystack.size(); ++i)
  {
    if (needles.count(std::string(haystack.substr(i, len))) != 0)
    {
      return true;
    }
  }
  return false;
}

void walk_strings(const json& j, const std::function<void(const std::string&)>& visit_string,
                  const std::function<void(const std::string&, const json&)>& visit_field)
{
  if (j.is_object())
  {
    for (const auto& [k, v] : j.items())
    {
      visit_field(k, v);
      visit_string(k);
      walk_strings(v, visit_string, visit_field);
    }
  }
  else if (j.is_array())
  {
    for (const auto& v : j)
    {
      walk_strings(v, visit_string, visit_field);
    }
  }
  else if (j.is_string())
  {
    visit_string(j.get<std::string>());
  }
}

}  // namespace

std::vector<PrivacyFinding> privacy_scan(const WireLog& log, const BlobStore& store, const DeviceId& target,
                                         std::span<const Symbol> raw_vocabulary,
                                         std::span<const features::SymbolSequence> raw_sequences,
                                         std::size_t window)
{
  std::unordered_set<std::string> unsalted;
  std::unordered_set<std::string> unsalted_hex;
  for (auto s : raw_vocabulary)
  {
    auto le = packed(std::span(&s, 1));
    auto d = sha256(le);
    unsalted.insert(std::string(d.begin(), d.end()));
    unsalted_hex.insert(to_hex(d));
  }
  std::unordered_set<std::string> contexts_packed;
  std::vector<std::string> contexts_json;
  for (const auto& seq : raw_sequences)
  {
    for (std::size_t i = 0; i + window <= seq.symbols.size(); ++i)
    {
      auto ctx = std::span(seq.symbols).subspan(i, window);
      contexts_packed.insert(packed(ctx));
      contexts_json.push_back(json_array(ctx));
    }
  }
  std::sort(contexts_json.begin(), contexts_json.end());
  contexts_json.erase(std::unique(contexts_json.begin(), contexts_json.end()), contexts_json.end());

  std::vector<PrivacyFinding> findings;
  std::set<std::string> scanned_blobs;
  for (std::size_t m = 0; m < log.messages().size(); ++m)
  {
    const auto& msg = log.messages()[m];
    auto flag = [&](std::string what) { findings.push_back({m, std::move(what)}); };
    std::vector<std::string> blob_refs;
    walk_strings(
      msg,
      [&](const std::string& s) {
        if (is_hex_digest(s))
        {
          if (unsalted_hex.count(s) != 0)
          {
            flag("unsalted symbol digest " + s);
          }
        }
        else if (!target.empty() && s.find(target) != std::string::npos)
        {
          flag("target id in '" + s + "'");
        }
      },
      [&](const std::string& key, const json& value) {
        if (key.find("symbol") != std::string::npos)
        {
          flag("symbol field '" + key + "'");
        }
        if (value.is_array() && std::any_of(value.begin(), value.end(), [](const json& v) { return v.is_number(); }))
        {
          flag("numeric array in '" + key + "'");
        }
        if (key == "blob" && value.is_string())
        {
          blob_refs.push_back(value.get<std::string>());
        }
      });
    auto text = msg.dump();
    for (const auto& c : contexts_json)
    {
      if (text.find(c) != std::string::npos)
      {
        flag("raw context " + c);
        break;
      }
    }
    for (const auto& ref : blob_refs)
    {
      if (!scanned_blobs.insert(ref).second)
      {
        continue;
      }
      Bytes bytes;
      try
      {
        bytes = store.fetch(digest_from_hex(ref));
      }
      catch (const Error& e)
      {
        flag(std::string("unreadable blob: ") + e.what());
        continue;
      }
      std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      if (contains_any(view, unsalted, 32))
      {
        flag("unsalted symbol digest inside blob " + ref);
      }
      // Blobs are binary containers without string fields; anything that does
      // not decode as one is reported rather than searched heuristically.
      bool dataset = false;
      bool model = false;
      try
      {
        decode_dataset(bytes);
        dataset = true;
      }
      catch (const DecodeError&)
      {
      }
      if (!dataset)
      {
        try
        {
          decode_hashed_model(bytes);
          model = true;
        }
        catch (const DecodeError&)
        {
        }
      }
      bool known = dataset || model;
      // Model tables hold the dense ids the delegate assigned itself, which may
      // coincide numerically with raw ids; only requester-built blobs are searched.
      if (!model && contains_any(view, contexts_packed, 4 * window))
      {
        flag("packed raw context inside blob " + ref);
      }
      if (!known)
      {
        flag("blob " + ref + " is not a recognised container");
      }
    }
  }
  return findings;
}

}  // namespace iottrust::delegation
