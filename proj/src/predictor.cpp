#include "iottrust/predictor.hpp"

#include "byte_io.hpp"

#include "iottrust/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace iottrust::predictor {

ModelKind parse_model_kind(std::string_view name)
{
  if (name == "ngram")
  {
    return ModelKind::ngram;
  }
  if (name == "recurrent" || name == "gru")
  {
    return ModelKind::recurrent;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind)
{
  return kind == ModelKind::ngram ? "ngram" : "recurrent";
}

void TrainingSet::add(std::span<const Symbol> context, Symbol label)
{
  if (context.size() != window_)
  {
    throw ContractError("context length differs from window");
  }
  contexts_.insert(contexts_.end(), context.begin(), context.end());
  labels_.push_back(label);
}

TrainingSet make_training_set(std::span<const features::SymbolSequence> seqs, std::size_t window,
                              std::optional<std::size_t> vocab_size)
{
  if (window < 1)
  {
    throw ContractError("window must be at least 1");
  }
  std::size_t max_id = 0;
  bool any = false;
  for (const auto& s : seqs)
  {
    if (s.symbols.size() <= window)
    {
      continue;
    }
    any = true;
    max_id = std::max<std::size_t>(max_id, *std::max_element(s.symbols.begin(), s.symbols.end()));
  }
  if (!any)
  {
    throw ContractError("insufficient data");
  }
  std::size_t vsize = vocab_size.value_or(std::max<std::size_t>(max_id + 1, 2));
  if (vsize <= max_id)
  {
    throw ContractError("symbol id exceeds vocabulary size");
  }

  TrainingSet ts(window, vsize);
  for (const auto& s : seqs)
  {
    std::span<const Symbol> sym(s.symbols);
    for (std::size_t i = window; i < sym.size(); ++i)
    {
      ts.add(sym.subspan(i - window, window), sym[i]);
    }
  }
  return ts;
}

namespace {

// --- n-gram ---------------------------------------------------------------

using Counts = std::map<Symbol, std::uint64_t>;

Symbol argmax(const Counts& counts)
{
  Symbol best = 0;
  std::uint64_t best_count = 0;
  for (const auto& [sym, n] : counts)  // ascending ids: strict > keeps the lowest on ties
  {
    if (n > best_count)
    {
      best = sym;
      best_count = n;
    }
  }
  return best;
}

NgramTables train_ngram(const TrainingSet& ts, std::size_t order)
{
  order = std::min(order, ts.window());
  std::vector<std::map<std::vector<Symbol>, Counts>> counts(order);
  Counts global;
  for (std::size_t i = 0; i < ts.size(); ++i)
  {
    auto ctx = ts.context(i);
    Symbol y = ts.label(i);
    ++global[y];
    for (std::size_t len = 1; len <= order; ++len)
    {
      std::vector<Symbol> key(ctx.end() - static_cast<std::ptrdiff_t>(len), ctx.end());
      ++counts[len - 1][key][y];
    }
  }
  NgramTables tables;
  tables.order = static_cast<std::uint32_t>(order);
  tables.global_mode = argmax(global);
  tables.levels.resize(order);
  for (std::size_t l = 0; l < order; ++l)
  {
    for (const auto& [key, c] : counts[l])
    {
      tables.levels[l].emplace(key, argmax(c));
    }
  }
  return tables;
}

Symbol predict_ngram(const NgramTables& t, std::span<const Symbol> ctx)
{
  std::vector<Symbol> key;
  for (std::size_t len = t.order; len >= 1; --len)
  {
    key.assign(ctx.end() - static_cast<std::ptrdiff_t>(len), ctx.end());
    const auto& level = t.levels[len - 1];
    auto it = level.find(key);
    if (it != level.end())
    {
      return it->second;
    }
  }
  return t.global_mode;
}

// --- GRU ------------------------------------------------------------------

struct GruLayout
{
  std::size_t V, H;
  std::size_t wz, wr, wn, uz, ur, un, bz, br, bn, wo, bo, total;

  GruLayout(std::size_t vocab, std::size_t hidden)
    : V(vocab)
    , H(hidden)
  {
    wz = 0;
    wr = wz + H * V;
    wn = wr + H * V;
    uz = wn + H * V;
    ur = uz + H * H;
    un = ur + H * H;
    bz = un + H * H;
    br = bz + H;
    bn = br + H;
    wo = bn + H;
    bo = wo + V * H;
    total = bo + V;
  }
};

double sigmoid(double x)
{
  return 1.0 / (1.0 + std::exp(-x));
}

struct StepCache
{
  std::vector<double> h_prev, z, r, n, h;
  Symbol              x;
};

// Runs the recurrence; returns output logits and fills the per-step cache when requested.
std::vector<double> gru_forward(const GruLayout& L, const std::vector<double>& p, std::span<const Symbol> ctx,
                                std::vector<StepCache>* cache)
{
  std::vector<double> h(L.H, 0.0);
  for (Symbol x : ctx)
  {
    StepCache step{h, std::vector<double>(L.H), std::vector<double>(L.H), std::vector<double>(L.H), {}, x};
    bool in_vocab = x < L.V;
    for (std::size_t i = 0; i < L.H; ++i)
    {
      double az = in_vocab ? p[L.wz + i * L.V + x] : 0.0;
      double ar = in_vocab ? p[L.wr + i * L.V + x] : 0.0;
      double sz = az + p[L.bz + i];
      double sr = ar + p[L.br + i];
      for (std::size_t j = 0; j < L.H; ++j)
      {
        sz += p[L.uz + i * L.H + j] * h[j];
        sr += p[L.ur + i * L.H + j] * h[j];
      }
      step.z[i] = sigmoid(sz);
      step.r[i] = sigmoid(sr);
    }
    for (std::size_t i = 0; i < L.H; ++i)
    {
      double sn = (in_vocab ? p[L.wn + i * L.V + x] : 0.0) + p[L.bn + i];
      for (std::size_t j = 0; j < L.H; ++j)
      {
        sn += p[L.un + i * L.H + j] * step.r[j] * h[j];
      }
      step.n[i] = std::tanh(sn);
    }
    std::vector<double> next(L.H);
    for (std::size_t i = 0; i < L.H; ++i)
    {
      next[i] = (1.0 - step.z[i]) * step.n[i] + step.z[i] * h[i];
    }
    h = next;
    if (cache)
    {
      step.h = h;
      cache->push_back(std::move(step));
    }
  }
  std::vector<double> logits(L.V);
  for (std::size_t v = 0; v < L.V; ++v)
  {
    double s = p[L.bo + v];
    for (std::size_t i = 0; i < L.H; ++i)
    {
      s += p[L.wo + v * L.H + i] * h[i];
    }
    logits[v] = s;
  }
  if (cache && cache->empty())
  {
    cache->push_back(StepCache{h, {}, {}, {}, h, 0});
  }
  return logits;
}

Symbol argmax_logits(const std::vector<double>& logits)
{
  std::size_t best = 0;
  for (std::size_t v = 1; v < logits.size(); ++v)
  {
    if (logits[v] > logits[best])
    {
      best = v;
    }
  }
  return static_cast<Symbol>(best);
}

GruWeights train_gru(const TrainingSet& ts, const TrainConfig& cfg)
{
  GruLayout L(ts.vocab_size(), cfg.hidden);
  GruWeights w;
  w.hidden = static_cast<std::uint32_t>(cfg.hidden);
  w.params.resize(L.total);
  Rng rng = Rng(cfg.seed).split("gru-init");
  double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  for (auto& v : w.params)
  {
    v = rng.uniform(-scale, scale);
  }
  for (std::size_t v = 0; v < L.V; ++v)
  {
    w.params[L.bo + v] = 0.0;
  }

  // Adam
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  std::vector<double> m(L.total, 0.0), s(L.total, 0.0), grad(L.total), batch_grad(L.total);
  std::uint64_t step = 0;

  std::vector<std::size_t> order(ts.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = Rng(cfg.seed).split("gru-shuffle");
  std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
  {
    for (std::size_t i = order.size(); i > 1; --i)
    {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, i - 1)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch)
    {
      std::size_t end = std::min(order.size(), start + batch);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k)
      {
        gru_detail::loss_and_gradient(w, L.V, ts.context(order[k]), ts.label(order[k]), &grad);
        for (std::size_t q = 0; q < L.total; ++q)
        {
          batch_grad[q] += grad[q];
        }
      }
      double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t q = 0; q < L.total; ++q)
      {
        double g = batch_grad[q] * inv;
        m[q] = beta1 * m[q] + (1.0 - beta1) * g;
        s[q] = beta2 * s[q] + (1.0 - beta2) * g * g;
        w.params[q] -= cfg.learning_rate * (m[q] / c1) / (std::sqrt(s[q] / c2) + eps);
      }
    }
  }
  return w;
}

// --- container ------------------------------------------------------------

constexpr std::array<std::uint8_t, 4> kMagic{'I', 'F', 'P', 'M'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

namespace gru_detail {

std::size_t parameter_count(std::size_t vocab_size, std::size_t hidden)
{
  return GruLayout(vocab_size, hidden).total;
}

double loss_and_gradient(const GruWeights& w, std::size_t vocab_size, std::span<const Symbol> context,
                         Symbol label, std::vector<double>* grad)
{
  GruLayout L(vocab_size, w.hidden);
  const auto& p = w.params;
  std::vector<StepCache> cache;
  auto logits = gru_forward(L, p, context, &cache);
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> prob(L.V);
  double z = 0.0;
  for (std::size_t v = 0; v < L.V; ++v)
  {
    prob[v] = std::exp(logits[v] - mx);
    z += prob[v];
  }
  for (auto& q : prob)
  {
    q /= z;
  }
  double loss = -std::log(std::max(prob[label], 1e-300));
  if (!grad)
  {
    return loss;
  }
  auto& g = *grad;
  g.assign(L.total, 0.0);
  const auto& h_last = cache.back().h;
  std::vector<double> dh(L.H, 0.0);
  for (std::size_t v = 0; v < L.V; ++v)
  {
    double dl = prob[v] - (v == label ? 1.0 : 0.0);
    g[L.bo + v] += dl;
    for (std::size_t i = 0; i < L.H; ++i)
    {
      g[L.wo + v * L.H + i] += dl * h_last[i];
      dh[i] += p[L.wo + v * L.H + i] * dl;
    }
  }
  if (context.empty())
  {
    return loss;
  }
  for (std::size_t t = cache.size(); t-- > 0;)
  {
    const auto& c = cache[t];
    bool in_vocab = c.x < L.V;
    std::vector<double> dh_prev(L.H, 0.0), dpre_n(L.H), dpre_z(L.H), dpre_r(L.H), drh(L.H, 0.0);
    for (std::size_t i = 0; i < L.H; ++i)
    {
      double dn = dh[i] * (1.0 - c.z[i]);
      double dz = dh[i] * (c.h_prev[i] - c.n[i]);
      dh_prev[i] += dh[i] * c.z[i];
      dpre_n[i] = dn * (1.0 - c.n[i] * c.n[i]);
      dpre_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
    }
    for (std::size_t i = 0; i < L.H; ++i)
    {
      if (in_vocab)
      {
        g[L.wn + i * L.V + c.x] += dpre_n[i];
      }
      g[L.bn + i] += dpre_n[i];
      for (std::size_t j = 0; j < L.H; ++j)
      {
        g[L.un + i * L.H + j] += dpre_n[i] * c.r[j] * c.h_prev[j];
        drh[j] += p[L.un + i * L.H + j] * dpre_n[i];
      }
    }
    for (std::size_t j = 0; j < L.H; ++j)
    {
      double dr = drh[j] * c.h_prev[j];
      dh_prev[j] += drh[j] * c.r[j];
      dpre_r[j] = dr * c.r[j] * (1.0 - c.r[j]);
    }
    for (std::size_t i = 0; i < L.H; ++i)
    {
      if (in_vocab)
      {
        g[L.wz + i * L.V + c.x] += dpre_z[i];
        g[L.wr + i * L.V + c.x] += dpre_r[i];
      }
      g[L.bz + i] += dpre_z[i];
      g[L.br + i] += dpre_r[i];
      for (std::size_t j = 0; j < L.H; ++j)
      {
        g[L.uz + i * L.H + j] += dpre_z[i] * c.h_prev[j];
        g[L.ur + i * L.H + j] += dpre_r[i] * c.h_prev[j];
        dh_prev[j] += p[L.uz + i * L.H + j] * dpre_z[i] + p[L.ur + i * L.H + j] * dpre_r[i];
      }
    }
    dh = dh_prev;
  }
  return loss;
}

}  // namespace gru_detail

FingerprintModel::FingerprintModel(std::size_t vocab_size, std::size_t window, TrainingMeta meta,
                                   NgramTables tables)
  : vocab_size_(vocab_size)
  , window_(window)
  , meta_(meta)
  , body_(std::move(tables))
{
  if (window_ < 1 || vocab_size_ < 2)
  {
    throw ContractError("model requires window >= 1 and vocab_size >= 2");
  }
}

FingerprintModel::FingerprintModel(std::size_t vocab_size, std::size_t window, TrainingMeta meta,
                                   GruWeights weights)
  : vocab_size_(vocab_size)
  , window_(window)
  , meta_(meta)
  , body_(std::move(weights))
{
  if (window_ < 1 || vocab_size_ < 2)
  {
    throw ContractError("model requires window >= 1 and vocab_size >= 2");
  }
  if (std::get<GruWeights>(body_).params.size() != gru_detail::parameter_count(vocab_size_, gru()->hidden))
  {
    throw DecodeError("recurrent parameter count mismatch");
  }
}

ModelKind FingerprintModel::kind() const
{
  return std::holds_alternative<NgramTables>(body_) ? ModelKind::ngram : ModelKind::recurrent;
}

Symbol FingerprintModel::predict(std::span<const Symbol> context) const
{
  if (context.size() != window_)
  {
    throw ContractError("context length " + std::to_string(context.size()) + " differs from model window " +
                        std::to_string(window_));
  }
  if (const auto* t = ngram())
  {
    return predict_ngram(*t, context);
  }
  const auto* w = gru();
  return argmax_logits(gru_forward(GruLayout(vocab_size_, w->hidden), w->params, context, nullptr));
}

Bytes FingerprintModel::serialize() const
{
  ByteWriter payload;
  if (const auto* t = ngram())
  {
    payload.u32(t->order);
    payload.u32(t->global_mode);
    for (const auto& level : t->levels)
    {
      payload.u32(static_cast<std::uint32_t>(level.size()));
      for (const auto& [key, next] : level)
      {
        for (auto s : key)
        {
          payload.u32(s);
        }
        payload.u32(next);
      }
    }
  }
  else
  {
    const auto* w = gru();
    payload.u32(w->hidden);
    for (double v : w->params)
    {
      payload.f64(v);
    }
  }

  ByteWriter out;
  out.bytes(kMagic);
  out.u16(kVersion);
  out.u8(static_cast<std::uint8_t>(kind()));
  out.u8(0);
  out.u32(static_cast<std::uint32_t>(vocab_size_));
  out.u32(static_cast<std::uint32_t>(window_));
  out.u32(meta_.epochs);
  out.u64(meta_.samples);
  out.u64(meta_.seed);
  out.u64(payload.out().size());
  out.bytes(payload.out());
  auto check = sha256(out.out());
  out.bytes(check);
  return std::move(out.out());
}

FingerprintModel FingerprintModel::deserialize(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 32)
  {
    throw DecodeError("model data truncated");
  }
  auto body = bytes.first(bytes.size() - 32);
  auto check = sha256(body);
  if (!std::equal(check.begin(), check.end(), bytes.end() - 32))
  {
    throw DecodeError("model checksum mismatch");
  }
  ByteReader in(body, "model data truncated");
  auto magic = in.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin()))
  {
    throw DecodeError("not a fingerprint model");
  }
  auto version = in.u16();
  if (version != kVersion)
  {
    throw DecodeError("unsupported model version " + std::to_string(version));
  }
  auto kind = in.u8();
  in.u8();
  std::size_t vocab_size = in.u32();
  std::size_t window = in.u32();
  TrainingMeta meta;
  meta.epochs = in.u32();
  meta.samples = in.u64();
  meta.seed = in.u64();
  auto payload_len = in.u64();
  ByteReader p(in.bytes(payload_len), "model data truncated");
  if (!in.done())
  {
    throw DecodeError("trailing bytes after model payload");
  }

  if (kind == static_cast<std::uint8_t>(ModelKind::ngram))
  {
    NgramTables t;
    t.order = p.u32();
    t.global_mode = p.u32();
    if (t.order == 0 || t.order > window)
    {
      throw DecodeError("invalid n-gram order");
    }
    t.levels.resize(t.order);
    for (std::size_t l = 0; l < t.order; ++l)
    {
      auto count = p.u32();
      for (std::uint32_t e = 0; e < count; ++e)
      {
        std::vector<Symbol> key(l + 1);
        for (auto& s : key)
        {
          s = p.u32();
        }
        t.levels[l].emplace(std::move(key), p.u32());
      }
    }
    if (!p.done())
    {
      throw DecodeError("trailing bytes in n-gram payload");
    }
    return FingerprintModel(vocab_size, window, meta, std::move(t));
  }
  if (kind == static_cast<std::uint8_t>(ModelKind::recurrent))
  {
    GruWeights w;
    w.hidden = p.u32();
    auto n = gru_detail::parameter_count(vocab_size, w.hidden);
    w.params.resize(n);
    for (auto& v : w.params)
    {
      v = p.f64();
    }
    if (!p.done())
    {
      throw DecodeError("trailing bytes in recurrent payload");
    }
    return FingerprintModel(vocab_size, window, meta, std::move(w));
  }
  throw DecodeError("unknown model kind tag " + std::to_string(kind));
}

FingerprintModel train(const TrainingSet& ts, const TrainConfig& config)
{
  if (ts.empty())
  {
    throw ContractError("empty training set");
  }
  TrainingMeta meta{static_cast<std::uint32_t>(config.epochs), ts.size(), config.seed};
  switch (config.kind)
  {
    case ModelKind::ngram:
      if (config.ngram_order < 1)
      {
        throw ConfigError("ngram order must be at least 1");
      }
      return FingerprintModel(ts.vocab_size(), ts.window(), meta, train_ngram(ts, config.ngram_order));
    case ModelKind::recurrent:
      if (config.hidden < 1)
      {
        throw ConfigError("hidden size must be at least 1");
      }
      return FingerprintModel(ts.vocab_size(), ts.window(), meta, train_gru(ts, config));
  }
  throw ConfigError("unknown model kind");
}

double accuracy(const FingerprintModel& model, const TrainingSet& ts)
{
  if (ts.empty())
  {
    return 0.0;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ts.size(); ++i)
  {
    hits += model.predict(ts.context(i)) == ts.label(i) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(ts.size());
}

}  // namespace iottrust::predictor
