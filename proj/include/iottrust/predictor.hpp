#pragma once

#include "iottrust/common.hpp"
#include "iottrust/crypto.hpp"
#include "iottrust/features.hpp"

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace iottrust::predictor {

enum class ModelKind : std::uint8_t
{
  ngram = 1,
  recurrent = 2,
};

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

inline constexpr std::size_t kDefaultWindow = 10;

/// Stride-1 (context, next symbol) examples. Contexts are stored back to back.
class TrainingSet
{
public:
  TrainingSet(std::size_t window, std::size_t vocab_size)
    : window_(window)
    , vocab_size_(vocab_size)
  {}

  void add(std::span<const Symbol> context, Symbol label);

  std::size_t window() const { return window_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const Symbol> context(std::size_t i) const
  {
    return std::span(contexts_).subspan(i * window_, window_);
  }
  Symbol label(std::size_t i) const { return labels_[i]; }

private:
  std::size_t         window_;
  std::size_t         vocab_size_;
  std::vector<Symbol> contexts_;
  std::vector<Symbol> labels_;
};

/// Sequences of length <= window are skipped. vocab_size defaults to max id + 1 (at least 2).
TrainingSet make_training_set(std::span<const features::SymbolSequence> seqs, std::size_t window,
                              std::optional<std::size_t> vocab_size = std::nullopt);

struct TrainConfig
{
  ModelKind     kind{ModelKind::ngram};
  std::size_t   epochs{10};
  std::uint64_t seed{0};
  std::size_t   ngram_order{3};
  std::size_t   hidden{3};
  double        learning_rate{0.02};
  std::size_t   batch_size{32};
};

struct TrainingMeta
{
  std::uint32_t epochs{0};
  std::uint64_t samples{0};
  std::uint64_t seed{0};

  bool operator==(const TrainingMeta&) const = default;
};

/// Conditional next-symbol tables with suffix back-off.
struct NgramTables
{
  std::uint32_t order{3};
  Symbol        global_mode{0};
  // levels[l] holds contexts of length l + 1
  std::vector<std::map<std::vector<Symbol>, Symbol>> levels;
};

/// Single gated recurrent layer over one-hot inputs plus a dense softmax head.
struct GruWeights
{
  std::uint32_t       hidden{3};
  std::vector<double> params;
};

class FingerprintModel
{
public:
  FingerprintModel(std::size_t vocab_size, std::size_t window, TrainingMeta meta, NgramTables tables);
  FingerprintModel(std::size_t vocab_size, std::size_t window, TrainingMeta meta, GruWeights weights);

  ModelKind kind() const;
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t window() const { return window_; }
  const TrainingMeta& meta() const { return meta_; }

  /// Argmax next symbol, lowest id on ties. Context length must equal window().
  Symbol predict(std::span<const Symbol> context) const;

  Bytes serialize() const;
  static FingerprintModel deserialize(std::span<const std::uint8_t> bytes);

  const NgramTables* ngram() const { return std::get_if<NgramTables>(&body_); }
  const GruWeights* gru() const { return std::get_if<GruWeights>(&body_); }

private:
  std::size_t                            vocab_size_;
  std::size_t                            window_;
  TrainingMeta                           meta_;
  std::variant<NgramTables, GruWeights> body_;
};

FingerprintModel train(const TrainingSet& ts, const TrainConfig& config);

/// Fraction of examples whose label the model predicts.
double accuracy(const FingerprintModel& model, const TrainingSet& ts);

namespace gru_detail {

/// Parameter count for a GRU of the given shape.
std::size_t parameter_count(std::size_t vocab_size, std::size_t hidden);

/// Cross-entropy loss of one example. When grad is given it is overwritten with
/// the gradient with respect to every parameter.
double loss_and_gradient(const GruWeights& w, std::size_t vocab_size, std::span<const Symbol> context,
                         Symbol label, std::vector<double>* grad);

}  // namespace gru_detail

}  // namespace iottrust::predictor
