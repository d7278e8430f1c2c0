#pragma once

#include "iottrust/features.hpp"
#include "iottrust/predictor.hpp"

#include <ostream>
#include <span>
#include <vector>

namespace iottrust::anomaly {

inline constexpr std::size_t kDefaultWindowSize = 100;
inline constexpr double      kDefaultThreshold = 0.5;
inline constexpr std::size_t kDefaultRecentSequences = 5;

struct WindowVerdict
{
  std::size_t window_index{0};
  double      misprediction_rate{0.0};
  bool        anomalous{false};
};

/// Per-position hit flags: hits[i] is set when position i was predicted correctly.
/// Positions before model.window() are not predictable and are reported as unset
/// in `predicted`.
struct PredictionTrace
{
  std::vector<bool> predicted;
  std::vector<bool> hit;
};

PredictionTrace predict_stream(const predictor::FingerprintModel& model, std::span<const Symbol> symbols);

/// Sliding windows of window_size symbols, stride 1. Contexts reach back across
/// the window start into the preceding stream.
std::vector<WindowVerdict> scan(const predictor::FingerprintModel& model, std::span<const Symbol> symbols,
                                std::size_t window_size, double anomaly_threshold);

/// Same windowing over precomputed hits.
std::vector<WindowVerdict> scan_trace(const PredictionTrace& trace, std::size_t window_size,
                                      double anomaly_threshold);

/// Index of the first window that completes a run of `sustain` consecutive anomalous windows.
std::optional<std::size_t> first_sustained(std::span<const WindowVerdict> verdicts, std::size_t sustain);

struct TrustScore
{
  DeviceId    evaluator;
  DeviceId    target;
  double      value{0.0};
  std::size_t k_sequences{0};
};

/// Mean misprediction rate of one sequence over its windows. A sequence shorter
/// than window_size counts as a single window over all of its predictable positions.
std::optional<double> sequence_misprediction(const predictor::FingerprintModel& model,
                                             std::span<const Symbol> symbols, std::size_t window_size);

/// 1 - mean misprediction over the k most recent sequences that have predictable positions.
TrustScore trust_score(const predictor::FingerprintModel& model,
                       std::span<const features::SymbolSequence> recent_sequences, std::size_t k,
                       std::size_t window_size, const DeviceId& evaluator = {}, const DeviceId& target = {});

enum class Direction
{
  increasing,
  decreasing,
};

enum class Curvature
{
  concave,
  convex,
};

struct Point
{
  double x;
  double y;
};

struct KneeResult
{
  double      x{0.0};
  std::size_t index{0};
  bool        degenerate{false};
  std::vector<double> difference;  // normalized distance from the chord, per point
};

/// Knee of a sampled curve via the normalized difference curve. No smoothing.
KneeResult kneedle(std::span<const Point> points, Direction direction, Curvature curvature);

struct WindowSelection
{
  std::size_t         window_size{0};
  std::vector<double> amplitudes;
  bool                flat{false};
};

/// Peak-to-peak amplitude of the misprediction curve for one window size.
double amplitude(const PredictionTrace& trace, std::size_t window_size);

WindowSelection select_window_size(const predictor::FingerprintModel& model,
                                   std::span<const Symbol> calibration_stream,
                                   std::span<const std::size_t> candidate_sizes);

/// Kneedle stage of window selection on precomputed amplitudes.
WindowSelection select_from_amplitudes(std::span<const std::size_t> candidate_sizes,
                                       std::span<const double> amplitudes);

/// CSV with header `window_index,m_r,anomalous`.
void write_verdicts_csv(std::ostream& out, std::span<const WindowVerdict> verdicts);

}  // namespace iottrust::anomaly
