#include "iottrust/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace iottrust::anomaly {

PredictionTrace predict_stream(const predictor::FingerprintModel& model, std::span<const Symbol> symbols)
{
  PredictionTrace t{std::vector<bool>(symbols.size(), false), std::vector<bool>(symbols.size(), false)};
  std::size_t w = model.window();
  for (std::size_t i = w; i < symbols.size(); ++i)
  {
    t.predicted[i] = true;
    t.hit[i] = model.predict(symbols.subspan(i - w, w)) == symbols[i];
  }
  return t;
}

std::vector<WindowVerdict> scan_trace(const PredictionTrace& trace, std::size_t window_size,
                                      double anomaly_threshold)
{
  if (!(anomaly_threshold > 0.0 && anomaly_threshold < 1.0))
  {
    throw ContractError("anomaly threshold must lie in (0, 1)");
  }
  if (window_size == 0)
  {
    throw ContractError("window size must be positive");
  }
  std::size_t n = trace.predicted.size();
  if (n < window_size)
  {
    return {};
  }
  std::vector<std::size_t> pred(n + 1, 0), miss(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
  {
    pred[i + 1] = pred[i] + (trace.predicted[i] ? 1 : 0);
    miss[i + 1] = miss[i] + (trace.predicted[i] && !trace.hit[i] ? 1 : 0);
  }
  std::vector<WindowVerdict> out;
  out.reserve(n - window_size + 1);
  for (std::size_t j = 0; j + window_size <= n; ++j)
  {
    auto p = pred[j + window_size] - pred[j];
    if (p == 0)
    {
      continue;
    }
    double mr = static_cast<double>(miss[j + window_size] - miss[j]) / static_cast<double>(p);
    out.push_back({j, mr, mr > anomaly_threshold});
  }
  return out;
}

std::vector<WindowVerdict> scan(const predictor::FingerprintModel& model, std::span<const Symbol> symbols,
                                std::size_t window_size, double anomaly_threshold)
{
  if (window_size < model.window() + 1)
  {
    throw ContractError("window size must exceed the model context length");
  }
  return scan_trace(predict_stream(model, symbols), window_size, anomaly_threshold);
}

std::optional<std::size_t> first_sustained(std::span<const WindowVerdict> verdicts, std::size_t sustain)
{
  std::size_t run = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i)
  {
    run = verdicts[i].anomalous ? run + 1 : 0;
    if (run >= std::max<std::size_t>(sustain, 1))
    {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<double> sequence_misprediction(const predictor::FingerprintModel& model,
                                             std::span<const Symbol> symbols, std::size_t window_size)
{
  if (symbols.size() <= model.window())
  {
    return std::nullopt;
  }
  auto trace = predict_stream(model, symbols);
  if (symbols.size() < window_size)
  {
    std::size_t p = 0, m = 0;
    for (std::size_t i = 0; i < symbols.size(); ++i)
    {
      p += trace.predicted[i] ? 1 : 0;
      m += trace.predicted[i] && !trace.hit[i] ? 1 : 0;
    }
    return static_cast<double>(m) / static_cast<double>(p);
  }
  auto verdicts = scan_trace(trace, window_size, kDefaultThreshold);
  double sum = 0.0;
  for (const auto& v : verdicts)
  {
    sum += v.misprediction_rate;
  }
  return sum / static_cast<double>(verdicts.size());
}

TrustScore trust_score(const predictor::FingerprintModel& model,
                       std::span<const features::SymbolSequence> recent_sequences, std::size_t k,
                       std::size_t window_size, const DeviceId& evaluator, const DeviceId& target)
{
  if (k < 1)
  {
    throw ContractError("k must be at least 1");
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (auto it = recent_sequences.rbegin(); it != recent_sequences.rend() && used < k; ++it)
  {
    auto mr = sequence_misprediction(model, it->symbols, window_size);
    if (mr)
    {
      sum += *mr;
      ++used;
    }
  }
  if (used == 0)
  {
    throw ContractError("insufficient traffic");
  }
  return TrustScore{evaluator, target, 1.0 - sum / static_cast<double>(used), used};
}

KneeResult kneedle(std::span<const Point> points, Direction direction, Curvature curvature)
{
  if (points.size() < 3)
  {
    throw ContractError("kneedle needs at least 3 points");
  }
  for (std::size_t i = 1; i < points.size(); ++i)
  {
    if (!(points[i].x > points[i - 1].x))
    {
      throw ContractError("kneedle x values must be strictly increasing");
    }
  }
  double x0 = points.front().x;
  double x1 = points.back().x;
  auto [ymin_it, ymax_it] =
    std::minmax_element(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.y < b.y; });
  double y0 = ymin_it->y;
  double yr = ymax_it->y - y0;

  KneeResult r;
  r.difference.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    double xn = (points[i].x - x0) / (x1 - x0);
    if (!(yr > 0.0))
    {
      r.difference[i] = 0.0;
      continue;
    }
    double yn = (points[i].y - y0) / yr;
    // Distance from the chord joining the normalized end points, signed so the
    // knee side is positive.
    double d = 0.0;
    if (direction == Direction::increasing)
    {
      d = curvature == Curvature::concave ? yn - xn : xn - yn;
    }
    else
    {
      d = curvature == Curvature::convex ? (1.0 - xn) - yn : yn - (1.0 - xn);
    }
    r.difference[i] = d;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
  {
    if (r.difference[i] > r.difference[best])
    {
      best = i;
    }
  }
  r.degenerate = !(r.difference[best] > 1e-12);
  r.index = r.degenerate ? 0 : best;
  r.x = points[r.index].x;
  return r;
}

double amplitude(const PredictionTrace& trace, std::size_t window_size)
{
  auto verdicts = scan_trace(trace, window_size, kDefaultThreshold);
  if (verdicts.empty())
  {
    throw ContractError("calibration stream shorter than window size " + std::to_string(window_size));
  }
  auto [lo, hi] = std::minmax_element(verdicts.begin(), verdicts.end(), [](const auto& a, const auto& b) {
    return a.misprediction_rate < b.misprediction_rate;
  });
  return hi->misprediction_rate - lo->misprediction_rate;
}

WindowSelection select_from_amplitudes(std::span<const std::size_t> candidate_sizes,
                                       std::span<const double> amplitudes)
{
  if (candidate_sizes.size() < 3)
  {
    throw ContractError("at least 3 candidate window sizes required");
  }
  if (amplitudes.size() != candidate_sizes.size())
  {
    throw ContractError("one amplitude per candidate size required");
  }
  std::vector<Point> pts;
  for (std::size_t i = 0; i < candidate_sizes.size(); ++i)
  {
    pts.push_back({static_cast<double>(candidate_sizes[i]), amplitudes[i]});
  }
  auto knee = kneedle(pts, Direction::decreasing, Curvature::convex);
  WindowSelection sel;
  sel.amplitudes.assign(amplitudes.begin(), amplitudes.end());
  sel.flat = knee.degenerate;
  sel.window_size = candidate_sizes[knee.index];
  return sel;
}

WindowSelection select_window_size(const predictor::FingerprintModel& model,
                                   std::span<const Symbol> calibration_stream,
                                   std::span<const std::size_t> candidate_sizes)
{
  if (candidate_sizes.size() < 3)
  {
    throw ContractError("at least 3 candidate window sizes required");
  }
  auto trace = predict_stream(model, calibration_stream);
  std::vector<double> amps;
  for (auto size : candidate_sizes)
  {
    if (size < model.window() + 1)
    {
      throw ContractError("candidate window size must exceed the model context length");
    }
    amps.push_back(amplitude(trace, size));
  }
  return select_from_amplitudes(candidate_sizes, amps);
}

void write_verdicts_csv(std::ostream& out, std::span<const WindowVerdict> verdicts)
{
  out << "window_index,m_r,anomalous\n";
  char buf[64];
  for (const auto& v : verdicts)
  {
    std::snprintf(buf, sizeof buf, "%.17g", v.misprediction_rate);
    out << v.window_index << ',' << buf << ',' << (v.anomalous ? 1 : 0) << '\n';
  }
}

}  // namespace iottrust::anomaly
