#include "eve/hft.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "eve/errors.hpp"
#include "json.hpp"

namespace eve {

std::vector<double> dft_first_p(std::span<const double> signal, std::size_t p) {
  if (signal.empty()) throw ArgumentError("dft_first_p: empty signal");
  if (p < 1) throw ArgumentError("dft_first_p: p must be >= 1");

  const std::size_t n = std::max(signal.size(), p);  // zero-padded length
  std::vector<double> magnitudes(p);
  for (std::size_t k = 0; k < p; ++k) {
    // Goertzel: s_t = x_t + 2 cos(w) s_{t-1} - s_{t-2};
    // |c_k|^2 = s_{N-1}^2 + s_{N-2}^2 - 2 cos(w) s_{N-1} s_{N-2}.
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    const double coeff = 2.0 * std::cos(w);
    double s_prev = 0.0, s_prev2 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double x = t < signal.size() ? signal[t] : 0.0;
      const double s = x + coeff * s_prev - s_prev2;
      s_prev2 = s_prev;
      s_prev = s;
    }
    magnitudes[k] =
        std::sqrt(std::max(0.0, s_prev * s_prev + s_prev2 * s_prev2 - coeff * s_prev * s_prev2));
  }
  return magnitudes;
}

std::array<SegmentRange, HftConfig::kSegments> pyramid_segments(std::size_t T) {
  if (T < 4) throw ArgumentError("pyramid_segments: T must be >= 4, got " + std::to_string(T));
  auto split = [](SegmentRange r) {
    const std::size_t mid = r.begin + r.size() / 2;
    return std::array<SegmentRange, 2>{SegmentRange{r.begin, mid}, SegmentRange{mid, r.end}};
  };
  const SegmentRange whole{0, T};
  const auto halves = split(whole);
  const auto q1 = split(halves[0]);
  const auto q2 = split(halves[1]);
  return {whole, halves[0], halves[1], q1[0], q1[1], q2[0], q2[1]};
}

std::vector<double> encode_neuron(std::span<const double> series, const HftConfig& cfg) {
  const auto segments = pyramid_segments(series.size());
  std::vector<double> code;
  code.reserve(HftConfig::kSegments * cfg.p);
  for (const auto& seg : segments) {
    auto part = dft_first_p(series.subspan(seg.begin, seg.size()), cfg.p);
    code.insert(code.end(), part.begin(), part.end());
  }
  return code;
}

TemporalCode encode_activations(const ActivationSeries& series, const HftConfig& cfg) {
  if (series.rows < 4)
    throw ArgumentError("encode_activations: need T >= 4 timesteps, got " +
                        std::to_string(series.rows));
  if (series.cols < 1) throw ArgumentError("encode_activations: no neurons");
  if (series.values.size() != series.rows * series.cols)
    throw DimensionError("encode_activations: values size does not match T x m");

  TemporalCode code;
  code.video_id = series.video_id;
  code.source = series.source;
  code.p = cfg.p;
  code.neurons = series.cols;
  code.values.resize(HftConfig::kSegments * cfg.p * series.cols);

  std::vector<double> neuron(series.rows);
  const std::size_t block = HftConfig::kSegments * cfg.p;
  for (std::size_t j = 0; j < series.cols; ++j) {
    for (std::size_t t = 0; t < series.rows; ++t) neuron[t] = series.at(t, j);
    auto encoded = encode_neuron(neuron, cfg);
    std::copy(encoded.begin(), encoded.end(), code.values.begin() + static_cast<long>(j * block));
  }
  return code;
}

void write_temporal_code(const TemporalCode& code, const std::filesystem::path& path) {
  if (code.values.size() != HftConfig::kSegments * code.p * code.neurons)
    throw DimensionError("write_temporal_code: values length != 7*p*neurons");

  ActivationSeries row;
  row.video_id = code.video_id;
  row.source = code.source;
  row.rows = 1;
  row.cols = code.values.size();
  row.values.assign(code.values.begin(), code.values.end());
  write_tensor(row, path);

  nlohmann::json manifest{{"video_id", code.video_id}, {"p", code.p}, {"m", code.neurons}};
  const std::filesystem::path sidecar = path.string() + ".json";
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw ValidationError(sidecar.string() + ": cannot open for writing");
  out << manifest.dump() << '\n';
}

TemporalCode read_temporal_code(const std::filesystem::path& path) {
  const ActivationSeries row = read_tensor(path);
  if (row.rows != 1) throw FormatError(path.string() + ": temporal code must be a single row");

  const std::filesystem::path sidecar = path.string() + ".json";
  std::ifstream in(sidecar);
  if (!in) throw FormatError(sidecar.string() + ": cannot open sidecar manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(sidecar.string() + ": " + e.what());
  }

  TemporalCode code;
  code.video_id = manifest.at("video_id").get<std::string>();
  code.source = row.source;
  code.p = manifest.at("p").get<std::size_t>();
  code.neurons = manifest.at("m").get<std::size_t>();
  if (row.cols != HftConfig::kSegments * code.p * code.neurons)
    throw FormatError(path.string() + ": tensor length does not match the sidecar p and m");
  code.values.assign(row.values.begin(), row.values.end());
  return code;
}

}  // namespace eve
