#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eve/ingest.hpp"

namespace eve {

/// Hierarchical Fourier encoding over a 3-level temporal pyramid
/// (1 + 2 + 4 = 7 segments), p magnitude coefficients per segment.
struct HftConfig {
  std::size_t p = 4;
  static constexpr std::size_t kSegments = 7;
};

struct SegmentRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open
  std::size_t size() const { return end - begin; }
  bool operator==(const SegmentRange&) const = default;
};

/// Per-video temporal code: neuron-major, neuron j's 7p block at offset j*7p.
struct TemporalCode {
  std::string video_id;
  Source source = Source::frame2d;
  std::size_t p = 0;
  std::size_t neurons = 0;
  std::vector<double> values;  // length 7*p*neurons, nonnegative magnitudes
};

/// Magnitudes of the first p DFT bins of the signal, zero-padded to length p
/// when shorter. Computed with the Goertzel recurrence per bin.
std::vector<double> dft_first_p(std::span<const double> signal, std::size_t p);

/// The 7 pyramid ranges over [0,T): whole series, floor-midpoint halves, and
/// each half split again at its own floor midpoint. Requires T >= 4.
std::array<SegmentRange, HftConfig::kSegments> pyramid_segments(std::size_t T);

/// Concatenation of dft_first_p over the 7 segments, in pyramid order.
std::vector<double> encode_neuron(std::span<const double> series, const HftConfig& cfg);

/// Applies encode_neuron to every neuron column of the series.
TemporalCode encode_activations(const ActivationSeries& series, const HftConfig& cfg);

// On disk a temporal code is a 1-row tensor of length 7*p*m in the ingest
// format (source tag preserved), plus a sidecar <path>.json manifest with
// video_id, p and the neuron count.
void write_temporal_code(const TemporalCode& code, const std::filesystem::path& path);
TemporalCode read_temporal_code(const std::filesystem::path& path);

}  // namespace eve
