#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace eve {

enum class Source : std::uint32_t { frame2d = 0, clip3d = 1 };

/// Per-video time-series of extraction-layer activations, one row per
/// timestep (frames for a 2D source, clips for a 3D source).
///
/// The same container carries 1-row code vectors when they are written with
/// the tensor file format; the T >= 4 requirement of the temporal encoder is
/// checked at encoding time, not here.
struct ActivationSeries {
  std::string video_id;
  Source source = Source::frame2d;
  std::size_t rows = 0;  // timesteps T
  std::size_t cols = 0;  // neurons m
  std::vector<float> values;  // row-major, rows*cols

  float at(std::size_t t, std::size_t j) const { return values[t * cols + j]; }
  float& at(std::size_t t, std::size_t j) { return values[t * cols + j]; }
};

struct Detection {
  std::string label;
  double confidence = 0.0;  // in [0,1]
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;  // normalized to [0,1]
};

struct DetectionFrame {
  std::size_t frame_index = 0;
  std::vector<Detection> detections;
};

/// All detections of one video; frame_index strictly increasing.
struct DetectionSet {
  std::string video_id;
  std::vector<DetectionFrame> frames;
};

/// Per-clip class-probability vectors from a 3D network's output layer.
struct ActionDistribution {
  std::string video_id;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> per_clip;  // each sums to 1 within 1e-5
};

struct CaptionEntry {
  std::string video_id;
  std::vector<std::vector<std::string>> captions;  // tokenized
};

struct CaptionCorpus {
  std::vector<CaptionEntry> entries;
};

/// Token <-> index bijection with fixed reserved slots.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kUnk = 3;

  Vocabulary();
  /// Builds from a full token list whose first four entries must be the
  /// reserved tokens (as read from a vocabulary file).
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  /// Index of the token, kUnk when absent.
  std::int32_t lookup(const std::string& token) const;
  /// Appends a non-reserved token; no-op if already present.
  void add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// ---------------------------------------------------------------------------
// Tensor file format: magic "EVET", u32 version=1, u32 source tag
// (0=frame2d, 1=clip3d), u32 T, u32 m, then T*m little-endian IEEE-754
// binary32 values, row-major.
// ---------------------------------------------------------------------------

ActivationSeries read_tensor(const std::filesystem::path& path);
void write_tensor(const ActivationSeries& series, const std::filesystem::path& path);

/// JSON Lines, one frame per line:
/// {"video_id","frame_index","detections":[{"label","confidence","cx","cy","w","h"}]}
/// Grouped per video in first-appearance order.
std::vector<DetectionSet> read_detections(const std::filesystem::path& path);

/// JSON Lines, one video per line: {"video_id","labels":[...],"per_clip":[[...],...]}
std::vector<ActionDistribution> read_actions(const std::filesystem::path& path);

/// JSON Lines {"video_id","captions":["raw sentence", ...]}; sentences are
/// tokenized on read.
CaptionCorpus read_corpus(const std::filesystem::path& path);

/// Lower-cases, deletes all punctuation except apostrophes that sit between
/// alphanumerics, and splits on whitespace.
std::vector<std::string> tokenize(const std::string& sentence);

/// Reserved tokens at 0-3, then tokens by descending corpus frequency, ties
/// broken lexicographically, capped at max_size.
Vocabulary build_vocab(const CaptionCorpus& corpus, std::size_t max_size);

/// BOS + indices (kUnk for OOV) + EOS, truncated to max_len with EOS kept as
/// the last non-pad index, right-padded with kPad.
std::vector<std::int32_t> encode_caption(const std::vector<std::string>& tokens,
                                         const Vocabulary& vocab, std::size_t max_len);

/// q indices round(i*(T-1)/(q-1)), round-half-away-from-zero, deduplicated
/// ascending; all of 0..T-1 when T < q.
std::vector<std::size_t> sample_frames(std::size_t T, std::size_t q);

/// Vocabulary file: UTF-8 text, one token per line, line number = index.
Vocabulary read_vocab(const std::filesystem::path& path);
void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path);

}  // namespace eve
