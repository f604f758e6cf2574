#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eve/ingest.hpp"

namespace eve {

/// Desk-scale synthetic dataset: captions are fully determined by planted
/// visual signals, so a correctly wired pipeline can decode them.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_videos = 20;
  std::size_t frames = 16;     // 2D timesteps per video
  std::size_t clips = 4;       // 3D timesteps; at least 4 for the pyramid
  std::size_t neurons_2d = 12;
  std::size_t neurons_3d = 8;
  std::vector<std::string> nouns = {"dog", "cat", "car", "bird", "horse", "boat"};
  std::vector<std::string> verbs = {"running", "walking", "jumping", "swimming"};
};

/// Ground truth recorded per generated video; values are computed with the
/// same arithmetic the semantic encoder applies, so recovery is exact.
struct PlantedVideo {
  std::string video_id;
  std::size_t noun = 0;
  std::size_t verb = 0;
  std::size_t count = 1;  // object instances per frame (1 or 2)
  double pr = 0.0;        // max detection confidence over sampled frames
  double fr = 0.0;        // count / 10
  std::vector<double> velocity;  // [vx1, vy1, ..., vx4, vy4]
};

struct SynthResult {
  SynthConfig config;
  std::vector<PlantedVideo> videos;
};

/// Writes activations_2d/, activations_3d/, detections.jsonl, actions.jsonl,
/// corpus.jsonl, dictionary.txt and MANIFEST.json under out_dir.
/// Byte-identical regeneration for a fixed seed.
SynthResult generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Two frame series with equal per-neuron time means: a sinusoid and its
/// per-neuron ascending sort.
std::pair<ActivationSeries, ActivationSeries> generate_ambiguous_pair(const SynthConfig& cfg);

}  // namespace eve
