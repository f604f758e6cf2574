#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "eve/synth.hpp"

namespace eve {

/// Flat key=value configuration shared by every pipeline stage. Unknown keys
/// are rejected; values are validated against module preconditions.
struct PipelineConfig {
  std::size_t p = 4;
  std::size_t projection_dim = 2048;
  std::uint64_t projection_seed = 1;
  std::size_t q = 5;
  std::size_t n_max = 10;  // key "N": per-frame instance cap for Fr
  std::size_t state_size = 2048;
  double lr = 2e-4;
  std::size_t batch = 60;
  std::size_t epochs = 50;
  double dropout = 0.5;
  std::size_t max_len = 30;
  std::uint64_t train_seed = 1;
  std::size_t beam = 1;
  std::size_t vocab_size = 9450;
};

PipelineConfig parse_config_text(const std::string& text, const std::string& origin);
PipelineConfig parse_config(const std::filesystem::path& path);

struct EncodeOptions {
  std::filesystem::path activations_2d;  // directory of <video_id>.evet files
  std::filesystem::path activations_3d;  // directory of <video_id>.evet files
  std::filesystem::path detections;
  std::filesystem::path actions;  // empty path: eta omitted
  std::filesystem::path dictionary;
  std::filesystem::path out_dir;
  PipelineConfig config;
  std::size_t workers = 0;  // 0: hardware concurrency
};

/// Encodes every video into out_dir/<id>.code.evet plus manifest.json.
void run_encode(const EncodeOptions& options);

/// Trains on the codes + corpus; writes ckpt_dir/epoch_NNNN.evem and
/// ckpt_dir/loss.csv. Aborts listing any corpus video without a code.
void run_train(const std::filesystem::path& codes_dir, const std::filesystem::path& corpus_path,
               const PipelineConfig& config, const std::filesystem::path& ckpt_dir);

/// Decodes a caption for every video in the codes manifest; writes JSON
/// Lines {"video_id","caption"} to out_path.
void run_caption(const std::filesystem::path& ckpt_path,
                 const std::filesystem::path& codes_dir,
                 const std::filesystem::path& out_path);

struct EvalScores {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider_d = 0.0;
};

/// Scores predictions ({"video_id","caption"} JSON Lines) against a corpus
/// of references.
EvalScores run_eval(const std::filesystem::path& predictions_path,
                    const std::filesystem::path& references_path);

SynthResult run_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace eve
