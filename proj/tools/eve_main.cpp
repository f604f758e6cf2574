#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "eve/errors.hpp"
#include "eve/pipeline.hpp"
#include "json.hpp"

namespace {

// Exit codes: 0 success, 2 invalid input or configuration, 3 internal error.
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

int run(int argc, char** argv) {
  CLI::App app{"eve: video feature encoding and GRU captioning pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  eve::SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--videos", synth_cfg.n_videos, "Number of videos")->capture_default_str();
  synth->add_option("--frames", synth_cfg.frames, "Frames per video")->capture_default_str();
  synth->add_option("--clips", synth_cfg.clips, "Clips per video")->capture_default_str();
  synth->add_option("--neurons-2d", synth_cfg.neurons_2d, "2D extraction-layer width")
      ->capture_default_str();
  synth->add_option("--neurons-3d", synth_cfg.neurons_3d, "3D extraction-layer width")
      ->capture_default_str();

  // encode
  auto* encode = app.add_subcommand("encode", "Encode videos into visual codes");
  eve::EncodeOptions enc;
  std::string encode_config;
  encode->add_option("--activations-2d", enc.activations_2d,
                     "Directory of per-video 2D activation tensors")->required();
  encode->add_option("--activations-3d", enc.activations_3d,
                     "Directory of per-video 3D activation tensors")->required();
  encode->add_option("--detections", enc.detections, "Detections JSON Lines file")->required();
  encode->add_option("--actions", enc.actions,
                     "Action distributions JSON Lines file (omit to drop eta)");
  encode->add_option("--dict", enc.dictionary, "Vocabulary file, one token per line")->required();
  encode->add_option("--config", encode_config, "Pipeline config file (key=value)");
  encode->add_option("--out", enc.out_dir, "Output directory for code files")->required();
  encode->add_option("--workers", enc.workers, "Worker threads (0 = logical cores)")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train the captioning model");
  std::string train_codes, train_corpus, train_config, train_ckpt;
  train->add_option("--codes", train_codes, "Directory of encoded visual codes")->required();
  train->add_option("--corpus", train_corpus, "Caption corpus JSON Lines file")->required();
  train->add_option("--config", train_config, "Pipeline config file (key=value)");
  train->add_option("--ckpt-out", train_ckpt, "Checkpoint output directory")->required();

  // caption
  auto* caption = app.add_subcommand("caption", "Decode captions for encoded videos");
  std::string cap_ckpt, cap_codes, cap_out;
  caption->add_option("--ckpt", cap_ckpt, "Model checkpoint")->required();
  caption->add_option("--codes", cap_codes, "Directory of encoded visual codes")->required();
  caption->add_option("--out", cap_out, "Predictions output file (JSON Lines)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against references");
  std::string eval_pred, eval_refs, eval_out;
  eval->add_option("--pred", eval_pred, "Predictions JSON Lines file")->required();
  eval->add_option("--refs", eval_refs, "Reference corpus JSON Lines file")->required();
  eval->add_option("--out", eval_out, "Also write the scores JSON to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (synth->parsed()) {
    eve::run_synth(synth_cfg, synth_out);
    std::cout << "wrote synthetic dataset to " << synth_out << "\n";
  } else if (encode->parsed()) {
    enc.config = encode_config.empty() ? eve::PipelineConfig{} : eve::parse_config(encode_config);
    eve::run_encode(enc);
    std::cout << "wrote visual codes to " << enc.out_dir.string() << "\n";
  } else if (train->parsed()) {
    const eve::PipelineConfig cfg =
        train_config.empty() ? eve::PipelineConfig{} : eve::parse_config(train_config);
    eve::run_train(train_codes, train_corpus, cfg, train_ckpt);
    std::cout << "wrote checkpoints to " << train_ckpt << "\n";
  } else if (caption->parsed()) {
    eve::run_caption(cap_ckpt, cap_codes, cap_out);
    std::cout << "wrote predictions to " << cap_out << "\n";
  } else if (eval->parsed()) {
    const eve::EvalScores scores = eve::run_eval(eval_pred, eval_refs);
    const nlohmann::json j{
        {"bleu4", scores.bleu4}, {"rougel", scores.rouge_l}, {"ciderd", scores.cider_d}};
    std::cout << j.dump() << "\n";
    if (!eval_out.empty()) {
      std::ofstream out(eval_out, std::ios::trunc);
      if (!out) throw eve::ValidationError(eval_out + ": cannot open for writing");
      out << j.dump() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const eve::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
