#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "eve/errors.hpp"
#include "eve/pipeline.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace eve;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_videos = 5;
  cfg.frames = 12;
  cfg.clips = 4;
  cfg.neurons_2d = 4;
  cfg.neurons_3d = 3;
  return cfg;
}

PipelineConfig small_pipeline() {
  return parse_config_text(
      "p = 2\n"
      "projection_dim = 16\n"
      "projection_seed = 5\n"
      "state_size = 16\n"
      "lr = 0.01\n"
      "batch = 4\n"
      "epochs = 2\n"
      "dropout = 0.5\n"
      "max_len = 8\n"
      "train_seed = 3\n"
      "vocab_size = 64\n",
      "test");
}

EncodeOptions encode_options(const fs::path& data, const fs::path& out) {
  EncodeOptions opt;
  opt.activations_2d = data / "activations_2d";
  opt.activations_3d = data / "activations_3d";
  opt.detections = data / "detections.jsonl";
  opt.actions = data / "actions.jsonl";
  opt.dictionary = data / "dictionary.txt";
  opt.out_dir = out;
  opt.config = small_pipeline();
  opt.workers = 2;
  return opt;
}

}  // namespace

TEST_CASE("parse_config") {
  SUBCASE("defaults") {
    const PipelineConfig cfg = parse_config_text("", "test");
    CHECK(cfg.p == 4);
    CHECK(cfg.projection_dim == 2048);
    CHECK(cfg.state_size == 2048);
    CHECK(cfg.lr == doctest::Approx(2e-4));
    CHECK(cfg.batch == 60);
    CHECK(cfg.epochs == 50);
    CHECK(cfg.dropout == 0.5);
    CHECK(cfg.max_len == 30);
    CHECK(cfg.q == 5);
    CHECK(cfg.n_max == 10);
    CHECK(cfg.vocab_size == 9450);
  }
  SUBCASE("values, comments and whitespace") {
    const PipelineConfig cfg =
        parse_config_text("p=3\n  lr = 0.5 # step\n\nN = 7\n", "test");
    CHECK(cfg.p == 3);
    CHECK(cfg.lr == 0.5);
    CHECK(cfg.n_max == 7);
  }
  SUBCASE("unknown key rejected") {
    CHECK_THROWS_AS(parse_config_text("granularity = 3\n", "test"), ConfigError);
  }
  SUBCASE("malformed and out-of-range values rejected") {
    CHECK_THROWS_AS(parse_config_text("p\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("p = x\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("dropout = 1.0\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr = 0\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("max_len = 2\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("q = 1\n", "test"), ConfigError);
  }
}

TEST_CASE("encode writes one code per video plus a manifest") {
  TempDir data("pipe_data"), out("pipe_out");
  run_synth(small_synth(11), data.path());
  run_encode(encode_options(data.path(), out.path()));

  const auto manifest = nlohmann::json::parse(testutil::read_file(out / "manifest.json"));
  CHECK(manifest.at("videos").size() == 5);
  CHECK(manifest.at("eta_included") == true);
  CHECK(manifest.at("projection_dim") == 16);
  const std::size_t d = manifest.at("d").get<std::size_t>();
  CHECK(d == 7 * 2 * (4 + 3) + 10 * manifest.at("object_labels").size() +
                 2 * manifest.at("action_labels").size());

  for (const auto& id : manifest.at("videos")) {
    const auto code = read_tensor(out.path() / (id.get<std::string>() + ".code.evet"));
    CHECK(code.rows == 1);
    CHECK(code.cols == 16);
    for (float v : code.values) CHECK(std::abs(v) < 1.0f);
  }

  SUBCASE("workers do not change the bytes") {
    TempDir serial("pipe_serial");
    EncodeOptions opt = encode_options(data.path(), serial.path());
    opt.workers = 1;
    run_encode(opt);
    for (const auto& id : manifest.at("videos")) {
      const std::string name = id.get<std::string>() + ".code.evet";
      CHECK(testutil::read_file(out.path() / name) ==
            testutil::read_file(serial.path() / name));
    }
  }
}

TEST_CASE("encode without actions shrinks d and records it") {
  TempDir data("pipe_noact"), with("pipe_with"), without("pipe_without");
  run_synth(small_synth(13), data.path());

  run_encode(encode_options(data.path(), with.path()));
  EncodeOptions opt = encode_options(data.path(), without.path());
  opt.actions.clear();
  run_encode(opt);

  const auto m_with = nlohmann::json::parse(testutil::read_file(with / "manifest.json"));
  const auto m_without = nlohmann::json::parse(testutil::read_file(without / "manifest.json"));
  CHECK(m_without.at("eta_included") == false);
  CHECK(m_without.at("action_labels").empty());
  CHECK(m_with.at("d").get<std::size_t>() ==
        m_without.at("d").get<std::size_t>() + 2 * m_with.at("action_labels").size());
}

TEST_CASE("encode failure modes") {
  TempDir data("pipe_fail"), out("pipe_fail_out");
  run_synth(small_synth(17), data.path());

  SUBCASE("corrupt tensor names the file") {
    const fs::path victim = data.path() / "activations_2d" / "vid0002.evet";
    const std::string bytes = testutil::read_file(victim);
    testutil::write_file(victim, bytes.substr(0, bytes.size() - 3));
    try {
      run_encode(encode_options(data.path(), out.path()));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("vid0002") != std::string::npos);
    }
  }
  SUBCASE("missing video listed") {
    fs::remove(data.path() / "activations_3d" / "vid0001.evet");
    try {
      run_encode(encode_options(data.path(), out.path()));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("vid0001") != std::string::npos);
    }
  }
}

TEST_CASE("train, caption and eval complete on the synthetic set") {
  TempDir data("pipe_full"), codes("pipe_codes"), ckpt("pipe_ckpt");
  run_synth(small_synth(19), data.path());
  run_encode(encode_options(data.path(), codes.path()));
  const PipelineConfig cfg = small_pipeline();
  run_train(codes.path(), data / "corpus.jsonl", cfg, ckpt.path());

  CHECK(fs::exists(ckpt / "epoch_0001.evem"));
  CHECK(fs::exists(ckpt / "epoch_0002.evem"));
  const std::string csv = testutil::read_file(ckpt / "loss.csv");
  CHECK(csv.rfind("epoch,loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  run_caption(ckpt / "epoch_0002.evem", codes.path(), ckpt / "pred.jsonl");
  std::ifstream pred(ckpt.path() / "pred.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(pred, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("video_id"));
    CHECK(j.contains("caption"));
    ++lines;
  }
  CHECK(lines == 5);

  SUBCASE("eval of references against themselves is perfect BLEU and ROUGE") {
    // Use each video's first caption as its own prediction.
    std::ofstream self(ckpt.path() / "self.jsonl");
    const CaptionCorpus corpus = read_corpus(data / "corpus.jsonl");
    for (const auto& entry : corpus.entries) {
      std::string caption;
      for (const auto& tok : entry.captions.front()) {
        if (!caption.empty()) caption += ' ';
        caption += tok;
      }
      self << nlohmann::json{{"video_id", entry.video_id}, {"caption", caption}}.dump()
           << '\n';
    }
    self.close();
    const EvalScores scores = run_eval(ckpt / "self.jsonl", data / "corpus.jsonl");
    CHECK(scores.bleu4 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(scores.rouge_l == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(scores.cider_d > 0.0);
  }
  SUBCASE("eval with a missing prediction lists the video") {
    std::ofstream partial(ckpt.path() / "partial.jsonl");
    partial << nlohmann::json{{"video_id", "vid0000"}, {"caption", "a dog is running"}}.dump()
            << '\n';
    partial.close();
    try {
      run_eval(ckpt / "partial.jsonl", data / "corpus.jsonl");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("vid0001") != std::string::npos);
    }
  }
}

TEST_CASE("caption honors the beam width stored in the checkpoint") {
  TempDir data("pipe_beam"), codes("pipe_beam_codes"), ckpt("pipe_beam_ckpt");
  run_synth(small_synth(29), data.path());
  run_encode(encode_options(data.path(), codes.path()));

  PipelineConfig cfg = small_pipeline();
  cfg.beam = 5;
  run_train(codes.path(), data / "corpus.jsonl", cfg, ckpt.path());
  run_caption(ckpt / "epoch_0002.evem", codes.path(), ckpt / "beam_pred.jsonl");

  std::ifstream pred(ckpt.path() / "beam_pred.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(pred, line)) {
    CHECK(nlohmann::json::parse(line).contains("caption"));
    ++lines;
  }
  CHECK(lines == 5);

  SUBCASE("caption output is idempotent") {
    run_caption(ckpt / "epoch_0002.evem", codes.path(), ckpt / "beam_pred2.jsonl");
    CHECK(testutil::read_file(ckpt / "beam_pred.jsonl") ==
          testutil::read_file(ckpt / "beam_pred2.jsonl"));
  }
}

TEST_CASE("train and caption reject a directory without a manifest") {
  TempDir data("pipe_nomanifest"), ckpt("pipe_nomanifest_ckpt");
  run_synth(small_synth(31), data.path());
  CHECK_THROWS_AS(
      run_train(data.path(), data / "corpus.jsonl", small_pipeline(), ckpt.path()),
      ValidationError);
  CHECK_THROWS_AS(run_caption(data / "nothing.evem", data.path(), data / "pred.jsonl"),
                  FormatError);
}

TEST_CASE("train rejects mismatched state size and missing codes") {
  TempDir data("pipe_badtrain"), codes("pipe_badtrain_codes"), ckpt("pipe_badtrain_ckpt");
  run_synth(small_synth(23), data.path());
  run_encode(encode_options(data.path(), codes.path()));

  SUBCASE("state size mismatch") {
    PipelineConfig cfg = small_pipeline();
    cfg.state_size = 32;
    CHECK_THROWS_AS(run_train(codes.path(), data / "corpus.jsonl", cfg, ckpt.path()),
                    ConfigError);
  }
  SUBCASE("missing code file names the video") {
    fs::remove(codes.path() / "vid0003.code.evet");
    try {
      run_train(codes.path(), data / "corpus.jsonl", small_pipeline(), ckpt.path());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("vid0003") != std::string::npos);
    }
  }
}
