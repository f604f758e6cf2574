#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "eve/hft.hpp"
#include "eve/semantic.hpp"
#include "eve/synth.hpp"
#include "test_util.hpp"

using namespace eve;
using testutil::TempDir;

namespace {

SynthConfig tiny_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_videos = 6;
  cfg.frames = 16;
  cfg.clips = 4;
  cfg.neurons_2d = 5;
  cfg.neurons_3d = 4;
  return cfg;
}

}  // namespace

TEST_CASE("generation is byte-identical for a fixed seed") {
  TempDir a("synth_a"), b("synth_b");
  generate(tiny_config(7), a.path());
  generate(tiny_config(7), b.path());

  std::vector<std::filesystem::path> rel;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path()))
    if (entry.is_regular_file())
      rel.push_back(std::filesystem::relative(entry.path(), a.path()));
  CHECK(rel.size() > 10);
  for (const auto& r : rel)
    CHECK(testutil::read_file(a.path() / r) == testutil::read_file(b.path() / r));

  TempDir c("synth_c");
  generate(tiny_config(8), c.path());
  CHECK(testutil::read_file(a / "corpus.jsonl") != testutil::read_file(c / "corpus.jsonl"));
}

TEST_CASE("generated files pass the ingest validators") {
  TempDir dir("synth_valid");
  const SynthResult result = generate(tiny_config(21), dir.path());
  REQUIRE(result.videos.size() == 6);

  const auto dets = read_detections(dir / "detections.jsonl");
  CHECK(dets.size() == 6);
  const auto acts = read_actions(dir / "actions.jsonl");
  CHECK(acts.size() == 6);
  const CaptionCorpus corpus = read_corpus(dir / "corpus.jsonl");
  CHECK(corpus.entries.size() == 6);
  const Vocabulary dict = read_vocab(dir / "dictionary.txt");
  CHECK(dict.size() > 4);

  for (const auto& v : result.videos) {
    const auto act2d = read_tensor(dir.path() / "activations_2d" / (v.video_id + ".evet"));
    CHECK(act2d.rows == 16);
    CHECK(act2d.cols == 5);
    CHECK(act2d.source == Source::frame2d);
    const auto act3d = read_tensor(dir.path() / "activations_3d" / (v.video_id + ".evet"));
    CHECK(act3d.rows == 4);
    CHECK(act3d.source == Source::clip3d);
  }

  SUBCASE("every caption token is in the dictionary") {
    for (const auto& entry : corpus.entries)
      for (const auto& caption : entry.captions)
        for (const auto& tok : caption) CHECK(dict.contains(tok));
  }
}

TEST_CASE("planted semantics are recovered exactly") {
  TempDir dir("synth_roundtrip");
  const SynthConfig cfg = tiny_config(99);
  const SynthResult result = generate(cfg, dir.path());

  const auto dets = read_detections(dir / "detections.jsonl");
  const auto acts = read_actions(dir / "actions.jsonl");
  const Vocabulary dict = read_vocab(dir / "dictionary.txt");

  LabelSpace space;
  space.object_labels = intersect_labels(cfg.nouns, dict);
  space.action_labels = intersect_labels(cfg.verbs, dict);
  REQUIRE(space.object_labels.size() == cfg.nouns.size());

  for (const auto& planted : result.videos) {
    const auto det_it =
        std::find_if(dets.begin(), dets.end(),
                     [&](const DetectionSet& d) { return d.video_id == planted.video_id; });
    REQUIRE(det_it != dets.end());
    const auto code = object_code(*det_it, cfg.frames, space);

    const std::string& noun = cfg.nouns[planted.noun];
    const auto pos = std::find(space.object_labels.begin(), space.object_labels.end(), noun) -
                     space.object_labels.begin();
    const double* block = code.data() + pos * 10;
    CHECK(block[0] == planted.pr);
    CHECK(block[1] == planted.fr);
    for (int z = 0; z < 8; ++z) CHECK(block[2 + z] == planted.velocity[z]);

    // Every other label block is zero.
    for (std::size_t l = 0; l < space.object_labels.size(); ++l) {
      if (static_cast<long>(l) == pos) continue;
      for (int i = 0; i < 10; ++i) CHECK(code[l * 10 + i] == 0.0);
    }

    const auto act_it =
        std::find_if(acts.begin(), acts.end(),
                     [&](const ActionDistribution& a) { return a.video_id == planted.video_id; });
    REQUIRE(act_it != acts.end());
    const auto eta = action_code(*act_it, space);
    const std::string& verb = cfg.verbs[planted.verb];
    for (std::size_t i = 0; i < space.action_labels.size(); ++i)
      CHECK(eta[2 * i] == (space.action_labels[i] == verb ? 1.0 : 0.0));
  }
}

TEST_CASE("planted count of 2 yields Fr of 0.2") {
  TempDir dir("synth_fr");
  const SynthConfig cfg = tiny_config(3);
  const SynthResult result = generate(cfg, dir.path());
  bool found_plural = false;
  for (const auto& v : result.videos) {
    if (v.count == 2) {
      CHECK(v.fr == 0.2);
      found_plural = true;
    } else {
      CHECK(v.fr == 0.1);
    }
  }
  CHECK(found_plural);
}

TEST_CASE("ambiguous pair: equal means, distinct temporal codes") {
  const SynthConfig cfg = tiny_config(17);
  const auto [a, b] = generate_ambiguous_pair(cfg);
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);

  for (std::size_t j = 0; j < a.cols; ++j) {
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t t = 0; t < a.rows; ++t) {
      mean_a += a.at(t, j);
      mean_b += b.at(t, j);
    }
    CHECK(std::abs(mean_a - mean_b) / static_cast<double>(a.rows) <= 1e-12);
  }

  HftConfig hft{4};
  const TemporalCode code_a = encode_activations(a, hft);
  const TemporalCode code_b = encode_activations(b, hft);
  double dist = 0.0;
  for (std::size_t i = 0; i < code_a.values.size(); ++i)
    dist += (code_a.values[i] - code_b.values[i]) * (code_a.values[i] - code_b.values[i]);
  CHECK(std::sqrt(dist) > 0.1);

  SUBCASE("sorting is deterministic") {
    const auto [a2, b2] = generate_ambiguous_pair(cfg);
    CHECK(b2.values == b.values);
  }
}

TEST_CASE("scripted linear motion recovers the planted step") {
  // Like the planted-velocity check but with explicit numbers: a track from
  // 0.1 to 0.9 over 4 intervals gives vx = 0.2 per interval.
  DetectionSet dets{"v", {}};
  const auto samples = sample_frames(21, 5);
  for (std::size_t z = 0; z < samples.size(); ++z) {
    const double x = 0.1 + 0.2 * static_cast<double>(z);
    dets.frames.push_back(
        {samples[z], {Detection{"dog", 0.9, x, 0.5, 0.1, 0.1}}});
  }
  LabelSpace space;
  space.object_labels = {"dog"};
  const auto code = object_code(dets, 21, space);
  for (int z = 0; z < 4; ++z) {
    CHECK(code[2 + 2 * z] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(code[3 + 2 * z] == doctest::Approx(0.0).epsilon(1e-12));
  }
}
