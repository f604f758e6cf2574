// Acceptance suite: runs every pipeline-level criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "eve/fusion.hpp"
#include "eve/gru.hpp"
#include "eve/hft.hpp"
#include "eve/ingest.hpp"
#include "eve/metrics.hpp"
#include "eve/pipeline.hpp"
#include "eve/rng.hpp"
#include "eve/semantic.hpp"
#include "eve/synth.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  if (ok) {
    std::printf("PASS: %s%s%s\n", name.c_str(), detail.empty() ? "" : " - ", detail.c_str());
  } else {
    std::printf("FAIL: %s%s%s\n", name.c_str(), detail.empty() ? "" : " - ", detail.c_str());
    ++failures;
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> naive_dft_magnitudes(const std::vector<double>& signal, std::size_t p) {
  const std::size_t n = std::max(signal.size(), p);
  std::vector<double> out(p);
  for (std::size_t k = 0; k < p; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < signal.size(); ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(n);
      acc += signal[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = std::abs(acc);
  }
  return out;
}

std::vector<double> random_signal(std::size_t n, std::mt19937_64& eng) {
  std::vector<double> s(n);
  for (auto& v : s) v = static_cast<double>(eng() >> 11) / 4503599627370496.0 - 1.0;
  return s;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : path_(fs::temp_directory_path() / ("eve_acceptance_" + tag + "_" +
                                           std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// --- criterion 1 -----------------------------------------------------------

void dft_oracle_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 eng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 4 + eng() % 61;   // 4..64
    const std::size_t p = 1 + eng() % 8;    // 1..8
    const auto signal = random_signal(n, eng);
    const auto got = eve::dft_first_p(signal, p);
    const auto want = naive_dft_magnitudes(signal, p);
    for (std::size_t k = 0; k < p; ++k)
      worst = std::max(worst, std::abs(got[k] - want[k]) / std::max(1.0, std::abs(want[k])));
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "max relative error " << worst << ", " << elapsed << " s";
  report("1 dft oracle equivalence", worst <= 1e-9 && elapsed < 5.0, detail.str());
}

// --- criterion 2 -----------------------------------------------------------

void pyramid_structure() {
  bool ok = true;
  std::string why;
  for (std::size_t T = 4; T <= 64 && ok; ++T) {
    const auto seg = eve::pyramid_segments(T);
    ok = seg[0].begin == 0 && seg[0].end == T &&
         seg[1].begin == 0 && seg[1].end == seg[2].begin && seg[2].end == T &&
         seg[3].begin == seg[1].begin && seg[3].end == seg[4].begin &&
         seg[4].end == seg[1].end && seg[5].begin == seg[2].begin &&
         seg[5].end == seg[6].begin && seg[6].end == seg[2].end;
    for (const auto& s : seg) ok = ok && s.size() >= 1;
    if (!ok) why = "segment structure broken at T=" + std::to_string(T);
  }
  std::mt19937_64 eng(2);
  for (std::size_t p = 1; p <= 6 && ok; ++p) {
    for (std::size_t m : {1ul, 3ul, 9ul}) {
      const std::size_t T = 4 + eng() % 61;
      eve::ActivationSeries series;
      series.video_id = "audit";
      series.rows = T;
      series.cols = m;
      series.values.resize(T * m);
      for (auto& v : series.values)
        v = static_cast<float>(static_cast<double>(eng() >> 40) / 1e5);
      const auto code = eve::encode_activations(series, eve::HftConfig{p});
      if (code.values.size() != 7 * p * m) {
        ok = false;
        why = "code length != 7pm for p=" + std::to_string(p) + " m=" + std::to_string(m);
      }
    }
  }
  report("2 pyramid structure and code length", ok, why);
}

// --- criterion 3 -----------------------------------------------------------

void shift_reversal_invariance() {
  std::mt19937_64 eng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t T = 4 + eng() % 61;
    const std::size_t p = 1 + eng() % 8;
    const auto signal = random_signal(T, eng);
    for (const auto& seg : eve::pyramid_segments(T)) {
      std::vector<double> part(signal.begin() + static_cast<long>(seg.begin),
                               signal.begin() + static_cast<long>(seg.end));
      const auto base = eve::dft_first_p(part, p);

      std::vector<double> reversed(part.rbegin(), part.rend());
      const auto rev = eve::dft_first_p(reversed, p);
      for (std::size_t k = 0; k < p; ++k)
        worst = std::max(worst, std::abs(rev[k] - base[k]) / std::max(1.0, base[k]));

      if (part.size() >= p) {  // circular shift needs an unpadded transform
        std::vector<double> rotated = part;
        std::rotate(rotated.begin(), rotated.begin() + static_cast<long>(eng() % part.size()),
                    rotated.end());
        const auto rot = eve::dft_first_p(rotated, p);
        for (std::size_t k = 0; k < p; ++k)
          worst = std::max(worst, std::abs(rot[k] - base[k]) / std::max(1.0, base[k]));
      }
    }
  }
  std::ostringstream detail;
  detail << "max relative deviation " << worst;
  report("3 shift/reversal invariance", worst <= 1e-9, detail.str());
}

// --- criterion 4 -----------------------------------------------------------

void temporal_sensitivity() {
  eve::SynthConfig cfg;
  const auto [series_a, series_b] = eve::generate_ambiguous_pair(cfg);

  double mean_gap = 0.0;
  for (std::size_t j = 0; j < series_a.cols; ++j) {
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t t = 0; t < series_a.rows; ++t) {
      sum_a += series_a.at(t, j);
      sum_b += series_b.at(t, j);
    }
    mean_gap = std::max(mean_gap, std::abs(sum_a - sum_b) /
                                      static_cast<double>(series_a.rows));
  }

  const eve::HftConfig hft{4};
  const auto code_a = eve::encode_activations(series_a, hft);
  const auto code_b = eve::encode_activations(series_b, hft);
  double dist = 0.0;
  for (std::size_t i = 0; i < code_a.values.size(); ++i)
    dist += (code_a.values[i] - code_b.values[i]) * (code_a.values[i] - code_b.values[i]);
  dist = std::sqrt(dist);

  std::ostringstream detail;
  detail << "mean-pool gap " << mean_gap << ", hft L2 distance " << dist;
  report("4 temporal sensitivity vs mean pooling", mean_gap <= 1e-12 && dist > 0.1,
         detail.str());
}

// --- criterion 5 -----------------------------------------------------------

void semantic_round_trip() {
  Scratch scratch("semantic");
  eve::SynthConfig cfg;
  cfg.seed = 5;
  const eve::SynthResult result = eve::generate(cfg, scratch.path());

  const auto dets = eve::read_detections(scratch.path() / "detections.jsonl");
  const eve::Vocabulary dict = eve::read_vocab(scratch.path() / "dictionary.txt");
  eve::LabelSpace space;
  space.object_labels = eve::intersect_labels(cfg.nouns, dict);

  bool exact = true;
  std::string why;
  for (const auto& planted : result.videos) {
    const auto it = std::find_if(dets.begin(), dets.end(), [&](const eve::DetectionSet& d) {
      return d.video_id == planted.video_id;
    });
    if (it == dets.end()) {
      exact = false;
      why = planted.video_id + " missing";
      break;
    }
    const auto code = eve::object_code(*it, cfg.frames, space);
    const auto pos =
        std::find(space.object_labels.begin(), space.object_labels.end(),
                  cfg.nouns[planted.noun]) -
        space.object_labels.begin();
    const double* block = code.data() + pos * 10;
    if (block[0] != planted.pr || block[1] != planted.fr) {
      exact = false;
      why = planted.video_id + ": Pr/Fr not exact";
      break;
    }
    for (int z = 0; z < 8; ++z) {
      if (block[2 + z] != planted.velocity[static_cast<std::size_t>(z)]) {
        exact = false;
        why = planted.video_id + ": velocity not exact";
        break;
      }
    }
    if (!exact) break;
  }

  // Randomized bound check over 1000 detection sets.
  std::mt19937_64 eng(55);
  auto unit = [&]() { return static_cast<double>(eng() >> 11) / 9007199254740992.0; };
  eve::LabelSpace rnd_space;
  rnd_space.object_labels = {"bird", "cat", "dog", "fox"};
  bool bounds = true;
  for (int trial = 0; trial < 1000 && bounds; ++trial) {
    const std::size_t T = 5 + eng() % 40;
    eve::DetectionSet set{"r", {}};
    for (std::size_t f = 0; f < T; ++f) {
      if (eng() % 4 == 0) continue;
      eve::DetectionFrame frame{f, {}};
      for (std::size_t i = 0, n = eng() % 5; i < n; ++i)
        frame.detections.push_back(eve::Detection{
            rnd_space.object_labels[eng() % rnd_space.object_labels.size()], unit(), unit(),
            unit(), unit(), unit()});
      set.frames.push_back(std::move(frame));
    }
    const auto code = eve::object_code(set, T, rnd_space);
    if (code.size() != 10 * rnd_space.object_labels.size()) bounds = false;
    for (std::size_t label = 0; label < rnd_space.object_labels.size() && bounds; ++label) {
      const double* block = code.data() + label * 10;
      bounds = block[0] >= 0.0 && block[0] <= 1.0 && block[1] >= 0.0 && block[1] <= 1.0;
      for (int i = 2; i < 10 && bounds; ++i) bounds = block[i] >= -1.0 && block[i] <= 1.0;
    }
  }
  if (!bounds) why += " bound violation";
  report("5 semantic round-trip and bounds", exact && bounds, why);
}

// --- criterion 6 -----------------------------------------------------------

void gradient_check() {
  const auto start = Clock::now();

  eve::CaptionCorpus corpus;
  std::vector<std::string> words;
  for (int i = 0; i < 8; ++i) words.push_back("w" + std::to_string(i));
  corpus.entries.push_back({"v", {words}});
  const eve::Vocabulary vocab = eve::build_vocab(corpus, 12);  // vocab size 12

  eve::TrainConfig cfg;
  cfg.seed = 66;
  cfg.dropout = 0.5;
  cfg.max_len = 6;  // 5 unrolled steps
  eve::GruModel model = eve::init_model(vocab, 8, cfg);  // embed dim 300

  std::mt19937_64 eng(67);
  std::vector<Eigen::VectorXd> ups;
  std::vector<std::vector<std::int32_t>> caps;
  for (int b = 0; b < 2; ++b) {
    Eigen::VectorXd u(8);
    for (long i = 0; i < 8; ++i) u(i) = static_cast<double>(eng() >> 11) / 9e15 - 0.5;
    ups.push_back(u);
    std::vector<std::int32_t> enc{eve::Vocabulary::kBos};
    for (int i = 0; i < 3; ++i) enc.push_back(4 + static_cast<std::int32_t>(eng() % 8));
    enc.push_back(eve::Vocabulary::kEos);
    enc.resize(6, eve::Vocabulary::kPad);
    caps.push_back(enc);
  }
  const eve::TrainingBatch batch = eve::make_batch(ups, caps);
  auto mask_eng = eve::seeded_engine(68);
  const eve::DropoutPlan plan = eve::make_dropout_plan(8, 2, 5, cfg.dropout, mask_eng);

  const eve::Forward fwd = eve::forward(model, batch, &plan);
  const eve::Gradients grads = eve::backward(model, batch, fwd);

  std::vector<std::pair<double*, std::size_t>> params;
  std::vector<std::pair<const double*, std::size_t>> views;
  auto add = [&](auto& p, const auto& g) {
    params.emplace_back(p.data(), static_cast<std::size_t>(p.size()));
    views.emplace_back(g.data(), static_cast<std::size_t>(g.size()));
  };
  add(model.embedding.word_vectors, grads.word_vectors);
  add(model.layer1.w_update, grads.layer1.w_update);
  add(model.layer1.w_reset, grads.layer1.w_reset);
  add(model.layer1.w_cand, grads.layer1.w_cand);
  add(model.layer1.b_update, grads.layer1.b_update);
  add(model.layer1.b_reset, grads.layer1.b_reset);
  add(model.layer1.b_cand, grads.layer1.b_cand);
  add(model.layer2.w_update, grads.layer2.w_update);
  add(model.layer2.w_reset, grads.layer2.w_reset);
  add(model.layer2.w_cand, grads.layer2.w_cand);
  add(model.layer2.b_update, grads.layer2.b_update);
  add(model.layer2.b_reset, grads.layer2.b_reset);
  add(model.layer2.b_cand, grads.layer2.b_cand);
  add(model.output_w, grads.output_w);
  add(model.output_b, grads.output_b);

  const double step = 1e-5;
  std::mt19937_64 pick(69);
  double max_rel = 0.0;
  for (int sample = 0; sample < 200; ++sample) {
    const std::size_t ti = pick() % params.size();
    const std::size_t ei = pick() % params[ti].second;
    double* slot = params[ti].first + ei;
    const double saved = *slot;
    *slot = saved + step;
    const double up = eve::loss(eve::forward(model, batch, &plan).logits, batch);
    *slot = saved - step;
    const double down = eve::loss(eve::forward(model, batch, &plan).logits, batch);
    *slot = saved;
    const double fd = (up - down) / (2.0 * step);
    const double an = views[ti].first[ei];
    max_rel = std::max(max_rel, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
  }
  const double elapsed = seconds_since(start);
  std::ostringstream detail;
  detail << "max relative error " << max_rel << ", " << elapsed << " s";
  report("6 gradient check", max_rel <= 1e-4 && elapsed < 30.0, detail.str());
}

// --- criterion 7 -----------------------------------------------------------

void overfit_synthetic_corpus() {
  const auto start = Clock::now();
  Scratch scratch("overfit");

  eve::SynthConfig synth_cfg;
  synth_cfg.seed = 42;  // 20 videos by default
  eve::generate(synth_cfg, scratch.path() / "data");

  eve::PipelineConfig cfg = eve::parse_config_text(
      "p = 4\n"
      "projection_dim = 64\n"
      "projection_seed = 7\n"
      "state_size = 64\n"
      "lr = 0.005\n"
      "batch = 10\n"
      "epochs = 300\n"
      "dropout = 0.0\n"
      "max_len = 8\n"
      "train_seed = 9\n"
      "vocab_size = 64\n",
      "overfit");

  eve::EncodeOptions enc;
  enc.activations_2d = scratch.path() / "data" / "activations_2d";
  enc.activations_3d = scratch.path() / "data" / "activations_3d";
  enc.detections = scratch.path() / "data" / "detections.jsonl";
  enc.actions = scratch.path() / "data" / "actions.jsonl";
  enc.dictionary = scratch.path() / "data" / "dictionary.txt";
  enc.out_dir = scratch.path() / "codes";
  enc.config = cfg;
  eve::run_encode(enc);

  const eve::CaptionCorpus corpus = eve::read_corpus(scratch.path() / "data" / "corpus.jsonl");
  const eve::Vocabulary vocab = eve::build_vocab(corpus, cfg.vocab_size);

  std::vector<Eigen::VectorXd> codes;
  std::vector<eve::TrainSample> samples;
  for (const auto& entry : corpus.entries) {
    const auto series =
        eve::read_tensor(scratch.path() / "codes" / (entry.video_id + ".code.evet"));
    Eigen::VectorXd u(static_cast<long>(series.values.size()));
    for (std::size_t i = 0; i < series.values.size(); ++i)
      u(static_cast<long>(i)) = series.values[i];
    codes.push_back(u);
    for (const auto& caption : entry.captions)
      samples.push_back(
          {codes.size() - 1, eve::encode_caption(caption, vocab, cfg.max_len)});
  }

  eve::TrainConfig tc;
  tc.lr = cfg.lr;
  tc.batch = cfg.batch;
  tc.epochs = cfg.epochs;
  tc.dropout = cfg.dropout;
  tc.max_len = cfg.max_len;
  tc.seed = cfg.train_seed;
  eve::GruModel model = eve::init_model(vocab, cfg.state_size, tc);
  eve::train(model, codes, samples);

  // Final per-token cross-entropy without dropout.
  std::vector<Eigen::VectorXd> all_ups;
  std::vector<std::vector<std::int32_t>> all_caps;
  for (const auto& s : samples) {
    all_ups.push_back(codes[s.code_index]);
    all_caps.push_back(s.encoded);
  }
  const eve::TrainingBatch eval_batch = eve::make_batch(all_ups, all_caps);
  const double eval_ce = eve::loss(eve::forward(model, eval_batch).logits, eval_batch);

  std::size_t matched = 0, total = 0;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const auto decoded = eve::greedy_decode(model, codes[i], cfg.max_len);
    const auto& ref = corpus.entries[i].captions.front();
    total += ref.size();
    for (std::size_t t = 0; t < ref.size(); ++t)
      if (t < decoded.size() &&
          vocab.token(static_cast<std::size_t>(decoded[t])) == ref[t])
        ++matched;
  }
  const double token_accuracy = static_cast<double>(matched) / static_cast<double>(total);
  const double elapsed = seconds_since(start);

  std::ostringstream detail;
  detail << "final CE " << eval_ce << ", greedy token match " << token_accuracy * 100.0
         << "%, " << elapsed << " s";
  report("7 overfit on the synthetic corpus",
         eval_ce < 0.05 && token_accuracy >= 0.95 && elapsed < 300.0, detail.str());
}

// --- criterion 8 -----------------------------------------------------------

void metric_oracles() {
  const std::vector<eve::EvalPair> toy{
      {"v1", {"a", "man", "is", "running"},
       {{"a", "man", "is", "running", "fast"}, {"a", "man", "runs"}}},
      {"v2", {"two", "dogs", "are", "playing", "in", "the", "park"},
       {{"two", "dogs", "play", "in", "a", "park"},
        {"dogs", "are", "playing", "in", "the", "park"}}},
      {"v3", {"someone", "is", "cooking"},
       {{"a", "person", "is", "cooking", "food"}, {"someone", "cooks", "a", "meal"}}},
  };
  const double b = eve::bleu4(toy);
  const double r = eve::rouge_l(toy);
  const double c = eve::cider_d(toy);

  const std::vector<eve::EvalPair> identical{
      {"x", {"a", "cat", "sits", "and", "waits"}, {{"a", "cat", "sits", "and", "waits"}}}};
  const double b1 = eve::bleu4(identical);
  const double r1 = eve::rouge_l(identical);

  const bool ok = std::abs(b - 0.859388704764030) <= 1e-6 &&
                  std::abs(r - 0.761973775017253) <= 1e-6 &&
                  std::abs(c - 3.994150102832645) <= 1e-6 &&
                  std::abs(b1 - 1.0) <= 1e-12 && std::abs(r1 - 1.0) <= 1e-12;
  std::ostringstream detail;
  detail << "bleu4 " << b << ", rouge_l " << r << ", cider_d " << c;
  report("8 caption metrics vs frozen oracles", ok, detail.str());
}

// --- criterion 9 -----------------------------------------------------------

void pipeline_determinism() {
  auto run_once = [](const fs::path& root) {
    eve::SynthConfig synth_cfg;
    synth_cfg.seed = 7;
    eve::generate(synth_cfg, root / "data");

    const eve::PipelineConfig cfg = eve::parse_config_text(
        "p = 2\n"
        "projection_dim = 32\n"
        "projection_seed = 11\n"
        "state_size = 32\n"
        "lr = 0.003\n"
        "batch = 8\n"
        "epochs = 2\n"
        "dropout = 0.5\n"
        "max_len = 8\n"
        "train_seed = 13\n"
        "vocab_size = 64\n",
        "determinism");

    eve::EncodeOptions enc;
    enc.activations_2d = root / "data" / "activations_2d";
    enc.activations_3d = root / "data" / "activations_3d";
    enc.detections = root / "data" / "detections.jsonl";
    enc.actions = root / "data" / "actions.jsonl";
    enc.dictionary = root / "data" / "dictionary.txt";
    enc.out_dir = root / "codes";
    enc.config = cfg;
    enc.workers = 2;
    eve::run_encode(enc);

    eve::run_train(root / "codes", root / "data" / "corpus.jsonl", cfg, root / "ckpt");
    eve::run_caption(root / "ckpt" / "epoch_0002.evem", root / "codes",
                     root / "pred.jsonl");
  };

  Scratch a("det_a"), b("det_b");
  run_once(a.path());
  run_once(b.path());

  bool ok = true;
  std::string why;
  auto compare = [&](const fs::path& rel) {
    if (!ok) return;
    const std::string bytes_a = read_bytes(a.path() / rel);
    const std::string bytes_b = read_bytes(b.path() / rel);
    if (bytes_a.empty() || bytes_a != bytes_b) {
      ok = false;
      why = rel.string() + " differs";
    }
  };
  for (int i = 0; i < 20; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "vid%04d.code.evet", i);
    compare(fs::path("codes") / name);
  }
  compare(fs::path("codes") / "manifest.json");
  compare(fs::path("ckpt") / "epoch_0001.evem");
  compare(fs::path("ckpt") / "epoch_0002.evem");
  compare(fs::path("ckpt") / "loss.csv");
  compare("pred.jsonl");
  report("9 end-to-end determinism", ok, why);
}

// --- criterion 10 ----------------------------------------------------------

void dimension_audit() {
  eve::CodeManifest manifest;
  manifest.p = 4;
  manifest.m = 1536;
  manifest.k = 4096;
  manifest.n_object_labels = 62;
  manifest.n_action_labels = 101;
  const std::size_t d = manifest.fused_len();
  const bool d_ok = d == 158518;

  const eve::FixedProjection proj = eve::make_projection(d, 2048, 77);
  std::mt19937_64 eng(78);
  std::vector<double> v(d);
  for (auto& x : v) x = static_cast<double>(eng() >> 11) / 4503599627370496.0 - 1.0;

  const auto start = Clock::now();
  const std::vector<double> upsilon = eve::project(v, proj);
  const double elapsed = seconds_since(start);

  bool range_ok = upsilon.size() == 2048;
  for (double u : upsilon) range_ok = range_ok && std::abs(u) < 1.0;

  std::ostringstream detail;
  detail << "d = " << d << ", projection " << elapsed << " s";
  report("10 full-scale dimension audit", d_ok && range_ok && elapsed < 1.0, detail.str());
}

}  // namespace

int main() {
  dft_oracle_equivalence();
  pyramid_structure();
  shift_reversal_invariance();
  temporal_sensitivity();
  semantic_round_trip();
  gradient_check();
  overfit_synthetic_corpus();
  metric_oracles();
  pipeline_determinism();
  dimension_audit();

  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria failed\n", failures);
  return 1;
}
