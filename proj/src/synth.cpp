#include "eve/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "eve/errors.hpp"
#include "eve/rng.hpp"
#include "json.hpp"

namespace eve {
namespace {

using nlohmann::json;

std::string video_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "vid%04zu", i);
  return buf;
}

ActivationSeries sinusoid_series(const std::string& id, Source source, std::size_t T,
                                 std::size_t neurons, std::size_t frequency,
                                 std::mt19937_64& eng) {
  ActivationSeries series;
  series.video_id = id;
  series.source = source;
  series.rows = T;
  series.cols = neurons;
  series.values.resize(T * neurons);
  for (std::size_t j = 0; j < neurons; ++j) {
    const double phase = 2.0 * std::numbers::pi * unit_open(eng);
    const double amplitude = 0.8 + 0.4 * unit_open(eng);
    for (std::size_t t = 0; t < T; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(frequency) *
                               static_cast<double>(t) / static_cast<double>(T) +
                           phase;
      series.at(t, j) = static_cast<float>(amplitude * std::sin(angle));
    }
  }
  return series;
}

void write_json_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  for (const auto& j : lines) out << j.dump() << '\n';
  if (!out) throw ValidationError(path.string() + ": write failed");
}

}  // namespace

SynthResult generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_videos < 1 || cfg.frames < 4 || cfg.clips < 4 || cfg.neurons_2d < 1 ||
      cfg.neurons_3d < 1 || cfg.nouns.empty() || cfg.verbs.empty())
    throw ArgumentError("synth: counts must be >= 1, timesteps >= 4");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "activations_2d");
  fs::create_directories(out_dir / "activations_3d");

  auto eng = seeded_engine(cfg.seed, 0x73796e7468ull);

  // Shuffled (noun, verb, count) triples; videos walk the list so captions
  // stay a deterministic function of the planted signals.
  std::vector<std::array<std::size_t, 3>> combos;
  for (std::size_t n = 0; n < cfg.nouns.size(); ++n)
    for (std::size_t v = 0; v < cfg.verbs.size(); ++v)
      for (std::size_t c = 1; c <= 2; ++c) combos.push_back({n, v, c});
  for (std::size_t i = combos.size(); i-- > 1;)
    std::swap(combos[i], combos[index_below(eng, i + 1)]);

  const std::size_t q = 5;
  const auto samples = sample_frames(cfg.frames, q);

  SynthResult result;
  result.config = cfg;
  std::vector<json> detection_lines, action_lines, corpus_lines;

  for (std::size_t i = 0; i < cfg.n_videos; ++i) {
    const auto [noun, verb, count] = combos[i % combos.size()];
    PlantedVideo planted;
    planted.video_id = video_name(i);
    planted.noun = noun;
    planted.verb = verb;
    planted.count = count;

    write_tensor(sinusoid_series(planted.video_id, Source::frame2d, cfg.frames, cfg.neurons_2d,
                                 verb + 1, eng),
                 out_dir / "activations_2d" / (planted.video_id + ".evet"));
    write_tensor(sinusoid_series(planted.video_id, Source::clip3d, cfg.clips, cfg.neurons_3d,
                                 verb + 1, eng),
                 out_dir / "activations_3d" / (planted.video_id + ".evet"));

    // Linear centroid track across the q sampled frames; all instances in a
    // frame share one centroid so the frame mean equals it exactly.
    const double x0 = 0.1 + 0.2 * unit_open(eng);
    const double y0 = 0.1 + 0.2 * unit_open(eng);
    const double dx = 0.02 + 0.1 * unit_open(eng);
    const double dy = 0.02 + 0.1 * unit_open(eng);
    const double base_conf = 0.55 + 0.4 * unit_open(eng);
    double max_conf = 0.0;
    std::vector<double> cx(samples.size()), cy(samples.size());
    for (std::size_t z = 0; z < samples.size(); ++z) {
      cx[z] = x0 + dx * static_cast<double>(z);
      cy[z] = y0 + dy * static_cast<double>(z);
      json dets = json::array();
      const double conf = base_conf * (0.85 + 0.03 * static_cast<double>(z));
      max_conf = std::max(max_conf, conf);
      for (std::size_t inst = 0; inst < count; ++inst) {
        dets.push_back({{"label", cfg.nouns[noun]},
                        {"confidence", conf},
                        {"cx", cx[z]},
                        {"cy", cy[z]},
                        {"w", 0.1 + 0.02 * static_cast<double>(inst)},
                        {"h", 0.12 + 0.02 * static_cast<double>(inst)}});
      }
      detection_lines.push_back({{"video_id", planted.video_id},
                                 {"frame_index", samples[z]},
                                 {"detections", dets}});
    }
    planted.pr = max_conf;
    planted.fr = static_cast<double>(count) / 10.0;
    for (std::size_t z = 0; z + 1 < samples.size(); ++z) {
      planted.velocity.push_back(cx[z + 1] - cx[z]);
      planted.velocity.push_back(cy[z + 1] - cy[z]);
    }

    // Clip distributions peaked on the planted verb.
    json per_clip = json::array();
    for (std::size_t clip = 0; clip < cfg.clips; ++clip) {
      std::vector<double> probs(cfg.verbs.size(),
                                cfg.verbs.size() > 1 ? 0.3 / static_cast<double>(cfg.verbs.size() - 1)
                                                     : 0.0);
      probs[verb] = cfg.verbs.size() > 1 ? 0.7 : 1.0;
      per_clip.push_back(probs);
    }
    action_lines.push_back(
        {{"video_id", planted.video_id}, {"labels", cfg.verbs}, {"per_clip", per_clip}});

    const std::string caption =
        count == 1 ? "a " + cfg.nouns[noun] + " is " + cfg.verbs[verb]
                   : "two " + cfg.nouns[noun] + "s are " + cfg.verbs[verb];
    json captions = json::array();
    const std::size_t copies = 2 + index_below(eng, 2);
    for (std::size_t c = 0; c < copies; ++c) captions.push_back(caption);
    corpus_lines.push_back({{"video_id", planted.video_id}, {"captions", captions}});

    result.videos.push_back(std::move(planted));
  }

  write_json_lines(out_dir / "detections.jsonl", detection_lines);
  write_json_lines(out_dir / "actions.jsonl", action_lines);
  write_json_lines(out_dir / "corpus.jsonl", corpus_lines);

  Vocabulary dict;
  std::set<std::string> words{"a", "is", "two", "are"};
  for (const auto& n : cfg.nouns) {
    words.insert(n);
    words.insert(n + "s");
  }
  for (const auto& v : cfg.verbs) words.insert(v);
  for (const auto& w : words) dict.add(w);
  write_vocab(dict, out_dir / "dictionary.txt");

  json manifest;
  manifest["config"] = {{"seed", cfg.seed},        {"n_videos", cfg.n_videos},
                        {"frames", cfg.frames},    {"clips", cfg.clips},
                        {"neurons_2d", cfg.neurons_2d}, {"neurons_3d", cfg.neurons_3d},
                        {"nouns", cfg.nouns},      {"verbs", cfg.verbs}};
  json videos = json::array();
  for (const auto& v : result.videos)
    videos.push_back({{"video_id", v.video_id},
                      {"noun", cfg.nouns[v.noun]},
                      {"verb", cfg.verbs[v.verb]},
                      {"count", v.count},
                      {"pr", v.pr},
                      {"fr", v.fr},
                      {"velocity", v.velocity}});
  manifest["videos"] = videos;
  std::ofstream mf(out_dir / "MANIFEST.json", std::ios::trunc);
  if (!mf) throw ValidationError((out_dir / "MANIFEST.json").string() + ": cannot open");
  mf << manifest.dump(2) << '\n';

  return result;
}

std::pair<ActivationSeries, ActivationSeries> generate_ambiguous_pair(const SynthConfig& cfg) {
  auto eng = seeded_engine(cfg.seed, 0x616d626967ull);
  ActivationSeries a =
      sinusoid_series("ambiguous_a", Source::frame2d, cfg.frames, cfg.neurons_2d, 2, eng);

  ActivationSeries b = a;
  b.video_id = "ambiguous_b";
  for (std::size_t j = 0; j < b.cols; ++j) {
    std::vector<float> column(b.rows);
    for (std::size_t t = 0; t < b.rows; ++t) column[t] = b.at(t, j);
    std::sort(column.begin(), column.end());
    for (std::size_t t = 0; t < b.rows; ++t) b.at(t, j) = column[t];
  }
  return {std::move(a), std::move(b)};
}

}  // namespace eve
