#include "eve/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "eve/errors.hpp"
#include "eve/fusion.hpp"
#include "eve/gru.hpp"
#include "eve/hft.hpp"
#include "eve/metrics.hpp"
#include "eve/semantic.hpp"
#include "json.hpp"

namespace eve {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& key, const std::string& origin) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(origin + ": key '" + key + "' has non-numeric value '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& value, const std::string& key,
                             const std::string& origin) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError(origin + ": key '" + key + "' has non-integer value '" + value + "'");
  return v;
}

std::vector<std::string> sorted_ids_in_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir))
    throw ValidationError(std::string(what) + ": not a directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".evet") continue;
    ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

[[noreturn]] void missing_videos_error(const std::string& where,
                                       const std::vector<std::string>& missing) {
  std::ostringstream os;
  os << "missing videos in " << where << ":";
  for (const auto& id : missing) os << ' ' << id;
  throw ValidationError(os.str());
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");

    if (key == "p") cfg.p = parse_unsigned(value, key, origin);
    else if (key == "projection_dim") cfg.projection_dim = parse_unsigned(value, key, origin);
    else if (key == "projection_seed") cfg.projection_seed = parse_unsigned(value, key, origin);
    else if (key == "q") cfg.q = parse_unsigned(value, key, origin);
    else if (key == "N") cfg.n_max = parse_unsigned(value, key, origin);
    else if (key == "state_size") cfg.state_size = parse_unsigned(value, key, origin);
    else if (key == "lr") cfg.lr = parse_double(value, key, origin);
    else if (key == "batch") cfg.batch = parse_unsigned(value, key, origin);
    else if (key == "epochs") cfg.epochs = parse_unsigned(value, key, origin);
    else if (key == "dropout") cfg.dropout = parse_double(value, key, origin);
    else if (key == "max_len") cfg.max_len = parse_unsigned(value, key, origin);
    else if (key == "train_seed") cfg.train_seed = parse_unsigned(value, key, origin);
    else if (key == "beam") cfg.beam = parse_unsigned(value, key, origin);
    else if (key == "vocab_size") cfg.vocab_size = parse_unsigned(value, key, origin);
    else throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }

  if (cfg.p < 1) throw ConfigError(origin + ": p must be >= 1");
  if (cfg.projection_dim < 1) throw ConfigError(origin + ": projection_dim must be >= 1");
  if (cfg.q < 2) throw ConfigError(origin + ": q must be >= 2");
  if (cfg.n_max < 1) throw ConfigError(origin + ": N must be >= 1");
  if (cfg.state_size < 1) throw ConfigError(origin + ": state_size must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError(origin + ": lr must be > 0");
  if (cfg.batch < 1) throw ConfigError(origin + ": batch must be >= 1");
  if (cfg.epochs < 1) throw ConfigError(origin + ": epochs must be >= 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ConfigError(origin + ": dropout must be in [0, 1)");
  if (cfg.max_len < 3) throw ConfigError(origin + ": max_len must be >= 3");
  if (cfg.beam < 1) throw ConfigError(origin + ": beam must be >= 1");
  if (cfg.vocab_size < 5) throw ConfigError(origin + ": vocab_size must be >= 5");
  return cfg;
}

PipelineConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

void run_encode(const EncodeOptions& options) {
  const PipelineConfig& cfg = options.config;
  const bool with_actions = !options.actions.empty();

  const auto ids_2d = sorted_ids_in_dir(options.activations_2d, "activations-2d");
  const auto ids_3d = sorted_ids_in_dir(options.activations_3d, "activations-3d");
  if (ids_2d.empty()) throw ValidationError("activations-2d: no .evet files");

  const Vocabulary dict = read_vocab(options.dictionary);
  const auto detections = read_detections(options.detections);
  std::unordered_map<std::string, const DetectionSet*> dets_by_id;
  for (const auto& d : detections) dets_by_id.emplace(d.video_id, &d);

  std::vector<ActionDistribution> actions;
  std::unordered_map<std::string, const ActionDistribution*> acts_by_id;
  if (with_actions) {
    actions = read_actions(options.actions);
    for (const auto& a : actions) acts_by_id.emplace(a.video_id, &a);
  }

  // Every video named by any input must be present in all of them.
  std::set<std::string> universe(ids_2d.begin(), ids_2d.end());
  universe.insert(ids_3d.begin(), ids_3d.end());
  for (const auto& [id, unused] : dets_by_id) universe.insert(id);
  for (const auto& [id, unused] : acts_by_id) universe.insert(id);
  std::vector<std::string> missing;
  for (const auto& id : universe) {
    const bool ok = std::binary_search(ids_2d.begin(), ids_2d.end(), id) &&
                    std::binary_search(ids_3d.begin(), ids_3d.end(), id) &&
                    dets_by_id.count(id) != 0 && (!with_actions || acts_by_id.count(id) != 0);
    if (!ok) missing.push_back(id);
  }
  if (!missing.empty()) missing_videos_error("one or more inputs", missing);

  LabelSpace space;
  {
    std::set<std::string> raw_objects;
    for (const auto& d : detections)
      for (const auto& frame : d.frames)
        for (const auto& det : frame.detections) raw_objects.insert(det.label);
    space.object_labels =
        intersect_labels({raw_objects.begin(), raw_objects.end()}, dict);
    if (with_actions) {
      std::set<std::string> raw_actions;
      for (const auto& a : actions) raw_actions.insert(a.labels.begin(), a.labels.end());
      space.action_labels =
          intersect_labels({raw_actions.begin(), raw_actions.end()}, dict);
    }
  }

  // Probe one video pair for the shared neuron counts.
  const ActivationSeries probe_2d =
      read_tensor(options.activations_2d / (ids_2d.front() + ".evet"));
  const ActivationSeries probe_3d =
      read_tensor(options.activations_3d / (ids_2d.front() + ".evet"));

  CodeManifest manifest;
  manifest.p = cfg.p;
  manifest.m = probe_2d.cols;
  manifest.k = probe_3d.cols;
  manifest.n_object_labels = space.object_labels.size();
  manifest.n_action_labels = space.action_labels.size();
  manifest.q = cfg.q;
  manifest.projection_dim = cfg.projection_dim;
  manifest.seed = cfg.projection_seed;

  const FixedProjection projection =
      make_projection(manifest.fused_len(), cfg.projection_dim, cfg.projection_seed);
  fs::create_directories(options.out_dir);

  const HftConfig hft{cfg.p};
  auto encode_one = [&](const std::string& id) {
    const ActivationSeries act_2d = read_tensor(options.activations_2d / (id + ".evet"));
    const ActivationSeries act_3d = read_tensor(options.activations_3d / (id + ".evet"));
    if (act_2d.cols != manifest.m)
      throw ValidationError(id + ": 2D neuron count " + std::to_string(act_2d.cols) +
                            " != " + std::to_string(manifest.m));
    if (act_3d.cols != manifest.k)
      throw ValidationError(id + ": 3D neuron count " + std::to_string(act_3d.cols) +
                            " != " + std::to_string(manifest.k));

    const TemporalCode alpha = encode_activations(act_2d, hft);
    const TemporalCode beta = encode_activations(act_3d, hft);
    const std::vector<double> gamma =
        object_code(*dets_by_id.at(id), act_2d.rows, space, cfg.q, cfg.n_max);
    const std::vector<double> eta =
        with_actions ? action_code(*acts_by_id.at(id), space) : std::vector<double>{};

    const std::vector<double> fused =
        concat_code(alpha.values, beta.values, gamma, eta, manifest);
    const std::vector<double> upsilon = project(fused, projection);

    ActivationSeries code;
    code.video_id = id;
    code.source = Source::frame2d;
    code.rows = 1;
    code.cols = upsilon.size();
    code.values.assign(upsilon.begin(), upsilon.end());
    write_tensor(code, options.out_dir / (id + ".code.evet"));
  };

  const std::size_t workers =
      options.workers > 0 ? options.workers
                          : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (workers <= 1 || ids_2d.size() <= 1) {
    for (const auto& id : ids_2d) encode_one(id);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= ids_2d.size()) return;
        try {
          encode_one(ids_2d[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(workers, ids_2d.size()); ++i)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  json mj;
  mj["p"] = manifest.p;
  mj["q"] = manifest.q;
  mj["N"] = cfg.n_max;
  mj["m"] = manifest.m;
  mj["k"] = manifest.k;
  mj["d"] = manifest.fused_len();
  mj["projection_dim"] = manifest.projection_dim;
  mj["projection_seed"] = manifest.seed;
  mj["object_labels"] = space.object_labels;
  mj["action_labels"] = space.action_labels;
  mj["eta_included"] = with_actions;
  mj["videos"] = ids_2d;
  std::ofstream mf(options.out_dir / "manifest.json", std::ios::trunc);
  if (!mf) throw ValidationError((options.out_dir / "manifest.json").string() + ": cannot open");
  mf << mj.dump(2) << '\n';
}

namespace {

json read_codes_manifest(const fs::path& codes_dir) {
  const fs::path path = codes_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open (not an encode output?)");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Eigen::VectorXd read_code_vector(const fs::path& codes_dir, const std::string& id) {
  const ActivationSeries series = read_tensor(codes_dir / (id + ".code.evet"));
  Eigen::VectorXd v(static_cast<long>(series.values.size()));
  for (std::size_t i = 0; i < series.values.size(); ++i)
    v(static_cast<long>(i)) = series.values[i];
  return v;
}

}  // namespace

void run_train(const fs::path& codes_dir, const fs::path& corpus_path,
               const PipelineConfig& config, const fs::path& ckpt_dir) {
  const json manifest = read_codes_manifest(codes_dir);
  const std::size_t code_dim = manifest.at("projection_dim").get<std::size_t>();
  if (code_dim != config.state_size)
    throw ConfigError("state_size " + std::to_string(config.state_size) +
                      " != visual code dimension " + std::to_string(code_dim));

  const CaptionCorpus corpus = read_corpus(corpus_path);
  if (corpus.entries.empty()) throw ValidationError(corpus_path.string() + ": empty corpus");

  std::vector<std::string> missing;
  for (const auto& entry : corpus.entries)
    if (!fs::exists(codes_dir / (entry.video_id + ".code.evet")))
      missing.push_back(entry.video_id);
  if (!missing.empty()) missing_videos_error("codes directory", missing);

  const Vocabulary vocab = build_vocab(corpus, config.vocab_size);

  std::vector<Eigen::VectorXd> codes;
  std::vector<TrainSample> samples;
  for (const auto& entry : corpus.entries) {
    codes.push_back(read_code_vector(codes_dir, entry.video_id));
    for (const auto& caption : entry.captions)
      samples.push_back({codes.size() - 1, encode_caption(caption, vocab, config.max_len)});
  }

  TrainConfig tc;
  tc.lr = config.lr;
  tc.batch = config.batch;
  tc.epochs = config.epochs;
  tc.dropout = config.dropout;
  tc.max_len = config.max_len;
  tc.seed = config.train_seed;
  tc.beam = config.beam;
  GruModel model = init_model(vocab, config.state_size, tc);

  fs::create_directories(ckpt_dir);
  std::ofstream loss_csv(ckpt_dir / "loss.csv", std::ios::trunc);
  if (!loss_csv) throw ValidationError((ckpt_dir / "loss.csv").string() + ": cannot open");
  loss_csv << "epoch,loss\n";

  train(model, codes, samples, [&](std::size_t epoch, const GruModel& m, double loss_value) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%04zu.evem", epoch);
    save_checkpoint(m, ckpt_dir / name);
    char row[64];
    std::snprintf(row, sizeof(row), "%zu,%.17g\n", epoch, loss_value);
    loss_csv << row;
  });
  if (!loss_csv) throw ValidationError((ckpt_dir / "loss.csv").string() + ": write failed");
}

void run_caption(const fs::path& ckpt_path, const fs::path& codes_dir,
                 const fs::path& out_path) {
  const GruModel model = load_checkpoint(ckpt_path);
  const json manifest = read_codes_manifest(codes_dir);
  const auto ids = manifest.at("videos").get<std::vector<std::string>>();

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw ValidationError(out_path.string() + ": cannot open for writing");
  for (const auto& id : ids) {
    const Eigen::VectorXd upsilon = read_code_vector(codes_dir, id);
    const std::vector<std::int32_t> tokens =
        model.config.beam > 1 ? beam_decode(model, upsilon, model.config.max_len, model.config.beam)
                              : greedy_decode(model, upsilon, model.config.max_len);
    std::string caption;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) caption += ' ';
      caption += model.vocab.token(static_cast<std::size_t>(tokens[i]));
    }
    out << json{{"video_id", id}, {"caption", caption}}.dump() << '\n';
  }
  if (!out) throw ValidationError(out_path.string() + ": write failed");
}

EvalScores run_eval(const fs::path& predictions_path, const fs::path& references_path) {
  std::ifstream in(predictions_path);
  if (!in) throw FormatError(predictions_path.string() + ": cannot open");
  std::unordered_map<std::string, std::vector<std::string>> predictions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(predictions_path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
    if (!j.contains("video_id") || !j["video_id"].is_string() || !j.contains("caption") ||
        !j["caption"].is_string())
      throw ValidationError(predictions_path.string() + ":" + std::to_string(line_no) +
                            ": expected {\"video_id\",\"caption\"}");
    const std::string id = j["video_id"].get<std::string>();
    if (predictions.count(id))
      throw ValidationError(predictions_path.string() + ":" + std::to_string(line_no) +
                            ": duplicate prediction for " + id);
    predictions.emplace(id, tokenize(j["caption"].get<std::string>()));
  }

  const CaptionCorpus refs = read_corpus(references_path);
  if (refs.entries.empty()) throw ValidationError(references_path.string() + ": empty corpus");

  std::vector<EvalPair> pairs;
  std::vector<std::string> missing;
  for (const auto& entry : refs.entries) {
    auto it = predictions.find(entry.video_id);
    if (it == predictions.end()) {
      missing.push_back(entry.video_id);
      continue;
    }
    pairs.push_back({entry.video_id, it->second, entry.captions});
  }
  if (!missing.empty()) missing_videos_error("predictions", missing);
  if (pairs.size() == 1)
    std::cerr << "warning: single-video corpus, CIDEr-D document frequencies degenerate "
                 "and the score is 0\n";

  return {bleu4(pairs), rouge_l(pairs), cider_d(pairs)};
}

SynthResult run_synth(const SynthConfig& cfg, const fs::path& out_dir) {
  return generate(cfg, out_dir);
}

}  // namespace eve
