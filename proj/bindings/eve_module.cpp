#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eve/errors.hpp"
#include "eve/fusion.hpp"
#include "eve/gru.hpp"
#include "eve/hft.hpp"
#include "eve/metrics.hpp"
#include "eve/pipeline.hpp"
#include "eve/synth.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

eve::ActivationSeries series_from_array(const py::array_t<float>& values,
                                        const std::string& source) {
  if (values.ndim() != 2) throw eve::ArgumentError("activations must be a 2-D array");
  eve::ActivationSeries series;
  series.video_id = "array";
  if (source == "frame2d")
    series.source = eve::Source::frame2d;
  else if (source == "clip3d")
    series.source = eve::Source::clip3d;
  else
    throw eve::ArgumentError("source must be 'frame2d' or 'clip3d'");
  series.rows = static_cast<std::size_t>(values.shape(0));
  series.cols = static_cast<std::size_t>(values.shape(1));
  series.values.resize(series.rows * series.cols);
  const auto view = values.unchecked<2>();
  for (std::size_t t = 0; t < series.rows; ++t)
    for (std::size_t j = 0; j < series.cols; ++j)
      series.at(t, j) = view(static_cast<long>(t), static_cast<long>(j));
  return series;
}

std::vector<eve::EvalPair> pairs_from_python(
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::vector<std::string>>>>& raw) {
  std::vector<eve::EvalPair> pairs;
  for (std::size_t i = 0; i < raw.size(); ++i)
    pairs.push_back({"pair" + std::to_string(i), raw[i].first, raw[i].second});
  return pairs;
}

eve::PipelineConfig config_from_text(const std::string& text) {
  return text.empty() ? eve::PipelineConfig{} : eve::parse_config_text(text, "<config>");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Video feature encoding and GRU captioning core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<eve::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<eve::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<eve::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<eve::ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<eve::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("tokenize", &eve::tokenize, "sentence"_a,
        "Lower-case, strip punctuation (keeping intra-word apostrophes) and split.");
  m.def("sample_frames", &eve::sample_frames, "total"_a, "count"_a,
        "Evenly spaced frame indices over [0, total).");

  m.def(
      "dft_first_p",
      [](const std::vector<double>& signal, std::size_t p) {
        return eve::dft_first_p(signal, p);
      },
      "signal"_a, "p"_a, "Magnitudes of the first p DFT bins (zero-padded to p).");
  m.def(
      "pyramid_segments",
      [](std::size_t total) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& seg : eve::pyramid_segments(total)) out.emplace_back(seg.begin, seg.end);
        return out;
      },
      "total"_a, "The 7 half-open pyramid ranges over [0, total).");
  m.def(
      "encode_neuron",
      [](const std::vector<double>& series, std::size_t p) {
        return eve::encode_neuron(series, eve::HftConfig{p});
      },
      "series"_a, "p"_a = 4, "7p pyramid DFT magnitudes of one activation series.");
  m.def(
      "encode_activations",
      [](const py::array_t<float>& values, std::size_t p, const std::string& source) {
        const auto code = eve::encode_activations(series_from_array(values, source),
                                                  eve::HftConfig{p});
        return py::array_t<double>(static_cast<py::ssize_t>(code.values.size()),
                                   code.values.data());
      },
      "activations"_a, "p"_a = 4, "source"_a = "frame2d",
      "Neuron-major 7pm temporal code of a T x m activation matrix.");
  m.def(
      "project_code",
      [](const std::vector<double>& fused, std::size_t output_dim, std::uint64_t seed) {
        return eve::project(fused, eve::make_projection(fused.size(), output_dim, seed));
      },
      "fused"_a, "output_dim"_a = 2048, "seed"_a = 1,
      "tanh(Wv) under the seeded fixed projection.");

  m.def(
      "bleu4",
      [](const std::vector<std::pair<std::vector<std::string>,
                                     std::vector<std::vector<std::string>>>>& pairs) {
        return eve::bleu4(pairs_from_python(pairs));
      },
      "pairs"_a, "Corpus BLEU-4 over (candidate, references) pairs.");
  m.def(
      "rouge_l",
      [](const std::vector<std::pair<std::vector<std::string>,
                                     std::vector<std::vector<std::string>>>>& pairs) {
        return eve::rouge_l(pairs_from_python(pairs));
      },
      "pairs"_a, "Mean best-reference LCS F-score (beta = 1.2).");
  m.def(
      "cider_d",
      [](const std::vector<std::pair<std::vector<std::string>,
                                     std::vector<std::vector<std::string>>>>& pairs) {
        return eve::cider_d(pairs_from_python(pairs));
      },
      "pairs"_a, "CIDEr-D over (candidate, references) pairs.");

  m.def(
      "synth",
      [](const std::filesystem::path& out_dir, std::uint64_t seed, std::size_t videos,
         std::size_t frames, std::size_t clips, std::size_t neurons_2d,
         std::size_t neurons_3d) {
        eve::SynthConfig cfg;
        cfg.seed = seed;
        cfg.n_videos = videos;
        cfg.frames = frames;
        cfg.clips = clips;
        cfg.neurons_2d = neurons_2d;
        cfg.neurons_3d = neurons_3d;
        const auto result = eve::run_synth(cfg, out_dir);
        py::list planted;
        for (const auto& v : result.videos) {
          py::dict entry;
          entry["video_id"] = v.video_id;
          entry["noun"] = cfg.nouns[v.noun];
          entry["verb"] = cfg.verbs[v.verb];
          entry["count"] = v.count;
          planted.append(entry);
        }
        return planted;
      },
      "out_dir"_a, "seed"_a = 1, "videos"_a = 20, "frames"_a = 16, "clips"_a = 4,
      "neurons_2d"_a = 12, "neurons_3d"_a = 8,
      "Write a synthetic dataset; returns the planted (noun, verb, count) per video.");

  m.def(
      "encode",
      [](const std::filesystem::path& activations_2d, const std::filesystem::path& activations_3d,
         const std::filesystem::path& detections, const std::filesystem::path& actions,
         const std::filesystem::path& dictionary, const std::filesystem::path& out_dir,
         const std::string& config, std::size_t workers) {
        eve::EncodeOptions opt;
        opt.activations_2d = activations_2d;
        opt.activations_3d = activations_3d;
        opt.detections = detections;
        opt.actions = actions;
        opt.dictionary = dictionary;
        opt.out_dir = out_dir;
        opt.config = config_from_text(config);
        opt.workers = workers;
        eve::run_encode(opt);
      },
      "activations_2d"_a, "activations_3d"_a, "detections"_a, "actions"_a, "dictionary"_a,
      "out_dir"_a, "config"_a = "", "workers"_a = 0,
      "Run the full visual encoding stage over a dataset (empty actions path drops eta).");

  m.def(
      "train",
      [](const std::filesystem::path& codes_dir, const std::filesystem::path& corpus,
         const std::filesystem::path& ckpt_dir, const std::string& config) {
        eve::run_train(codes_dir, corpus, config_from_text(config), ckpt_dir);
      },
      "codes_dir"_a, "corpus"_a, "ckpt_dir"_a, "config"_a = "",
      "Train the captioning model; writes per-epoch checkpoints and loss.csv.");

  m.def(
      "caption",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& codes_dir,
         const std::filesystem::path& out_path) {
        eve::run_caption(ckpt, codes_dir, out_path);
      },
      "ckpt"_a, "codes_dir"_a, "out"_a, "Decode captions for every encoded video.");

  m.def(
      "greedy_caption",
      [](const std::filesystem::path& ckpt, const std::vector<double>& code,
         std::size_t max_len) {
        const eve::GruModel model = eve::load_checkpoint(ckpt);
        Eigen::VectorXd upsilon(static_cast<long>(code.size()));
        for (std::size_t i = 0; i < code.size(); ++i)
          upsilon(static_cast<long>(i)) = code[i];
        const auto tokens =
            eve::greedy_decode(model, upsilon, max_len ? max_len : model.config.max_len);
        std::vector<std::string> words;
        for (const auto tok : tokens)
          words.push_back(model.vocab.token(static_cast<std::size_t>(tok)));
        return words;
      },
      "ckpt"_a, "code"_a, "max_len"_a = 0,
      "Greedy-decode one visual code with a trained checkpoint.");

  m.def(
      "beam_caption",
      [](const std::filesystem::path& ckpt, const std::vector<double>& code, std::size_t beam,
         std::size_t max_len) {
        const eve::GruModel model = eve::load_checkpoint(ckpt);
        Eigen::VectorXd upsilon(static_cast<long>(code.size()));
        for (std::size_t i = 0; i < code.size(); ++i)
          upsilon(static_cast<long>(i)) = code[i];
        const auto tokens = eve::beam_decode(model, upsilon,
                                             max_len ? max_len : model.config.max_len, beam);
        std::vector<std::string> words;
        for (const auto tok : tokens)
          words.push_back(model.vocab.token(static_cast<std::size_t>(tok)));
        return words;
      },
      "ckpt"_a, "code"_a, "beam"_a = 5, "max_len"_a = 0,
      "Beam-search decode one visual code with a trained checkpoint.");

  m.def(
      "evaluate",
      [](const std::filesystem::path& predictions, const std::filesystem::path& references) {
        const eve::EvalScores scores = eve::run_eval(predictions, references);
        py::dict out;
        out["bleu4"] = scores.bleu4;
        out["rougel"] = scores.rouge_l;
        out["ciderd"] = scores.cider_d;
        return out;
      },
      "predictions"_a, "references"_a,
      "Score predictions JSON Lines against a reference corpus.");
}
