#include "eve/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "eve/errors.hpp"
#include "json.hpp"

namespace eve {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'V', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::string offset_msg(const std::filesystem::path& path, std::size_t offset,
                       const std::string& what) {
  std::ostringstream os;
  os << path.string() << ": " << what << " (byte offset " << offset << ")";
  return os.str();
}

json parse_line(const std::filesystem::path& path, std::size_t line_no,
                const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
  }
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
  throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

double require_number(const json& j, const char* key, const std::filesystem::path& path,
                      std::size_t line_no) {
  if (!j.contains(key) || !j[key].is_number())
    line_error(path, line_no, std::string("missing or non-numeric field '") + key + "'");
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, const std::filesystem::path& path,
                           std::size_t line_no) {
  if (!j.contains(key) || !j[key].is_string())
    line_error(path, line_no, std::string("missing or non-string field '") + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

ActivationSeries read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 20) throw FormatError(offset_msg(path, bytes.size(), "truncated header"));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(offset_msg(path, 0, "bad magic, expected EVET"));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (get_u32(p + 4) != kVersion)
    throw FormatError(offset_msg(path, 4, "unsupported version " + std::to_string(get_u32(p + 4))));
  std::uint32_t tag = get_u32(p + 8);
  if (tag > 1) throw FormatError(offset_msg(path, 8, "unknown source tag " + std::to_string(tag)));

  ActivationSeries series;
  series.source = static_cast<Source>(tag);
  series.rows = get_u32(p + 12);
  series.cols = get_u32(p + 16);
  if (series.rows == 0 || series.cols == 0)
    throw FormatError(offset_msg(path, 12, "zero dimension in header"));

  const std::size_t expected = 20 + 4 * series.rows * series.cols;
  if (bytes.size() != expected)
    throw FormatError(offset_msg(path, bytes.size(),
                                 "payload size mismatch: expected " + std::to_string(expected) +
                                     " bytes, got " + std::to_string(bytes.size())));

  series.values.resize(series.rows * series.cols);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    float v = std::bit_cast<float>(get_u32(p + 20 + 4 * i));
    if (!std::isfinite(v))
      throw FormatError(offset_msg(path, 20 + 4 * i, "non-finite value in payload"));
    series.values[i] = v;
  }
  series.video_id = path.stem().string();
  return series;
}

void write_tensor(const ActivationSeries& series, const std::filesystem::path& path) {
  if (series.rows == 0 || series.cols == 0)
    throw ValidationError("write_tensor: zero dimension");
  if (series.values.size() != series.rows * series.cols)
    throw DimensionError("write_tensor: values size " + std::to_string(series.values.size()) +
                         " != " + std::to_string(series.rows) + "x" + std::to_string(series.cols));
  for (std::size_t i = 0; i < series.values.size(); ++i)
    if (!std::isfinite(series.values[i]))
      throw ValidationError("write_tensor: non-finite value at flat index " + std::to_string(i));

  std::string bytes;
  bytes.reserve(20 + 4 * series.values.size());
  bytes.append(kMagic, 4);
  put_u32(bytes, kVersion);
  put_u32(bytes, static_cast<std::uint32_t>(series.source));
  put_u32(bytes, static_cast<std::uint32_t>(series.rows));
  put_u32(bytes, static_cast<std::uint32_t>(series.cols));
  for (float v : series.values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError(path.string() + ": write failed");
}

std::vector<DetectionSet> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");

  std::vector<DetectionSet> sets;
  std::unordered_map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(path, line_no, line);
    std::string video_id = require_string(j, "video_id", path, line_no);
    double frame_raw = require_number(j, "frame_index", path, line_no);
    if (frame_raw < 0 || frame_raw != std::floor(frame_raw))
      line_error(path, line_no, "frame_index must be a nonnegative integer");
    DetectionFrame frame;
    frame.frame_index = static_cast<std::size_t>(frame_raw);
    if (!j.contains("detections") || !j["detections"].is_array())
      line_error(path, line_no, "missing 'detections' array");
    for (const auto& dj : j["detections"]) {
      Detection d;
      d.label = require_string(dj, "label", path, line_no);
      d.confidence = require_number(dj, "confidence", path, line_no);
      d.cx = require_number(dj, "cx", path, line_no);
      d.cy = require_number(dj, "cy", path, line_no);
      d.w = require_number(dj, "w", path, line_no);
      d.h = require_number(dj, "h", path, line_no);
      if (d.confidence < 0.0 || d.confidence > 1.0)
        line_error(path, line_no, "confidence out of [0,1]");
      for (double c : {d.cx, d.cy, d.w, d.h})
        if (c < 0.0 || c > 1.0) line_error(path, line_no, "box coordinate out of [0,1]");
      frame.detections.push_back(std::move(d));
    }

    auto it = by_id.find(video_id);
    if (it == by_id.end()) {
      by_id.emplace(video_id, sets.size());
      sets.push_back(DetectionSet{video_id, {std::move(frame)}});
    } else {
      DetectionSet& set = sets[it->second];
      if (frame.frame_index <= set.frames.back().frame_index)
        line_error(path, line_no, "frame_index not strictly increasing for video " + video_id);
      set.frames.push_back(std::move(frame));
    }
  }
  return sets;
}

std::vector<ActionDistribution> read_actions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");

  std::vector<ActionDistribution> out;
  std::unordered_map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(path, line_no, line);
    ActionDistribution dist;
    dist.video_id = require_string(j, "video_id", path, line_no);
    if (seen.count(dist.video_id))
      line_error(path, line_no, "duplicate video_id " + dist.video_id);
    seen[dist.video_id] = true;
    if (!j.contains("labels") || !j["labels"].is_array())
      line_error(path, line_no, "missing 'labels' array");
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) line_error(path, line_no, "non-string label");
      dist.labels.push_back(l.get<std::string>());
    }
    if (!j.contains("per_clip") || !j["per_clip"].is_array() || j["per_clip"].empty())
      line_error(path, line_no, "missing or empty 'per_clip' array");
    for (const auto& pj : j["per_clip"]) {
      if (!pj.is_array() || pj.size() != dist.labels.size())
        line_error(path, line_no, "probability vector length != |labels|");
      std::vector<double> probs;
      double sum = 0.0;
      for (const auto& v : pj) {
        if (!v.is_number()) line_error(path, line_no, "non-numeric probability");
        double x = v.get<double>();
        if (x < 0.0) line_error(path, line_no, "negative probability");
        probs.push_back(x);
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-5)
        line_error(path, line_no, "probability vector sums to " + std::to_string(sum));
      dist.per_clip.push_back(std::move(probs));
    }
    out.push_back(std::move(dist));
  }
  return out;
}

CaptionCorpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");

  CaptionCorpus corpus;
  std::unordered_map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(path, line_no, line);
    CaptionEntry entry;
    entry.video_id = require_string(j, "video_id", path, line_no);
    if (seen.count(entry.video_id))
      line_error(path, line_no, "duplicate video_id " + entry.video_id);
    seen[entry.video_id] = true;
    if (!j.contains("captions") || !j["captions"].is_array() || j["captions"].empty())
      line_error(path, line_no, "missing or empty 'captions' array");
    for (const auto& c : j["captions"]) {
      if (!c.is_string()) line_error(path, line_no, "non-string caption");
      auto tokens = tokenize(c.get<std::string>());
      if (tokens.empty())
        line_error(path, line_no, "caption tokenizes to nothing: \"" + c.get<std::string>() + "\"");
      entry.captions.push_back(std::move(tokens));
    }
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  auto alnum = [](unsigned char c) { return std::isalnum(c) != 0; };
  std::string cleaned(sentence.size(), ' ');
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(sentence[i]);
    if (alnum(c)) {
      cleaned[i] = static_cast<char>(std::tolower(c));
    } else if (c == '\'' && i > 0 && i + 1 < sentence.size() &&
               alnum(static_cast<unsigned char>(sentence[i - 1])) &&
               alnum(static_cast<unsigned char>(sentence[i + 1]))) {
      cleaned[i] = '\'';
    }
  }
  std::vector<std::string> tokens;
  std::istringstream stream(cleaned);
  std::string tok;
  while (stream >> tok) tokens.push_back(tok);
  return tokens;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

void Vocabulary::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  static const char* reserved[4] = {"<pad>", "<bos>", "<eos>", "<unk>"};
  if (tokens.size() < 4)
    throw ValidationError("vocabulary must contain the four reserved tokens");
  for (int i = 0; i < 4; ++i)
    if (tokens[static_cast<std::size_t>(i)] != reserved[i])
      throw ValidationError("vocabulary index " + std::to_string(i) + " must be " + reserved[i]);
  for (auto& t : tokens) {
    if (index_.count(t)) throw ValidationError("duplicate vocabulary token: " + t);
    index_.emplace(t, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

std::int32_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

Vocabulary build_vocab(const CaptionCorpus& corpus, std::size_t max_size) {
  if (max_size < 5) throw ArgumentError("build_vocab: max_size must be >= 5");
  std::map<std::string, std::size_t> freq;
  for (const auto& entry : corpus.entries)
    for (const auto& caption : entry.captions)
      for (const auto& tok : caption) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const auto& [tok, count] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(tok);
  }
  return vocab;
}

std::vector<std::int32_t> encode_caption(const std::vector<std::string>& tokens,
                                         const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 3) throw ArgumentError("encode_caption: max_len must be >= 3");
  const std::size_t content = std::min(tokens.size(), max_len - 2);
  std::vector<std::int32_t> out;
  out.reserve(max_len);
  out.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < content; ++i) out.push_back(vocab.lookup(tokens[i]));
  out.push_back(Vocabulary::kEos);
  out.resize(max_len, Vocabulary::kPad);
  return out;
}

std::vector<std::size_t> sample_frames(std::size_t T, std::size_t q) {
  if (T < 1) throw ArgumentError("sample_frames: T must be >= 1");
  if (q < 2) throw ArgumentError("sample_frames: q must be >= 2");
  std::vector<std::size_t> indices;
  if (T < q) {
    for (std::size_t t = 0; t < T; ++t) indices.push_back(t);
    return indices;
  }
  for (std::size_t i = 0; i < q; ++i) {
    double pos = static_cast<double>(i) * static_cast<double>(T - 1) / static_cast<double>(q - 1);
    std::size_t idx = static_cast<std::size_t>(std::llround(pos));  // half away from zero
    if (indices.empty() || idx > indices.back()) indices.push_back(idx);
  }
  return indices;
}

Vocabulary read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].empty())
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": empty token line");
  return Vocabulary(std::move(tokens));
}

void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << '\n';
  if (!out) throw ValidationError(path.string() + ": write failed");
}

}  // namespace eve
