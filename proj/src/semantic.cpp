#include "eve/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "eve/errors.hpp"

namespace eve {

std::vector<std::string> intersect_labels(const std::vector<std::string>& raw_labels,
                                          const Vocabulary& vocab) {
  std::set<std::string> kept;
  for (const auto& label : raw_labels) {
    auto words = tokenize(label);
    if (words.empty()) continue;
    bool all_known = std::all_of(words.begin(), words.end(),
                                 [&](const std::string& w) { return vocab.contains(w); });
    if (all_known) kept.insert(label);
  }
  return {kept.begin(), kept.end()};
}

std::vector<double> object_code(const DetectionSet& dets, std::size_t T, const LabelSpace& space,
                                std::size_t q, std::size_t N) {
  if (q < 2) throw ArgumentError("object_code: q must be >= 2");
  if (N < 1) throw ArgumentError("object_code: N must be >= 1");
  for (const auto& frame : dets.frames)
    if (frame.frame_index >= T)
      throw ArgumentError("object_code: frame index " + std::to_string(frame.frame_index) +
                          " outside [0," + std::to_string(T) + ")");

  std::unordered_map<std::string, std::size_t> label_pos;
  for (std::size_t i = 0; i < space.object_labels.size(); ++i)
    label_pos.emplace(space.object_labels[i], i);

  const auto samples = sample_frames(T, q);
  const std::size_t block = object_block_size(q);

  // Per label and sampled slot: max confidence, instance count, centroid mean.
  struct FrameStat {
    double max_conf = 0.0;
    std::size_t count = 0;
    double sum_cx = 0.0, sum_cy = 0.0;
  };
  std::vector<std::vector<FrameStat>> stats(space.object_labels.size(),
                                            std::vector<FrameStat>(samples.size()));

  std::map<std::size_t, const DetectionFrame*> frame_by_index;
  for (const auto& frame : dets.frames) frame_by_index.emplace(frame.frame_index, &frame);

  for (std::size_t z = 0; z < samples.size(); ++z) {
    auto it = frame_by_index.find(samples[z]);
    if (it == frame_by_index.end()) continue;
    for (const auto& det : it->second->detections) {
      auto pos = label_pos.find(det.label);
      if (pos == label_pos.end()) continue;  // dictionary filter
      FrameStat& s = stats[pos->second][z];
      s.max_conf = std::max(s.max_conf, det.confidence);
      s.count += 1;
      s.sum_cx += det.cx;
      s.sum_cy += det.cy;
    }
  }

  std::vector<double> code(space.object_labels.size() * block, 0.0);
  for (std::size_t i = 0; i < space.object_labels.size(); ++i) {
    double pr = 0.0;
    std::size_t max_count = 0;
    for (const auto& s : stats[i]) {
      pr = std::max(pr, s.max_conf);
      max_count = std::max(max_count, s.count);
    }
    if (max_count == 0) continue;  // never detected: block stays zero

    double* out = code.data() + i * block;
    out[0] = pr;
    out[1] = std::min(1.0, static_cast<double>(max_count) / static_cast<double>(N));
    for (std::size_t z = 0; z + 1 < q; ++z) {
      if (z + 1 >= samples.size()) break;  // fewer samples than q (T < q)
      const FrameStat& a = stats[i][z];
      const FrameStat& b = stats[i][z + 1];
      if (a.count == 0 || b.count == 0) continue;  // absent in either frame: zero pair
      out[2 + 2 * z] = b.sum_cx / static_cast<double>(b.count) -
                       a.sum_cx / static_cast<double>(a.count);
      out[3 + 2 * z] = b.sum_cy / static_cast<double>(b.count) -
                       a.sum_cy / static_cast<double>(a.count);
    }
  }
  return code;
}

std::vector<double> action_code(const ActionDistribution& acts, const LabelSpace& space) {
  std::vector<double> code(2 * space.action_labels.size(), 0.0);
  if (acts.per_clip.empty() || acts.labels.empty()) return code;

  std::vector<double> mean(acts.labels.size(), 0.0);
  for (const auto& clip : acts.per_clip) {
    if (clip.size() != acts.labels.size())
      throw DimensionError("action_code: probability vector length != |labels|");
    for (std::size_t i = 0; i < clip.size(); ++i) mean[i] += clip[i];
  }
  for (double& v : mean) v /= static_cast<double>(acts.per_clip.size());

  // Argmax over all network labels; ties go to the lexicographically first.
  std::size_t best = 0;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (mean[i] > mean[best] || (mean[i] == mean[best] && acts.labels[i] < acts.labels[best]))
      best = i;
  }
  const std::string& predicted = acts.labels[best];

  std::unordered_map<std::string, double> prob_by_label;
  for (std::size_t i = 0; i < acts.labels.size(); ++i) prob_by_label[acts.labels[i]] = mean[i];

  for (std::size_t i = 0; i < space.action_labels.size(); ++i) {
    const std::string& label = space.action_labels[i];
    code[2 * i] = label == predicted ? 1.0 : 0.0;
    auto it = prob_by_label.find(label);
    code[2 * i + 1] = it == prob_by_label.end() ? 0.0 : it->second;
  }
  return code;
}

}  // namespace eve
