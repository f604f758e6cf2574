#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eve/ingest.hpp"

namespace eve {

/// Detector/action labels that survive intersection with the dictionary,
/// sorted lexicographically.
struct LabelSpace {
  std::vector<std::string> object_labels;
  std::vector<std::string> action_labels;
};

/// Labels whose tokenized form is entirely in-vocabulary (every word, for
/// multi-word labels), deduplicated and sorted.
std::vector<std::string> intersect_labels(const std::vector<std::string>& raw_labels,
                                          const Vocabulary& vocab);

/// Object code gamma: one block of 2+2(q-1) values per label in space order,
/// [Pr, Fr, vx1, vy1, ..., vx(q-1), vy(q-1)], computed over the q sampled
/// frames. Blocks stay zero for labels never detected on those frames.
std::vector<double> object_code(const DetectionSet& dets, std::size_t T, const LabelSpace& space,
                                std::size_t q = 5, std::size_t N = 10);

/// Action code eta: blocks [predicted flag, mean probability] per action
/// label in space order. The flag is 1 only for the argmax of the clip-mean
/// distribution, and only when that argmax label is in the space.
std::vector<double> action_code(const ActionDistribution& acts, const LabelSpace& space);

/// Block width of one object-code entry for a given q.
inline std::size_t object_block_size(std::size_t q) { return 2 + 2 * (q - 1); }

}  // namespace eve
