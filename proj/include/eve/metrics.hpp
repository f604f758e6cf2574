#pragma once

#include <string>
#include <vector>

namespace eve {

/// One candidate caption with its reference set, all pre-tokenized.
struct EvalPair {
  std::string video_id;
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;
};

/// Corpus BLEU-4: modified n-gram precisions with per-reference clip counts,
/// geometric mean over n=1..4, brevity penalty from the closest reference
/// length (ties to the shorter). 0 when any precision is 0.
double bleu4(const std::vector<EvalPair>& pairs);

/// Mean over pairs of the best-reference LCS F-score with beta = 1.2.
double rouge_l(const std::vector<EvalPair>& pairs);

/// CIDEr-D: per-n TF-IDF cosine with candidate counts clipped against each
/// reference, gaussian length penalty (sigma = 6), averaged over references
/// and n, scaled by 10; document frequency over each video's reference set.
/// Degenerates to 0 on a single-video corpus (IDF is log 1).
double cider_d(const std::vector<EvalPair>& pairs);

}  // namespace eve
