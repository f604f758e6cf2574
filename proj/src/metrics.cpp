#include "eve/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>

#include "eve/errors.hpp"

namespace eve {
namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Tokens(tokens.begin() + static_cast<long>(i),
                    tokens.begin() + static_cast<long>(i + n))];
  return counts;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void require_pairs(const std::vector<EvalPair>& pairs, const char* op) {
  if (pairs.empty()) throw ArgumentError(std::string(op) + ": no pairs");
  for (const auto& pair : pairs)
    if (pair.references.empty())
      throw ArgumentError(std::string(op) + ": pair '" + pair.video_id + "' has no references");
}

}  // namespace

double bleu4(const std::vector<EvalPair>& pairs) {
  require_pairs(pairs, "bleu4");

  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t cand_len = 0, ref_len = 0;

  for (const auto& pair : pairs) {
    cand_len += pair.candidate.size();
    // Closest reference length; ties broken toward the shorter reference.
    std::size_t closest = pair.references.front().size();
    for (const auto& ref : pair.references) {
      const auto diff = [&](std::size_t len) {
        return len > pair.candidate.size() ? len - pair.candidate.size()
                                           : pair.candidate.size() - len;
      };
      if (diff(ref.size()) < diff(closest) ||
          (diff(ref.size()) == diff(closest) && ref.size() < closest))
        closest = ref.size();
    }
    ref_len += closest;

    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts cand = count_ngrams(pair.candidate, n);
      NgramCounts clip;
      for (const auto& ref : pair.references)
        for (const auto& [gram, count] : count_ngrams(ref, n))
          clip[gram] = std::max(clip[gram], count);
      for (const auto& [gram, count] : cand) {
        totals[n - 1] += count;
        auto it = clip.find(gram);
        if (it != clip.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  if (cand_len == 0) return 0.0;
  double log_precision = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (matches[n] == 0 || totals[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = cand_len > ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) /
                                             static_cast<double>(cand_len));
  return bp * std::exp(log_precision / 4.0);
}

double rouge_l(const std::vector<EvalPair>& pairs) {
  require_pairs(pairs, "rouge_l");
  constexpr double kBeta = 1.2;
  constexpr double kBeta2 = kBeta * kBeta;

  double total = 0.0;
  for (const auto& pair : pairs) {
    double best = 0.0;
    for (const auto& ref : pair.references) {
      if (ref.empty() || pair.candidate.empty()) continue;
      const double lcs = static_cast<double>(lcs_length(pair.candidate, ref));
      const double recall = lcs / static_cast<double>(ref.size());
      const double precision = lcs / static_cast<double>(pair.candidate.size());
      const double denom = recall + kBeta2 * precision;
      if (denom > 0.0) best = std::max(best, (1.0 + kBeta2) * recall * precision / denom);
    }
    total += best;
  }
  return total / static_cast<double>(pairs.size());
}

double cider_d(const std::vector<EvalPair>& pairs) {
  require_pairs(pairs, "cider_d");
  constexpr double kSigma = 6.0;
  constexpr std::size_t kMaxN = 4;

  // Document frequency per n: number of videos whose reference set contains
  // the n-gram. IDF uses df floored at 1 so candidate-only n-grams still
  // weigh into the candidate norm.
  std::map<Tokens, std::size_t> df[kMaxN];
  for (const auto& pair : pairs) {
    for (std::size_t n = 0; n < kMaxN; ++n) {
      std::set<Tokens> seen;
      for (const auto& ref : pair.references)
        for (const auto& [gram, count] : count_ngrams(ref, n + 1)) seen.insert(gram);
      for (const auto& gram : seen) ++df[n][gram];
    }
  }
  const double log_videos = std::log(static_cast<double>(pairs.size()));

  struct TfIdf {
    std::map<Tokens, double> vec;
    double norm = 0.0;
  };
  auto tfidf = [&](const Tokens& tokens, std::size_t n) {
    TfIdf out;
    double sq = 0.0;
    for (const auto& [gram, count] : count_ngrams(tokens, n + 1)) {
      auto it = df[n].find(gram);
      const double freq = it == df[n].end() ? 0.0 : static_cast<double>(it->second);
      const double idf = log_videos - std::log(std::max(1.0, freq));
      const double v = static_cast<double>(count) * idf;
      out.vec.emplace(gram, v);
      sq += v * v;
    }
    out.norm = std::sqrt(sq);
    return out;
  };

  double corpus = 0.0;
  for (const auto& pair : pairs) {
    TfIdf hyp[kMaxN];
    for (std::size_t n = 0; n < kMaxN; ++n) hyp[n] = tfidf(pair.candidate, n);

    double by_n[kMaxN] = {0.0, 0.0, 0.0, 0.0};
    for (const auto& ref : pair.references) {
      const double delta =
          static_cast<double>(pair.candidate.size()) - static_cast<double>(ref.size());
      const double gauss = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
      for (std::size_t n = 0; n < kMaxN; ++n) {
        const TfIdf rv = tfidf(ref, n);
        if (hyp[n].norm == 0.0 || rv.norm == 0.0) continue;
        double dot = 0.0;
        for (const auto& [gram, hv] : hyp[n].vec) {
          auto it = rv.vec.find(gram);
          if (it != rv.vec.end()) dot += std::min(hv, it->second) * it->second;
        }
        by_n[n] += dot / (hyp[n].norm * rv.norm) * gauss;
      }
    }
    double pair_score = 0.0;
    for (std::size_t n = 0; n < kMaxN; ++n)
      pair_score += by_n[n] / static_cast<double>(pair.references.size());
    corpus += 10.0 * pair_score / static_cast<double>(kMaxN);
  }
  return corpus / static_cast<double>(pairs.size());
}

}  // namespace eve
