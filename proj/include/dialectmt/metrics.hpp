#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialectmt/normalize.hpp"

namespace dialectmt {

struct EditBreakdown {
  std::int64_t insertions = 0;
  std::int64_t deletions = 0;
  std::int64_t substitutions = 0;
  std::int64_t distance = 0;

  friend bool operator==(const EditBreakdown&, const EditBreakdown&) = default;
};

// Unit-cost Levenshtein distance between reference and hypothesis with a
// backtraced operation breakdown. Among cost-equal scripts the backtrace
// prefers substitution over deletion over insertion, so the breakdown is
// deterministic. Deletions remove reference symbols, insertions add
// hypothesis symbols.
template <typename Seq>
EditBreakdown edit_distance(const Seq& ref, const Seq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::int64_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::int64_t& {
    return dp[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::int64_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      std::int64_t del = at(i - 1, j) + 1;
      std::int64_t ins = at(i, j - 1) + 1;
      at(i, j) = std::min(sub, std::min(del, ins));
    }
  }

  EditBreakdown out;
  out.distance = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  return out;
}

struct MetricOptions {
  // Pass both sides through normalize_text before scoring so punctuation
  // never inflates error rates; toggleable for sensitivity studies.
  bool normalize = true;
  NormalizeOptions norm;
};

// Character-level edit distance over NFC code points divided by reference
// code-point count. Errors when the reference is empty after the configured
// normalization.
double sentence_cer(std::string_view reference, std::string_view hypothesis,
                    const MetricOptions& opts = {});

// Word-level edit distance over space-delimited words divided by reference
// word count.
double sentence_wer(std::string_view reference, std::string_view hypothesis,
                    const MetricOptions& opts = {});

struct ScorePair {
  double wer = 0.0;
  double cer = 0.0;
};

struct CorpusBreakdown {
  EditBreakdown chars;
  EditBreakdown words;
  std::int64_t reference_chars = 0;
  std::int64_t reference_words = 0;
  std::int64_t sentences = 0;
};

// Micro-average: total edit distance over total reference length, per unit.
ScorePair corpus_scores(
    std::span<const std::pair<std::string, std::string>> pairs,
    const MetricOptions& opts = {}, CorpusBreakdown* breakdown = nullptr);

// Per-sentence mean of the sentence-level rates (the --macro alternative).
ScorePair corpus_scores_macro(
    std::span<const std::pair<std::string, std::string>> pairs,
    const MetricOptions& opts = {});

}  // namespace dialectmt
