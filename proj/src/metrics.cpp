#include "dialectmt/metrics.hpp"

#include <sstream>

#include "dialectmt/errors.hpp"
#include "dialectmt/unicode.hpp"

namespace dialectmt {

namespace {

std::u32string prepare(std::string_view text, const MetricOptions& opts) {
  std::u32string cps = uni::decode_utf8(text);
  if (opts.normalize) return normalize_text(cps, opts.norm);
  return uni::nfc(cps);
}

std::vector<std::u32string> words_of(const std::u32string& text) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t cp : text) {
    if (cp == U' ') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

struct SentenceUnits {
  std::u32string ref_chars, hyp_chars;
  std::vector<std::u32string> ref_words, hyp_words;
};

SentenceUnits units_for(std::string_view reference, std::string_view hypothesis,
                        const MetricOptions& opts) {
  SentenceUnits u;
  u.ref_chars = prepare(reference, opts);
  u.hyp_chars = prepare(hypothesis, opts);
  if (u.ref_chars.empty())
    throw DataError("empty reference after metric normalization");
  u.ref_words = words_of(u.ref_chars);
  u.hyp_words = words_of(u.hyp_chars);
  return u;
}

}  // namespace

double sentence_cer(std::string_view reference, std::string_view hypothesis,
                    const MetricOptions& opts) {
  SentenceUnits u = units_for(reference, hypothesis, opts);
  EditBreakdown b = edit_distance(u.ref_chars, u.hyp_chars);
  return static_cast<double>(b.distance) /
         static_cast<double>(u.ref_chars.size());
}

double sentence_wer(std::string_view reference, std::string_view hypothesis,
                    const MetricOptions& opts) {
  SentenceUnits u = units_for(reference, hypothesis, opts);
  EditBreakdown b = edit_distance(u.ref_words, u.hyp_words);
  return static_cast<double>(b.distance) /
         static_cast<double>(u.ref_words.size());
}

ScorePair corpus_scores(
    std::span<const std::pair<std::string, std::string>> pairs,
    const MetricOptions& opts, CorpusBreakdown* breakdown) {
  if (pairs.empty()) throw DataError("corpus_scores: no sentence pairs");
  CorpusBreakdown total;
  auto add = [](EditBreakdown& acc, const EditBreakdown& b) {
    acc.insertions += b.insertions;
    acc.deletions += b.deletions;
    acc.substitutions += b.substitutions;
    acc.distance += b.distance;
  };
  for (const auto& [ref, hyp] : pairs) {
    SentenceUnits u = units_for(ref, hyp, opts);
    add(total.chars, edit_distance(u.ref_chars, u.hyp_chars));
    add(total.words, edit_distance(u.ref_words, u.hyp_words));
    total.reference_chars += static_cast<std::int64_t>(u.ref_chars.size());
    total.reference_words += static_cast<std::int64_t>(u.ref_words.size());
    total.sentences += 1;
  }
  if (breakdown) *breakdown = total;
  ScorePair s;
  s.cer = static_cast<double>(total.chars.distance) /
          static_cast<double>(total.reference_chars);
  s.wer = static_cast<double>(total.words.distance) /
          static_cast<double>(total.reference_words);
  return s;
}

ScorePair corpus_scores_macro(
    std::span<const std::pair<std::string, std::string>> pairs,
    const MetricOptions& opts) {
  if (pairs.empty()) throw DataError("corpus_scores: no sentence pairs");
  ScorePair sum;
  for (const auto& [ref, hyp] : pairs) {
    sum.cer += sentence_cer(ref, hyp, opts);
    sum.wer += sentence_wer(ref, hyp, opts);
  }
  const double n = static_cast<double>(pairs.size());
  return {sum.wer / n, sum.cer / n};
}

}  // namespace dialectmt
