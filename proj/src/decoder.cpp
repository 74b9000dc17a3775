#include "dialectmt/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dialectmt/errors.hpp"

namespace dialectmt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-softmax of the last logits row. Scores are taken from the full
// distribution; PAD and BOS are then barred from selection so they are never
// generated but never distort the probabilities of real tokens.
Eigen::VectorXd next_log_probs(const Eigen::MatrixXd& logits) {
  const Eigen::Index r = logits.rows() - 1;
  const double m = logits.row(r).maxCoeff();
  const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
  Eigen::VectorXd lp = logits.row(r).transpose().array() - lse;
  lp(Vocabulary::kPad) = kNegInf;
  lp(Vocabulary::kBos) = kNegInf;
  return lp;
}

std::int32_t argmax_lowest_id(const Eigen::VectorXd& scores) {
  std::int32_t best = 0;
  double best_score = scores(0);
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > best_score) {
      best_score = scores(i);
      best = static_cast<std::int32_t>(i);
    }
  }
  return best;
}

int effective_cap(const ModelConfig& cfg, int max_len) {
  if (max_len < 1) throw UsageError("max_len must be at least 1");
  // tgt_in holds BOS plus the generated prefix and may not exceed the
  // positional table
  return std::min(max_len, cfg.max_seq_len - 1);
}

}  // namespace

TokenIds greedy_decode(const Transformer& model, const ModelParams& params,
                       std::span<const std::int32_t> src, int max_len) {
  const int cap = effective_cap(model.config(), max_len);
  EncodedMemory memory = model.encode(params, src);
  TokenIds seq = {Vocabulary::kBos};
  for (int step = 0; step < cap; ++step) {
    Eigen::MatrixXd logits = model.decode_logits(params, memory, seq);
    const std::int32_t tok = argmax_lowest_id(next_log_probs(logits));
    seq.push_back(tok);
    if (tok == Vocabulary::kEos) break;
  }
  return seq;
}

double BeamHypothesis::adjusted_score(double alpha) const {
  const auto generated = static_cast<double>(
      ids.size() > 1 ? ids.size() - 1 : 1);  // BOS excluded
  return log_prob / std::pow(generated, alpha);
}

std::vector<BeamHypothesis> beam_search(const Transformer& model,
                                        const ModelParams& params,
                                        std::span<const std::int32_t> src,
                                        int beam_width, int max_len,
                                        double length_penalty_alpha) {
  if (beam_width < 1) throw UsageError("beam_width must be at least 1");
  if (length_penalty_alpha < 0)
    throw UsageError("length penalty alpha must be nonnegative");
  const int cap = effective_cap(model.config(), max_len);
  EncodedMemory memory = model.encode(params, src);

  std::vector<BeamHypothesis> live = {{{Vocabulary::kBos}, 0.0, false}};
  std::vector<BeamHypothesis> pool;

  for (int step = 1; step <= cap && !live.empty(); ++step) {
    std::vector<BeamHypothesis> candidates;
    candidates.reserve(live.size() *
                       static_cast<std::size_t>(model.config().vocab_size));
    for (const BeamHypothesis& hyp : live) {
      Eigen::MatrixXd logits = model.decode_logits(params, memory, hyp.ids);
      Eigen::VectorXd lp = next_log_probs(logits);
      for (std::int32_t tok = 0; tok < model.config().vocab_size; ++tok) {
        if (lp(tok) == kNegInf) continue;
        BeamHypothesis next;
        next.ids = hyp.ids;
        next.ids.push_back(tok);
        next.log_prob = hyp.log_prob + lp(tok);
        candidates.push_back(std::move(next));
      }
    }
    // keep the beam_width best by cumulative score, lowest ids on ties
    std::sort(candidates.begin(), candidates.end(),
              [](const BeamHypothesis& a, const BeamHypothesis& b) {
                if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                return a.ids < b.ids;
              });
    if (static_cast<int>(candidates.size()) > beam_width)
      candidates.resize(static_cast<std::size_t>(beam_width));

    live.clear();
    for (BeamHypothesis& cand : candidates) {
      if (cand.ids.back() == Vocabulary::kEos || step == cap) {
        cand.finished = true;
        pool.push_back(std::move(cand));
      } else {
        live.push_back(std::move(cand));
      }
    }
  }

  std::sort(pool.begin(), pool.end(),
            [length_penalty_alpha](const BeamHypothesis& a,
                                   const BeamHypothesis& b) {
              const double sa = a.adjusted_score(length_penalty_alpha);
              const double sb = b.adjusted_score(length_penalty_alpha);
              if (sa != sb) return sa > sb;
              return a.ids < b.ids;
            });
  return pool;
}

TranslationSet translate_all(const std::map<std::string, TaggedModel>& models,
                             std::string_view src_text,
                             const Vocabulary& vocab,
                             const DecodeSettings& settings,
                             const NormalizeOptions& norm) {
  if (models.empty()) throw DataError("translate_all: no registered models");
  const std::string source = normalize_text(src_text, norm);
  if (source.empty())
    throw DataError("translate_all: source text normalizes to empty");
  TokenIds src_ids = encode_text(vocab, source);

  TranslationSet out;
  out.source = source;
  for (const auto& [tag, tm] : models) {
    Transformer model(tm.config);
    std::vector<BeamHypothesis> hyps =
        beam_search(model, tm.params, src_ids, settings.beam_width,
                    settings.max_len, settings.length_penalty_alpha);
    out.candidates[tag] = decode_ids(vocab, hyps.front().ids);
  }
  return out;
}

}  // namespace dialectmt
