#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "dialectmt/model.hpp"
#include "dialectmt/normalize.hpp"
#include "dialectmt/tokenizer.hpp"

namespace dialectmt {

struct DecodeSettings {
  int beam_width = 4;
  double length_penalty_alpha = 0.6;
  int max_len = 128;  // generated tokens after BOS; also capped by the model
};

// Argmax decoding from BOS, ties broken by lowest token id; stops at EOS or
// after max_len generated tokens. PAD and BOS are never generated. The
// returned sequence includes the leading BOS and the terminal EOS if one was
// produced.
TokenIds greedy_decode(const Transformer& model, const ModelParams& params,
                       std::span<const std::int32_t> src, int max_len);

struct BeamHypothesis {
  TokenIds ids;           // BOS followed by generated tokens
  double log_prob = 0.0;  // sum of per-step log-softmax scores (BOS excluded)
  bool finished = false;  // last token is EOS or length hit max_len

  // log_prob / length^alpha over generated token count.
  double adjusted_score(double alpha) const;
};

// Standard beam expansion over all tokens except PAD and BOS. Finished
// hypotheses leave the beam for a pool and are returned ranked by adjusted
// score, ties broken by lexicographically smaller token ids (the same
// lowest-id rule greedy uses). With beam_width large enough to keep every
// partial hypothesis alive the result enumerates the full prefix tree.
std::vector<BeamHypothesis> beam_search(const Transformer& model,
                                        const ModelParams& params,
                                        std::span<const std::int32_t> src,
                                        int beam_width, int max_len,
                                        double length_penalty_alpha);

struct TaggedModel {
  ModelConfig config;
  ModelParams params;
};

struct TranslationSet {
  std::string source;  // normalized source text
  std::map<std::string, std::string> candidates;  // model tag -> dialect text
};

// Normalizes, encodes, decodes once per registered model. Errors when the
// source normalizes to empty or no model is registered.
TranslationSet translate_all(const std::map<std::string, TaggedModel>& models,
                             std::string_view src_text,
                             const Vocabulary& vocab,
                             const DecodeSettings& settings,
                             const NormalizeOptions& norm = {});

}  // namespace dialectmt
