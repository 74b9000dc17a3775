#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialectmt/corpus.hpp"

namespace dialectmt {

using TokenIds = std::vector<std::int32_t>;

// Character-level vocabulary. Ids 0-3 are reserved specials, corpus code
// points follow sorted ascending, so construction is order-independent.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kUnk = 3;
  static constexpr std::int32_t kNumSpecials = 4;

  // Distinct code points of every standard and dialect field. Errors on an
  // empty corpus.
  static Vocabulary build(std::span<const ParallelExample> examples);

  // From an already-sorted, duplicate-free token list (used by load()).
  static Vocabulary from_tokens(std::vector<char32_t> tokens);

  std::int32_t size() const {
    return kNumSpecials + static_cast<std::int32_t>(tokens_.size());
  }
  std::int32_t id_for(char32_t cp) const;  // kUnk when absent
  bool contains(char32_t cp) const;
  char32_t token_for(std::int32_t id) const;  // id must be a non-special id

  // One token per line; line number = id - 4; specials implicit.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  const std::vector<char32_t>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<char32_t> tokens_;  // index i holds the token for id i+4
  std::unordered_map<char32_t, std::int32_t> ids_;
};

// BOS + per-code-point ids (UNK for unknown characters) + EOS.
TokenIds encode_text(const Vocabulary& vocab, std::string_view text);
TokenIds encode_text(const Vocabulary& vocab, std::u32string_view text);

// Concatenation of tokens for non-special ids; PAD/BOS/EOS skipped, UNK
// rendered as U+FFFD. Errors on an id outside the vocabulary.
std::string decode_ids(const Vocabulary& vocab,
                       std::span<const std::int32_t> ids);

}  // namespace dialectmt
