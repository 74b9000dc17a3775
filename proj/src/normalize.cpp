#include "dialectmt/normalize.hpp"

#include "dialectmt/unicode.hpp"

namespace dialectmt {

namespace {

bool is_whitespace(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' ||
         cp == U'\v' || cp == U'\f';
}

}  // namespace

bool NormalizeOptions::is_punctuation(char32_t cp) const {
  return punctuation.find(cp) != std::u32string::npos;
}

bool NormalizeOptions::is_emoji(char32_t cp) const {
  for (const auto& [lo, hi] : emoji_ranges) {
    if (cp >= lo && cp <= hi) return true;
  }
  return false;
}

std::u32string normalize_text(std::u32string_view raw,
                              const NormalizeOptions& opts) {
  std::u32string composed = uni::nfc(raw);

  std::u32string kept;
  kept.reserve(composed.size());
  for (char32_t cp : composed) {
    if (opts.is_emoji(cp) || opts.is_punctuation(cp)) continue;
    kept.push_back(cp);
  }

  std::u32string out;
  out.reserve(kept.size());
  bool pending_space = false;
  for (char32_t cp : kept) {
    if (is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }

  return uni::nfc(out);
}

std::string normalize_text(std::string_view raw, const NormalizeOptions& opts) {
  return uni::encode_utf8(normalize_text(uni::decode_utf8(raw), opts));
}

}  // namespace dialectmt
