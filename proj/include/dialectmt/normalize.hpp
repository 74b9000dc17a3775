#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialectmt {

// Cleaning configuration. The punctuation set and emoji ranges are
// configurable so their effect on scores can be studied; whitespace
// handling is fixed (space, tab, CR, LF, VT, FF).
struct NormalizeOptions {
  std::u32string punctuation =
      U"?!.,;:\"'()[]{}—–-…।";  // includes the danda
  std::vector<std::pair<char32_t, char32_t>> emoji_ranges = {
      {0x1F300, 0x1F5FF}, {0x1F600, 0x1F64F}, {0x1F680, 0x1F6FF},
      {0x1F900, 0x1F9FF}, {0x2600, 0x26FF},   {0xFE0F, 0xFE0F}};

  bool is_punctuation(char32_t cp) const;
  bool is_emoji(char32_t cp) const;
};

// NFC, drop emoji-range characters, drop punctuation, collapse every
// whitespace run to a single space and trim. Removals run before the
// collapse so they can never leave a doubled space; a final NFC pass keeps
// the result a fixed point when a removal juxtaposes a base+combining pair.
std::u32string normalize_text(std::u32string_view raw,
                              const NormalizeOptions& opts = {});
std::string normalize_text(std::string_view raw,
                           const NormalizeOptions& opts = {});

}  // namespace dialectmt
