#pragma once

#include <string>
#include <string_view>

namespace dialectmt::uni {

// Strict UTF-8 decode; rejects overlong forms, surrogates and values past
// U+10FFFF with DataError.
std::u32string decode_utf8(std::string_view s);

std::string encode_utf8(std::u32string_view s);

// Canonical composition (NFC).
std::u32string nfc(std::u32string_view s);

}  // namespace dialectmt::uni
