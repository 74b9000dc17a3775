#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dialectmt {

// Write-temp-then-rename so readers never observe a partial artifact.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);  // DataError if absent

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);

}  // namespace dialectmt
