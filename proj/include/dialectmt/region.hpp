#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace dialectmt {

// The five dialect regions of the Vashantor corpus. Closed set: anything
// else is rejected at load time.
enum class Region { Chittagong, Noakhali, Sylhet, Barishal, Mymensingh };

inline constexpr std::array<Region, 5> kAllRegions = {
    Region::Chittagong, Region::Noakhali, Region::Sylhet, Region::Barishal,
    Region::Mymensingh};

std::string_view to_string(Region r);

// Exact-match parse; nullopt for unknown tags.
std::optional<Region> parse_region(std::string_view name);

// Column-group order used by score tables.
const std::array<Region, 5>& report_column_order();

}  // namespace dialectmt
