#include "dialectmt/region.hpp"

namespace dialectmt {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Chittagong: return "Chittagong";
    case Region::Noakhali: return "Noakhali";
    case Region::Sylhet: return "Sylhet";
    case Region::Barishal: return "Barishal";
    case Region::Mymensingh: return "Mymensingh";
  }
  return "";
}

std::optional<Region> parse_region(std::string_view name) {
  for (Region r : kAllRegions) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

const std::array<Region, 5>& report_column_order() {
  static const std::array<Region, 5> order = {
      Region::Barishal, Region::Noakhali, Region::Mymensingh, Region::Sylhet,
      Region::Chittagong};
  return order;
}

}  // namespace dialectmt
