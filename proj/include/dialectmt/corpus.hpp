#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialectmt/normalize.hpp"
#include "dialectmt/region.hpp"

namespace dialectmt {

// One corpus row: standard-Bangla source, regional-dialect target, plus
// pass-through auxiliary transcriptions that are stored but never processed.
struct ParallelExample {
  Region region = Region::Chittagong;
  std::string standard;  // UTF-8
  std::string dialect;   // UTF-8
  std::optional<std::string> banglish;
  std::optional<std::string> english;
  bool normalized = false;

  friend bool operator==(const ParallelExample&,
                         const ParallelExample&) = default;
};

// Reads line-delimited JSON records ({"region","standard","dialect",
// optional "banglish"/"english"/"normalized"}). Normalization is NOT
// applied; file order is preserved. Malformed records and unknown region
// tags raise DataError naming the line.
std::vector<ParallelExample> load_corpus(
    const std::filesystem::path& path,
    std::optional<Region> region_filter = std::nullopt);

// Writes the same schema, one record per line, atomically.
void save_corpus(const std::filesystem::path& path,
                 std::span<const ParallelExample> examples);

struct NormalizedCorpus {
  std::vector<ParallelExample> examples;
  std::size_t dropped = 0;  // rows whose standard or dialect became empty
};

// normalize_text over standard and dialect of every example; rows that end
// up empty on either side are dropped, not errored.
NormalizedCorpus normalize_corpus(std::vector<ParallelExample> examples,
                                  const NormalizeOptions& opts = {});

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitCorpus {
  std::vector<ParallelExample> train;
  std::vector<ParallelExample> validation;
  std::vector<ParallelExample> test;
  std::uint64_t split_seed = 0;
};

// Deterministic shuffle keyed by seed, then contiguous partition with
// largest-remainder sizing (each part within +/-1 of its exact share).
SplitCorpus split_corpus(std::vector<ParallelExample> examples,
                         SplitRatios ratios, std::uint64_t seed);

}  // namespace dialectmt
