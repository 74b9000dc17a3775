#include "dialectmt/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"
#include "dialectmt/rng.hpp"
#include "dialectmt/unicode.hpp"

namespace dialectmt {

namespace {

using nlohmann::json;

ParallelExample parse_record(const json& j, std::size_t line_no) {
  const auto fail = [line_no](const std::string& what) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) throw fail("record is not a JSON object");
  ParallelExample ex;
  if (!j.contains("region") || !j["region"].is_string())
    throw fail("missing or non-string \"region\"");
  const std::string region_tag = j["region"].get<std::string>();
  auto region = parse_region(region_tag);
  if (!region) throw fail("unknown region tag \"" + region_tag + "\"");
  ex.region = *region;
  for (const char* key : {"standard", "dialect"}) {
    if (!j.contains(key) || !j[key].is_string())
      throw fail(std::string("missing or non-string \"") + key + "\"");
  }
  ex.standard = j["standard"].get<std::string>();
  ex.dialect = j["dialect"].get<std::string>();
  if (j.contains("banglish")) {
    if (!j["banglish"].is_string()) throw fail("non-string \"banglish\"");
    ex.banglish = j["banglish"].get<std::string>();
  }
  if (j.contains("english")) {
    if (!j["english"].is_string()) throw fail("non-string \"english\"");
    ex.english = j["english"].get<std::string>();
  }
  if (j.contains("normalized")) {
    if (!j["normalized"].is_boolean()) throw fail("non-boolean \"normalized\"");
    ex.normalized = j["normalized"].get<bool>();
  }
  // validate encoding up front so later stages can assume clean UTF-8
  for (const std::string* field : {&ex.standard, &ex.dialect}) {
    uni::decode_utf8(*field);
  }
  return ex;
}

}  // namespace

std::vector<ParallelExample> load_corpus(const std::filesystem::path& path,
                                         std::optional<Region> region_filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("corpus file not found: " + path.string());
  std::vector<ParallelExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON");
    ParallelExample ex;
    try {
      ex = parse_record(j, line_no);
    } catch (const DataError&) {
      throw;
    }
    if (region_filter && ex.region != *region_filter) continue;
    out.push_back(std::move(ex));
  }
  return out;
}

void save_corpus(const std::filesystem::path& path,
                 std::span<const ParallelExample> examples) {
  std::ostringstream ss;
  for (const ParallelExample& ex : examples) {
    json j;
    j["region"] = std::string(to_string(ex.region));
    j["standard"] = ex.standard;
    j["dialect"] = ex.dialect;
    if (ex.banglish) j["banglish"] = *ex.banglish;
    if (ex.english) j["english"] = *ex.english;
    if (ex.normalized) j["normalized"] = true;
    ss << j.dump() << '\n';
  }
  write_file_atomic(path, ss.str());
}

NormalizedCorpus normalize_corpus(std::vector<ParallelExample> examples,
                                  const NormalizeOptions& opts) {
  NormalizedCorpus out;
  for (ParallelExample& ex : examples) {
    ex.standard = normalize_text(ex.standard, opts);
    ex.dialect = normalize_text(ex.dialect, opts);
    ex.normalized = true;
    if (ex.standard.empty() || ex.dialect.empty()) {
      ++out.dropped;
      continue;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

SplitCorpus split_corpus(std::vector<ParallelExample> examples,
                         SplitRatios ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw DataError("split ratios must sum to 1, got " + std::to_string(sum));
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0)
    throw DataError("split ratios must be nonnegative");
  const std::size_t n = examples.size();
  if (n < 3) throw DataError("corpus too small to split: " +
                             std::to_string(n) + " examples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  // largest-remainder sizing: every part within one example of exact share
  const double exact[3] = {ratios.train * static_cast<double>(n),
                           ratios.validation * static_cast<double>(n),
                           ratios.test * static_cast<double>(n)};
  std::size_t sizes[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    sizes[k] = static_cast<std::size_t>(std::floor(exact[k]));
    frac[k] = exact[k] - std::floor(exact[k]);
    assigned += sizes[k];
  }
  int by_frac[3] = {0, 1, 2};
  std::stable_sort(std::begin(by_frac), std::end(by_frac),
                   [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) sizes[by_frac[k % 3]] += 1;

  SplitCorpus out;
  out.split_seed = seed;
  std::size_t pos = 0;
  auto take = [&](std::size_t count) {
    std::vector<ParallelExample> part;
    part.reserve(count);
    for (std::size_t k = 0; k < count; ++k)
      part.push_back(examples[order[pos++]]);
    return part;
  };
  out.train = take(sizes[0]);
  out.validation = take(sizes[1]);
  out.test = take(sizes[2]);
  return out;
}

}  // namespace dialectmt
