#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dialectmt/corpus.hpp"
#include "dialectmt/decoder.hpp"
#include "dialectmt/normalize.hpp"
#include "dialectmt/region.hpp"
#include "dialectmt/trainer.hpp"

namespace dialectmt {

// Resolved run configuration. Loads from a key=value file ('#' comments,
// blank lines ignored); unknown keys are rejected so typos never pass
// silently. CLI flags override file values. The canonical serialization
// replays a run and feeds the config digest.
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path out_dir = "out";
  std::optional<Region> region;
  std::string tag = "scratch";
  std::uint64_t seed = 42;

  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 30;

  ModelConfig model;  // vocab_size resolved from data at run time

  SplitRatios ratios;
  NormalizeOptions norm;
  bool metric_normalize = true;
  DecodeSettings decode;
  int jobs = 1;

  static RunConfig from_file(const std::filesystem::path& path);

  // Applies one key=value setting; throws UsageError naming an unknown key
  // or an unparsable value.
  void set(const std::string& key, const std::string& value);

  std::string canonical_serialization() const;
  std::string digest() const;  // fnv1a-64 of the canonical serialization

  Hyperparams hyperparams() const;
  MetricOptions metric_options() const;

  void validate() const;
};

}  // namespace dialectmt
