#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dialectmt/model.hpp"
#include "dialectmt/region.hpp"
#include "dialectmt/tokenizer.hpp"
#include "dialectmt/trainer.hpp"

namespace dialectmt {

// Self-contained training snapshot. Layout documented in
// docs/checkpoint-format.md; round-trip is bit-exact.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  AdamState adam;
  int completed_epochs = 0;
  std::uint64_t seed = 0;  // master seed; with completed_epochs this is the
                           // complete RNG state (streams are derived)
  std::string tag;         // model tag used in reports and translations
  std::optional<Region> region;
  Vocabulary vocab;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dialectmt
