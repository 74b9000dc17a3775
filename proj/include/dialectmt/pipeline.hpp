#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dialectmt/report.hpp"
#include "dialectmt/run_config.hpp"
#include "dialectmt/trainer.hpp"

namespace dialectmt {

struct PipelineArtifacts {
  std::string run_id;  // config digest; suffixes every artifact file
  std::filesystem::path vocab_file;
  std::filesystem::path checkpoint_file;
  std::filesystem::path loss_csv;
  std::filesystem::path report_file;
  std::filesystem::path meta_file;
  std::filesystem::path config_file;
  ReportEntry entry;
};

// ingest -> normalize -> split -> build vocab -> train -> decode the test
// split -> evaluate -> write report entry + loss CSV. Deterministic in the
// config seed: identical invocations rewrite identical bytes.
PipelineArtifacts run_pipeline(const RunConfig& config, Region region);

struct SweepArtifacts {
  std::string sweep_id;
  std::filesystem::path sweep_csv;
  std::filesystem::path best_checkpoint;
  SweepResult result;
};

// The 12-entry preset grid (optionally with scaled-down epochs). Each
// configuration's result persists as its own JSON file keyed by the entry
// digest; a resumed sweep skips entries whose result file already exists.
SweepArtifacts run_paper_grid(const RunConfig& config, Region region,
                              std::optional<int> epochs_override, int jobs);

}  // namespace dialectmt
