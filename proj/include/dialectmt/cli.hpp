#pragma once

#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace dialectmt {

// The assembled command-line app plus the option storage it binds to.
// Exposed as a unit so tests can reflect over the registered flags.
struct CliApp {
  CLI::App app{"standard-Bangla to regional-dialect translation toolkit",
               "dialectmt"};

  // global
  std::string config_file;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string out_dir;

  // ingest
  std::string ingest_input, ingest_region, ingest_out;

  // train
  std::string train_corpus, train_region, train_tag;
  double train_lr = 0.0;
  int train_batch = 0, train_epochs = 0;

  // sweep
  std::string sweep_corpus, sweep_region;
  std::vector<std::string> sweep_grid_scale;

  // translate
  std::vector<std::string> translate_models;
  std::string translate_region, translate_input, translate_out;
  int translate_beam = 0;
  double translate_alpha = -1.0;
  int translate_max_len = 0;

  // evaluate
  std::string eval_refs, eval_hyps;
  bool eval_no_normalize = false;
  bool eval_macro = false;

  // report
  std::vector<std::string> report_inputs;
  std::string report_metric = "wer";
  std::string report_format = "text";
  std::string report_out;

  CLI::App* cmd_ingest = nullptr;
  CLI::App* cmd_train = nullptr;
  CLI::App* cmd_sweep = nullptr;
  CLI::App* cmd_translate = nullptr;
  CLI::App* cmd_evaluate = nullptr;
  CLI::App* cmd_report = nullptr;
  CLI::App* cmd_report_render = nullptr;
};

std::unique_ptr<CliApp> make_cli();

// Parses and dispatches; returns the process exit code (0 success, 1 usage,
// 2 data error, 3 numeric divergence).
int run_cli(int argc, const char* const* argv);

}  // namespace dialectmt
