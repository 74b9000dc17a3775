#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialectmt/corpus.hpp"
#include "dialectmt/metrics.hpp"
#include "dialectmt/model.hpp"
#include "dialectmt/tokenizer.hpp"

namespace dialectmt {

struct Hyperparams {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 30;
  ModelConfig model;
  std::uint64_t seed = 42;

  // preset=true additionally enforces the grid ranges lr in [1e-5,1e-3],
  // batch in [8,16], epochs in [30,50]; arbitrary values are fine otherwise.
  void validate(bool preset = false) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, contiguous
  double train_loss = 0.0;
  double val_loss = 0.0;
};

using LossHistory = std::vector<EpochRecord>;

// (standard -> dialect) pairs encoded once up front.
struct EncodedSplit {
  std::vector<TokenIds> src;
  std::vector<TokenIds> tgt;
  std::size_t size() const { return src.size(); }
};

EncodedSplit encode_split(std::span<const ParallelExample> examples,
                          const Vocabulary& vocab);

// Everything a checkpoint needs to continue a run bit-identically: epoch
// shuffles and dropout streams are derived from (seed, epoch, step), so seed
// plus completed_epochs is the full RNG state.
struct TrainState {
  ModelParams params;
  AdamState adam;
  int completed_epochs = 0;
  LossHistory history;
};

TrainState init_train_state(const ModelConfig& config, std::uint64_t seed);

// Runs epochs completed_epochs+1 .. hp.epochs of mini-batch Adam with
// teacher forcing, one EpochRecord per epoch (train loss is the
// token-weighted mean over the epoch's batches, val loss is evaluated with
// dropout off). Throws DivergenceError with the epoch index on non-finite
// loss or parameters; DataError on an empty train split.
void train_epochs(TrainState& state, const Transformer& model,
                  const EncodedSplit& train_split,
                  const EncodedSplit& val_split, const Hyperparams& hp);

struct TrainOutcome {
  ModelParams params;
  LossHistory history;
};

// Convenience wrapper: fresh init + all epochs for one dialect direction.
// The vocabulary must already be built over the training split.
TrainOutcome train(const SplitCorpus& corpus, Region region,
                   const Hyperparams& hp, const Vocabulary& vocab);

// Mean non-PAD cross-entropy over a split, dropout off. Errors on an empty
// split.
double evaluate_epoch(const Transformer& model, const ModelParams& params,
                      const EncodedSplit& split, int batch_size);

struct SweepRecord {
  int index = 0;  // position in the grid
  Hyperparams hp;
  bool failed = false;
  std::string error;  // divergence message when failed
  double final_val_loss = 0.0;
  double val_cer = 0.0;
  double val_wer = 0.0;
};

struct SweepResult {
  std::vector<SweepRecord> records;  // grid order
  int best_index = -1;               // index into records, -1 if all failed
};

// Ranking key for best_by_cer: (cer, wer, lr, batch, epochs, index)
// ascending — a total order. Failed records sort last.
bool sweep_record_less(const SweepRecord& a, const SweepRecord& b);

// Trains one grid entry and scores the validation split (greedy decoding,
// micro-averaged CER/WER). Divergence comes back as a failed record. The
// trained parameters go to *params_out when given (skipped on failure).
SweepRecord run_sweep_entry(const SplitCorpus& corpus, Region region,
                            const Hyperparams& hp, int index,
                            const Vocabulary& vocab,
                            const MetricOptions& metric_opts,
                            ModelParams* params_out = nullptr);

// Trains every configuration independently (fresh init per entry),
// evaluates validation CER/WER with greedy decoding, ranks per
// sweep_record_less. Divergence is recorded as a failed row, not propagated.
// jobs > 1 runs configurations in parallel.
SweepResult sweep(const SplitCorpus& corpus, Region region,
                  std::span<const Hyperparams> grid,
                  const Vocabulary& vocab, int jobs = 1,
                  const MetricOptions& metric_opts = {});

// lr {1e-3,1e-4,1e-5} x batch {8,16} x epochs {30,50}, 12 entries in that
// nesting order. Per-entry seeds derive from the master seed; an epochs
// override scales the grid down for desk-size runs.
std::vector<Hyperparams> paper_grid(const ModelConfig& base,
                                    std::uint64_t master_seed,
                                    std::optional<int> epochs_override = {});

}  // namespace dialectmt
