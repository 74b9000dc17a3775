#include "dialectmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "dialectmt/decoder.hpp"
#include "dialectmt/errors.hpp"
#include "dialectmt/rng.hpp"

namespace dialectmt {

void Hyperparams::validate(bool preset) const {
  if (learning_rate <= 0) throw UsageError("learning_rate must be positive");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (epochs <= 0) throw UsageError("epochs must be positive");
  model.validate();
  if (preset) {
    if (learning_rate < 1e-5 || learning_rate > 1e-3)
      throw UsageError("preset grid: learning_rate outside [1e-5, 1e-3]");
    if (batch_size < 8 || batch_size > 16)
      throw UsageError("preset grid: batch_size outside [8, 16]");
    if (epochs < 30 || epochs > 50)
      throw UsageError("preset grid: epochs outside [30, 50]");
  }
}

EncodedSplit encode_split(std::span<const ParallelExample> examples,
                          const Vocabulary& vocab) {
  EncodedSplit out;
  out.src.reserve(examples.size());
  out.tgt.reserve(examples.size());
  for (const ParallelExample& ex : examples) {
    out.src.push_back(encode_text(vocab, ex.standard));
    out.tgt.push_back(encode_text(vocab, ex.dialect));
  }
  return out;
}

TrainState init_train_state(const ModelConfig& config, std::uint64_t seed) {
  TrainState state;
  state.params = init_params(config, seed);
  state.adam = adam_init(state.params);
  return state;
}

namespace {

std::int64_t non_pad_tokens(const Batch& batch) {
  std::int64_t n = 0;
  for (Eigen::Index i = 0; i < batch.tgt_out.rows(); ++i)
    for (Eigen::Index j = 0; j < batch.tgt_out.cols(); ++j)
      if (batch.tgt_out(i, j) != Vocabulary::kPad) ++n;
  return n;
}

Batch slice_batch(const EncodedSplit& split,
                  std::span<const std::size_t> indices) {
  std::vector<TokenIds> src, tgt;
  src.reserve(indices.size());
  tgt.reserve(indices.size());
  for (std::size_t idx : indices) {
    src.push_back(split.src[idx]);
    tgt.push_back(split.tgt[idx]);
  }
  return make_batch(src, tgt);
}

}  // namespace

double evaluate_epoch(const Transformer& model, const ModelParams& params,
                      const EncodedSplit& split, int batch_size) {
  if (split.size() == 0) throw DataError("evaluate_epoch: empty split");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  double sum = 0.0;
  std::int64_t tokens = 0;
  std::vector<std::size_t> indices(split.size());
  std::iota(indices.begin(), indices.end(), 0);
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    Batch batch = slice_batch(
        split, std::span(indices).subspan(start, end - start));
    const std::int64_t n = non_pad_tokens(batch);
    sum += model.loss(params, batch, nullptr) * static_cast<double>(n);
    tokens += n;
  }
  return sum / static_cast<double>(tokens);
}

void train_epochs(TrainState& state, const Transformer& model,
                  const EncodedSplit& train_split,
                  const EncodedSplit& val_split, const Hyperparams& hp) {
  if (train_split.size() == 0) throw DataError("empty training split");
  hp.validate();
  const EncodedSplit& curve_split =
      val_split.size() > 0 ? val_split : train_split;

  std::vector<std::size_t> order(train_split.size());
  for (int epoch = state.completed_epochs + 1; epoch <= hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(hp.seed, "shuffle",
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double sum = 0.0;
    std::int64_t tokens = 0;
    std::uint64_t step = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size), ++step) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(hp.batch_size));
      Batch batch =
          slice_batch(train_split, std::span(order).subspan(start, end - start));
      Rng dropout_rng(derive_seed(hp.seed, "dropout",
                                  static_cast<std::uint64_t>(epoch), step));
      auto [batch_loss, grads] =
          model.loss_and_grad(state.params, batch, &dropout_rng);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite training loss", epoch);
      try {
        adam_step(state.params, grads, state.adam, hp.learning_rate);
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.what(), epoch);
      }
      if (!all_finite(state.params))
        throw DivergenceError("non-finite parameters after update", epoch);
      const std::int64_t n = non_pad_tokens(batch);
      sum += batch_loss * static_cast<double>(n);
      tokens += n;
    }
    const double train_loss = sum / static_cast<double>(tokens);
    const double val_loss =
        evaluate_epoch(model, state.params, curve_split, hp.batch_size);
    state.history.push_back({epoch, train_loss, val_loss});
    state.completed_epochs = epoch;
  }
}

namespace {

std::vector<ParallelExample> for_region(
    std::span<const ParallelExample> examples, Region region) {
  std::vector<ParallelExample> out;
  for (const ParallelExample& ex : examples)
    if (ex.region == region) out.push_back(ex);
  return out;
}

}  // namespace

TrainOutcome train(const SplitCorpus& corpus, Region region,
                   const Hyperparams& hp, const Vocabulary& vocab) {
  EncodedSplit train_split = encode_split(for_region(corpus.train, region), vocab);
  EncodedSplit val_split =
      encode_split(for_region(corpus.validation, region), vocab);
  Transformer model(hp.model);
  TrainState state = init_train_state(hp.model, hp.seed);
  train_epochs(state, model, train_split, val_split, hp);
  return {std::move(state.params), std::move(state.history)};
}

bool sweep_record_less(const SweepRecord& a, const SweepRecord& b) {
  auto key = [](const SweepRecord& r) {
    return std::make_tuple(r.failed, r.val_cer, r.val_wer,
                           r.hp.learning_rate, r.hp.batch_size, r.hp.epochs,
                           r.index);
  };
  return key(a) < key(b);
}

SweepRecord run_sweep_entry(const SplitCorpus& corpus, Region region,
                            const Hyperparams& hp, int index,
                            const Vocabulary& vocab,
                            const MetricOptions& metric_opts,
                            ModelParams* params_out) {
  SweepRecord rec;
  rec.index = index;
  rec.hp = hp;

  const std::vector<ParallelExample> val_examples =
      for_region(corpus.validation, region);
  try {
    EncodedSplit train_split =
        encode_split(for_region(corpus.train, region), vocab);
    EncodedSplit val_split = encode_split(val_examples, vocab);
    Transformer model(hp.model);
    TrainState state = init_train_state(hp.model, hp.seed);
    train_epochs(state, model, train_split, val_split, hp);
    rec.final_val_loss = state.history.back().val_loss;

    // score the validation split with greedy decoding; empty validation
    // falls back to the training examples, same as the loss curve
    const std::vector<ParallelExample>& scored =
        !val_examples.empty() ? val_examples
                              : for_region(corpus.train, region);
    const int max_len = hp.model.max_seq_len - 1;
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(scored.size());
    for (const ParallelExample& ex : scored) {
      TokenIds out = greedy_decode(model, state.params,
                                   encode_text(vocab, ex.standard), max_len);
      pairs.emplace_back(ex.dialect, decode_ids(vocab, out));
    }
    ScorePair scores = corpus_scores(pairs, metric_opts);
    rec.val_cer = scores.cer;
    rec.val_wer = scores.wer;
    if (params_out) *params_out = std::move(state.params);
  } catch (const DivergenceError& e) {
    rec.failed = true;
    rec.error = std::string(e.what()) + " (epoch " +
                std::to_string(e.epoch()) + ")";
  }
  return rec;
}

SweepResult sweep(const SplitCorpus& corpus, Region region,
                  std::span<const Hyperparams> grid, const Vocabulary& vocab,
                  int jobs, const MetricOptions& metric_opts) {
  if (grid.empty()) throw DataError("sweep: empty hyperparameter grid");
  if (jobs < 1) jobs = 1;
  SweepResult result;
  result.records.resize(grid.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      result.records[i] = run_sweep_entry(corpus, region, grid[i],
                                          static_cast<int>(i), vocab,
                                          metric_opts, nullptr);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    const int n = std::min<int>(jobs, static_cast<int>(grid.size()));
    threads.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  const auto best = std::min_element(result.records.begin(),
                                     result.records.end(), sweep_record_less);
  result.best_index =
      (best == result.records.end() || best->failed)
          ? -1
          : static_cast<int>(best - result.records.begin());
  return result;
}

std::vector<Hyperparams> paper_grid(const ModelConfig& base,
                                    std::uint64_t master_seed,
                                    std::optional<int> epochs_override) {
  static constexpr double kLearningRates[] = {1e-3, 1e-4, 1e-5};
  static constexpr int kBatchSizes[] = {8, 16};
  static constexpr int kEpochBudgets[] = {30, 50};
  std::vector<Hyperparams> grid;
  std::uint64_t index = 0;
  for (double lr : kLearningRates) {
    for (int batch : kBatchSizes) {
      for (int epochs : kEpochBudgets) {
        Hyperparams hp;
        hp.learning_rate = lr;
        hp.batch_size = batch;
        hp.epochs = epochs_override.value_or(epochs);
        hp.model = base;
        hp.seed = derive_seed(master_seed, "sweep", index);
        grid.push_back(hp);
        ++index;
      }
    }
  }
  return grid;
}

}  // namespace dialectmt
