#include "dialectmt/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <sstream>
#include <thread>

#include "dialectmt/checkpoint.hpp"
#include "dialectmt/decoder.hpp"
#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"

namespace dialectmt {

namespace {

using nlohmann::json;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string dataset_id(const std::filesystem::path& corpus, std::size_t n) {
  return corpus.stem().string() + ":" + std::to_string(n);
}

std::string shortest_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw DataError("float formatting failed");
  return std::string(buf, end);
}

struct PreparedData {
  SplitCorpus split;
  Vocabulary vocab;
  std::size_t loaded = 0;
};

PreparedData prepare(const RunConfig& config, Region region) {
  config.validate();
  std::vector<ParallelExample> raw = load_corpus(config.corpus, region);
  PreparedData data;
  data.loaded = raw.size();
  NormalizedCorpus normalized = normalize_corpus(std::move(raw), config.norm);
  if (normalized.examples.empty())
    throw DataError("no usable examples for region " +
                    std::string(to_string(region)));
  data.split = split_corpus(std::move(normalized.examples), config.ratios,
                            config.seed);
  data.vocab = Vocabulary::build(data.split.train);
  return data;
}

std::string run_digest(const RunConfig& config, Region region,
                       std::string_view extra = {}) {
  std::string material = config.canonical_serialization();
  material += "run_region = ";
  material += to_string(region);
  material += '\n';
  material += extra;
  return to_hex(fnv1a64(material));
}

json sweep_record_json(const SweepRecord& rec) {
  json j;
  j["index"] = rec.index;
  j["learning_rate"] = rec.hp.learning_rate;
  j["batch_size"] = rec.hp.batch_size;
  j["epochs"] = rec.hp.epochs;
  j["seed"] = rec.hp.seed;
  j["failed"] = rec.failed;
  j["error"] = rec.error;
  j["final_val_loss"] = rec.final_val_loss;
  j["val_cer"] = rec.val_cer;
  j["val_wer"] = rec.val_wer;
  return j;
}

SweepRecord sweep_record_from_json(const json& j, const Hyperparams& hp) {
  SweepRecord rec;
  rec.index = j.at("index").get<int>();
  rec.hp = hp;
  rec.failed = j.at("failed").get<bool>();
  rec.error = j.at("error").get<std::string>();
  rec.final_val_loss = j.at("final_val_loss").get<double>();
  rec.val_cer = j.at("val_cer").get<double>();
  rec.val_wer = j.at("val_wer").get<double>();
  return rec;
}

std::string entry_digest(const Hyperparams& hp) {
  std::ostringstream ss;
  ss << shortest_double(hp.learning_rate) << '|' << hp.batch_size << '|'
     << hp.epochs << '|' << hp.seed;
  return to_hex(fnv1a64(ss.str()));
}

}  // namespace

PipelineArtifacts run_pipeline(const RunConfig& config, Region region) {
  PreparedData data = prepare(config, region);

  Hyperparams hp = config.hyperparams();
  hp.model.vocab_size = data.vocab.size();

  EncodedSplit train_split = encode_split(data.split.train, data.vocab);
  EncodedSplit val_split = encode_split(data.split.validation, data.vocab);
  Transformer model(hp.model);
  TrainState state = init_train_state(hp.model, hp.seed);
  train_epochs(state, model, train_split, val_split, hp);

  // score the test split; fall back when the partition came out empty
  const std::vector<ParallelExample>* eval_set = &data.split.test;
  if (eval_set->empty()) eval_set = &data.split.validation;
  if (eval_set->empty()) eval_set = &data.split.train;
  const int max_len =
      std::min(config.decode.max_len, hp.model.max_seq_len - 1);
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(eval_set->size());
  for (const ParallelExample& ex : *eval_set) {
    std::vector<BeamHypothesis> hyps = beam_search(
        model, state.params, encode_text(data.vocab, ex.standard),
        config.decode.beam_width, max_len, config.decode.length_penalty_alpha);
    pairs.emplace_back(ex.dialect, decode_ids(data.vocab, hyps.front().ids));
  }
  ScorePair scores = corpus_scores(pairs, config.metric_options());

  PipelineArtifacts art;
  art.run_id = run_digest(config, region);
  const auto out = config.out_dir;
  art.vocab_file = out / ("vocab_" + art.run_id + ".txt");
  art.checkpoint_file = out / ("checkpoint_" + art.run_id + ".dmt");
  art.loss_csv = out / ("loss_" + art.run_id + ".csv");
  art.report_file = out / ("report_" + art.run_id + ".jsonl");
  art.meta_file = out / ("meta_" + art.run_id + ".json");
  art.config_file = out / ("config_" + art.run_id + ".cfg");

  data.vocab.save(art.vocab_file);

  Checkpoint ck;
  ck.config = hp.model;
  ck.params = state.params;
  ck.adam = state.adam;
  ck.completed_epochs = state.completed_epochs;
  ck.seed = hp.seed;
  ck.tag = config.tag;
  ck.region = region;
  ck.vocab = data.vocab;
  save_checkpoint(art.checkpoint_file, ck);

  export_loss_csv(state.history, art.loss_csv);

  EvalReport report;
  art.entry = ReportEntry{config.tag, region, hp.epochs, scores.wer,
                          scores.cer};
  report.add_entry(art.entry);
  report.metadata.dataset_id = dataset_id(config.corpus, data.loaded);
  report.metadata.timestamp = iso_timestamp();
  report.metadata.config_digest = config.digest();
  report.save(art.report_file);

  json meta;
  meta["dataset_id"] = report.metadata.dataset_id;
  meta["timestamp"] = report.metadata.timestamp;
  meta["config_digest"] = report.metadata.config_digest;
  write_file_atomic(art.meta_file, meta.dump(2) + "\n");

  write_file_atomic(art.config_file, config.canonical_serialization());
  return art;
}

SweepArtifacts run_paper_grid(const RunConfig& config, Region region,
                              std::optional<int> epochs_override, int jobs) {
  PreparedData data = prepare(config, region);

  ModelConfig base = config.model;
  base.vocab_size = data.vocab.size();
  const std::vector<Hyperparams> grid =
      paper_grid(base, config.seed, epochs_override);

  SweepArtifacts art;
  art.sweep_id = run_digest(
      config, region,
      epochs_override ? "grid_scale_epochs = " + std::to_string(*epochs_override)
                      : "");
  const auto dir = config.out_dir / ("sweep_" + art.sweep_id);
  const auto results_dir = dir / "results";
  std::filesystem::create_directories(results_dir);

  const MetricOptions metric_opts = config.metric_options();
  art.result.records.resize(grid.size());
  std::vector<std::filesystem::path> result_files(grid.size());
  std::vector<char> trained(grid.size(), 0);
  std::vector<ModelParams> params(grid.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      result_files[i] =
          results_dir / ("entry_" + std::to_string(i) + "_" +
                         entry_digest(grid[i]) + ".json");
      if (std::filesystem::exists(result_files[i])) {
        // completed in an earlier invocation: keep the stored row
        json j = json::parse(read_file(result_files[i]), nullptr, false);
        if (!j.is_discarded()) {
          art.result.records[i] = sweep_record_from_json(j, grid[i]);
          continue;
        }
      }
      SweepRecord rec = run_sweep_entry(data.split, region, grid[i],
                                        static_cast<int>(i), data.vocab,
                                        metric_opts, &params[i]);
      trained[i] = !rec.failed;
      write_file_atomic(result_files[i], sweep_record_json(rec).dump(2) + "\n");
      art.result.records[i] = std::move(rec);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    const int n = std::min<int>(jobs, static_cast<int>(grid.size()));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  const auto best =
      std::min_element(art.result.records.begin(), art.result.records.end(),
                       sweep_record_less);
  art.result.best_index =
      (best == art.result.records.end() || best->failed)
          ? -1
          : static_cast<int>(best - art.result.records.begin());

  std::ostringstream csv;
  csv << "index,learning_rate,batch_size,epochs,seed,status,final_val_loss,"
         "val_cer,val_wer,best\n";
  for (const SweepRecord& rec : art.result.records) {
    csv << rec.index << ',' << shortest_double(rec.hp.learning_rate) << ','
        << rec.hp.batch_size << ',' << rec.hp.epochs << ',' << rec.hp.seed
        << ',' << (rec.failed ? "diverged" : "ok") << ','
        << shortest_double(rec.final_val_loss) << ','
        << shortest_double(rec.val_cer) << ',' << shortest_double(rec.val_wer)
        << ',' << (rec.index == art.result.best_index ? 1 : 0) << '\n';
  }
  art.sweep_csv = dir / "sweep.csv";
  write_file_atomic(art.sweep_csv, csv.str());

  if (art.result.best_index >= 0) {
    const auto bi = static_cast<std::size_t>(art.result.best_index);
    if (!trained[bi]) {
      // best entry came from a resumed row; retrain it (deterministic)
      run_sweep_entry(data.split, region, grid[bi], art.result.best_index,
                      data.vocab, metric_opts, &params[bi]);
    }
    Checkpoint ck;
    ck.config = grid[bi].model;
    ck.params = params[bi];
    ck.adam = adam_init(params[bi]);  // sweep keeps final weights only
    ck.completed_epochs = grid[bi].epochs;
    ck.seed = grid[bi].seed;
    ck.tag = config.tag;
    ck.region = region;
    ck.vocab = data.vocab;
    art.best_checkpoint = dir / "best_checkpoint.dmt";
    save_checkpoint(art.best_checkpoint, ck);
  }
  return art;
}

}  // namespace dialectmt
