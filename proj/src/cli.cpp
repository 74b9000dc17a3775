#include "dialectmt/cli.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "dialectmt/checkpoint.hpp"
#include "dialectmt/decoder.hpp"
#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"
#include "dialectmt/pipeline.hpp"
#include "dialectmt/report.hpp"

namespace dialectmt {

namespace {

using nlohmann::json;

Region require_region(const std::string& name) {
  auto r = parse_region(name);
  if (!r) throw DataError("unknown region \"" + name + "\"");
  return *r;
}

std::vector<std::string> read_lines(const std::string& source) {
  std::vector<std::string> lines;
  std::string line;
  if (source == "-") {
    while (std::getline(std::cin, line)) lines.push_back(line);
  } else {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw DataError("cannot open " + source);
    while (std::getline(in, line)) lines.push_back(line);
  }
  return lines;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_file_atomic(out_path, content);
}

RunConfig resolve_config(const CliApp& cli) {
  RunConfig config;
  if (!cli.config_file.empty()) config = RunConfig::from_file(cli.config_file);
  // flags override file values
  if (cli.app.count("--seed") > 0) config.seed = cli.seed;
  if (cli.app.count("--jobs") > 0) config.jobs = cli.jobs;
  if (cli.app.count("--out") > 0) config.out_dir = cli.out_dir;
  return config;
}

int cmd_ingest(const CliApp& cli) {
  RunConfig config = resolve_config(cli);
  std::optional<Region> filter;
  if (!cli.ingest_region.empty()) filter = require_region(cli.ingest_region);
  std::vector<ParallelExample> raw = load_corpus(cli.ingest_input, filter);
  NormalizedCorpus normalized = normalize_corpus(std::move(raw), config.norm);
  save_corpus(cli.ingest_out, normalized.examples);
  json summary;
  summary["written"] = normalized.examples.size();
  summary["dropped"] = normalized.dropped;
  summary["out"] = cli.ingest_out;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_train(const CliApp& cli) {
  RunConfig config = resolve_config(cli);
  if (!cli.train_corpus.empty()) config.corpus = cli.train_corpus;
  if (!cli.train_tag.empty()) config.tag = cli.train_tag;
  if (cli.cmd_train->count("--lr") > 0) config.learning_rate = cli.train_lr;
  if (cli.cmd_train->count("--batch") > 0) config.batch_size = cli.train_batch;
  if (cli.cmd_train->count("--epochs") > 0) config.epochs = cli.train_epochs;
  std::string region_name = cli.train_region;
  if (region_name.empty() && config.region)
    region_name = std::string(to_string(*config.region));
  if (config.corpus.empty()) throw UsageError("train: no corpus given");
  if (region_name.empty()) throw UsageError("train: no region given");

  PipelineArtifacts art = run_pipeline(config, require_region(region_name));
  json summary;
  summary["run_id"] = art.run_id;
  summary["checkpoint"] = art.checkpoint_file.string();
  summary["loss_csv"] = art.loss_csv.string();
  summary["report"] = art.report_file.string();
  summary["wer"] = art.entry.wer;
  summary["cer"] = art.entry.cer;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_sweep(const CliApp& cli) {
  RunConfig config = resolve_config(cli);
  if (!cli.sweep_corpus.empty()) config.corpus = cli.sweep_corpus;
  std::string region_name = cli.sweep_region;
  if (region_name.empty() && config.region)
    region_name = std::string(to_string(*config.region));
  if (config.corpus.empty()) throw UsageError("sweep: no corpus given");
  if (region_name.empty()) throw UsageError("sweep: no region given");

  std::optional<int> epochs_override;
  for (const std::string& kv : cli.sweep_grid_scale) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--grid-scale expects key=value, got \"" + kv + "\"");
    const std::string key = kv.substr(0, eq);
    if (key != "epochs")
      throw UsageError("--grid-scale: unsupported key \"" + key + "\"");
    try {
      epochs_override = std::stoi(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--grid-scale: invalid value in \"" + kv + "\"");
    }
    if (*epochs_override < 1)
      throw UsageError("--grid-scale: epochs must be positive");
  }

  SweepArtifacts art = run_paper_grid(config, require_region(region_name),
                                      epochs_override, config.jobs);
  json summary;
  summary["sweep_id"] = art.sweep_id;
  summary["sweep_csv"] = art.sweep_csv.string();
  summary["configurations"] = art.result.records.size();
  summary["best_index"] = art.result.best_index;
  if (art.result.best_index >= 0) {
    const SweepRecord& best =
        art.result.records[static_cast<std::size_t>(art.result.best_index)];
    summary["best"] = {{"learning_rate", best.hp.learning_rate},
                       {"batch_size", best.hp.batch_size},
                       {"epochs", best.hp.epochs},
                       {"val_cer", best.val_cer},
                       {"val_wer", best.val_wer}};
    summary["best_checkpoint"] = art.best_checkpoint.string();
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_translate(const CliApp& cli) {
  RunConfig config = resolve_config(cli);
  DecodeSettings settings = config.decode;
  if (cli.cmd_translate->count("--beam") > 0)
    settings.beam_width = cli.translate_beam;
  if (cli.cmd_translate->count("--alpha") > 0)
    settings.length_penalty_alpha = cli.translate_alpha;
  if (cli.cmd_translate->count("--max-len") > 0)
    settings.max_len = cli.translate_max_len;

  const Region region = require_region(cli.translate_region);
  std::map<std::string, TaggedModel> models;
  std::optional<Vocabulary> vocab;
  for (const std::string& path : cli.translate_models) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.region && *ck.region != region)
      throw DataError("checkpoint " + path + " was trained for region " +
                      std::string(to_string(*ck.region)));
    if (vocab && !(*vocab == ck.vocab))
      throw DataError("checkpoints use different vocabularies");
    if (!vocab) vocab = ck.vocab;
    if (models.count(ck.tag))
      throw DataError("duplicate model tag \"" + ck.tag + "\"");
    models.emplace(ck.tag,
                   TaggedModel{ck.config, std::move(ck.params)});
  }
  if (models.empty()) throw UsageError("translate: no models given");

  std::ostringstream out;
  for (const std::string& line : read_lines(cli.translate_input)) {
    if (line.empty()) continue;
    TranslationSet ts =
        translate_all(models, line, *vocab, settings, config.norm);
    json j;
    j["source"] = ts.source;
    j["candidates"] = json::object();
    for (const auto& [tag, text] : ts.candidates) j["candidates"][tag] = text;
    out << j.dump() << '\n';
  }
  emit(cli.translate_out, out.str());
  return 0;
}

int cmd_evaluate(const CliApp& cli) {
  RunConfig config = resolve_config(cli);
  MetricOptions opts = config.metric_options();
  if (cli.eval_no_normalize) opts.normalize = false;

  std::vector<std::string> refs = read_lines(cli.eval_refs);
  std::vector<std::string> hyps = read_lines(cli.eval_hyps);
  if (refs.size() != hyps.size())
    throw DataError("reference/hypothesis line counts differ: " +
                    std::to_string(refs.size()) + " vs " +
                    std::to_string(hyps.size()));
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    pairs.emplace_back(refs[i], hyps[i]);

  CorpusBreakdown breakdown;
  ScorePair micro = corpus_scores(pairs, opts, &breakdown);
  ScorePair scores = cli.eval_macro ? corpus_scores_macro(pairs, opts) : micro;

  auto breakdown_json = [](const EditBreakdown& b, std::int64_t ref_len) {
    return json{{"insertions", b.insertions},
                {"deletions", b.deletions},
                {"substitutions", b.substitutions},
                {"distance", b.distance},
                {"reference_length", ref_len}};
  };
  json j;
  j["cer"] = scores.cer;
  j["wer"] = scores.wer;
  j["sentences"] = breakdown.sentences;
  j["breakdown"] = {
      {"char", breakdown_json(breakdown.chars, breakdown.reference_chars)},
      {"word", breakdown_json(breakdown.words, breakdown.reference_words)}};
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_report(const CliApp& cli) {
  EvalReport merged;
  for (const std::string& path : cli.report_inputs) {
    EvalReport part = EvalReport::load(path);
    for (const ReportEntry& e : part.entries()) merged.add_entry(e);
  }
  Metric metric;
  if (cli.report_metric == "wer") metric = Metric::WER;
  else if (cli.report_metric == "cer") metric = Metric::CER;
  else throw UsageError("--metric must be wer or cer");
  TableFormat format;
  if (cli.report_format == "text") format = TableFormat::Text;
  else if (cli.report_format == "csv") format = TableFormat::Csv;
  else if (cli.report_format == "md") format = TableFormat::Markdown;
  else throw UsageError("--format must be text, csv or md");
  emit(cli.report_out, render_table(merged, metric, format));
  return 0;
}

}  // namespace

std::unique_ptr<CliApp> make_cli() {
  auto cli = std::make_unique<CliApp>();
  CLI::App& app = cli->app;
  app.require_subcommand(1);

  app.add_option("--config", cli->config_file,
                 "key=value run configuration file; flags override it");
  app.add_option("--seed", cli->seed, "master seed for all run randomness");
  app.add_option("--jobs", cli->jobs, "parallel workers for sweeps");
  app.add_option("--out", cli->out_dir, "output directory for artifacts");

  CLI::App* ingest =
      app.add_subcommand("ingest", "load, normalize and rewrite a corpus");
  ingest->add_option("--input", cli->ingest_input, "corpus JSONL file")
      ->required();
  ingest->add_option("--region", cli->ingest_region,
                     "keep only this region's records");
  ingest->add_option("--out", cli->ingest_out, "normalized JSONL output path")
      ->required();
  cli->cmd_ingest = ingest;

  CLI::App* train = app.add_subcommand(
      "train", "run the full pipeline for one region and write artifacts");
  train->add_option("--corpus", cli->train_corpus, "corpus JSONL file");
  train->add_option("--region", cli->train_region, "dialect region to train");
  train->add_option("--tag", cli->train_tag, "model tag for reports");
  train->add_option("--lr", cli->train_lr, "learning rate");
  train->add_option("--batch", cli->train_batch, "batch size");
  train->add_option("--epochs", cli->train_epochs, "training epochs");
  cli->cmd_train = train;

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the 12-point hyperparameter grid for one region");
  sweep->add_option("--corpus", cli->sweep_corpus, "corpus JSONL file");
  sweep->add_option("--region", cli->sweep_region, "dialect region to sweep");
  sweep->add_option("--grid-scale", cli->sweep_grid_scale,
                    "scale a grid dimension down, e.g. epochs=2");
  cli->cmd_sweep = sweep;

  CLI::App* translate = app.add_subcommand(
      "translate", "generate dialect candidates from trained checkpoints");
  translate
      ->add_option("--model", cli->translate_models,
                   "checkpoint file (repeat for alternatives)")
      ->required();
  translate->add_option("--region", cli->translate_region, "dialect region")
      ->required();
  translate
      ->add_option("--input", cli->translate_input,
                   "source text file, one sentence per line, or - for stdin")
      ->required();
  translate->add_option("--beam", cli->translate_beam, "beam width");
  translate->add_option("--alpha", cli->translate_alpha,
                        "length penalty exponent");
  translate->add_option("--max-len", cli->translate_max_len,
                        "maximum generated tokens");
  translate->add_option("--out", cli->translate_out,
                        "write JSONL here instead of stdout");
  cli->cmd_translate = translate;

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score aligned reference/hypothesis files with CER and WER");
  evaluate
      ->add_option("--references", cli->eval_refs,
                   "reference file, one sentence per line, or - for stdin")
      ->required();
  evaluate
      ->add_option("--hypotheses", cli->eval_hyps,
                   "hypothesis file, aligned line by line, or - for stdin")
      ->required();
  evaluate->add_flag("--no-normalize", cli->eval_no_normalize,
                     "score raw text instead of normalized text");
  evaluate->add_flag("--macro", cli->eval_macro,
                     "report per-sentence means instead of micro-averages");
  cli->cmd_evaluate = evaluate;

  CLI::App* report =
      app.add_subcommand("report", "work with stored evaluation reports");
  report->require_subcommand(1);
  CLI::App* render =
      report->add_subcommand("render", "render a score table from reports");
  render
      ->add_option("--in", cli->report_inputs,
                   "report JSONL file (repeat to merge)")
      ->required();
  render->add_option("--metric", cli->report_metric, "wer or cer");
  render->add_option("--format", cli->report_format, "text, csv or md");
  render->add_option("--out", cli->report_out,
                     "write the table here instead of stdout");
  cli->cmd_report = report;
  cli->cmd_report_render = render;

  return cli;
}

int run_cli(int argc, const char* const* argv) {
  auto cli = make_cli();
  try {
    cli->app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli->app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cli->cmd_ingest->parsed()) return cmd_ingest(*cli);
    if (cli->cmd_train->parsed()) return cmd_train(*cli);
    if (cli->cmd_sweep->parsed()) return cmd_sweep(*cli);
    if (cli->cmd_translate->parsed()) return cmd_translate(*cli);
    if (cli->cmd_evaluate->parsed()) return cmd_evaluate(*cli);
    if (cli->cmd_report->parsed()) return cmd_report(*cli);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what();
    if (e.epoch() >= 0) std::cerr << " (epoch " << e.epoch() << ")";
    std::cerr << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dialectmt
