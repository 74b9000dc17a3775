#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dialectmt/region.hpp"
#include "dialectmt/trainer.hpp"

namespace dialectmt {

struct ReportEntry {
  std::string model_tag;
  Region region = Region::Chittagong;
  int epoch_budget = 0;
  double wer = 0.0;
  double cer = 0.0;

  friend bool operator==(const ReportEntry&, const ReportEntry&) = default;
};

struct ReportMetadata {
  std::string dataset_id;
  std::string timestamp;  // ISO 8601 UTC
  std::string config_digest;
};

// Per (model, region, epoch-budget) WER/CER matrix. Entries persist as
// line-delimited JSON; metadata lives in a sidecar so identical reruns
// produce byte-identical entry files.
class EvalReport {
 public:
  // Errors on a duplicate (model_tag, region, epoch_budget) triple or a
  // negative score.
  void add_entry(ReportEntry entry);

  const std::vector<ReportEntry>& entries() const { return entries_; }

  ReportMetadata metadata;

  void save(const std::filesystem::path& path) const;  // entries only
  static EvalReport load(const std::filesystem::path& path);

 private:
  std::vector<ReportEntry> entries_;
};

enum class Metric { WER, CER };
enum class TableFormat { Text, Csv, Markdown };

// Half-even rounding to the 4 decimals score tables use.
std::string format_score(double value);

// One metric as a table: model rows (case-insensitive tag order), region
// column groups in report_column_order limited to regions present, one
// sub-column per epoch budget present (ascending). Missing cells render as
// an em dash; each column's best (lowest) value is marked, except in CSV.
// Pure in the report contents: entry insertion order never changes a byte.
std::string render_table(const EvalReport& report, Metric metric,
                         TableFormat format = TableFormat::Text);

// CSV "epoch,train_loss,val_loss" with shortest round-trip float formatting;
// load_loss_csv(export_loss_csv(h)) == h exactly.
void export_loss_csv(const LossHistory& history,
                     const std::filesystem::path& path);
LossHistory load_loss_csv(const std::filesystem::path& path);

}  // namespace dialectmt
