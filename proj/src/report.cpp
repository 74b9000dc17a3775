#include "dialectmt/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"

namespace dialectmt {

namespace {

using nlohmann::json;

constexpr const char* kMissingCell = "—";  // em dash, never read as 0

std::string shortest_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw DataError("float formatting failed");
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("invalid float \"" + std::string(s) + "\"");
  return v;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void EvalReport::add_entry(ReportEntry entry) {
  if (entry.wer < 0 || entry.cer < 0)
    throw DataError("report entry scores must be nonnegative");
  for (const ReportEntry& e : entries_) {
    if (e.model_tag == entry.model_tag && e.region == entry.region &&
        e.epoch_budget == entry.epoch_budget)
      throw DataError("duplicate report entry for (" + entry.model_tag + ", " +
                      std::string(to_string(entry.region)) + ", " +
                      std::to_string(entry.epoch_budget) + ")");
  }
  entries_.push_back(std::move(entry));
}

void EvalReport::save(const std::filesystem::path& path) const {
  std::ostringstream ss;
  for (const ReportEntry& e : entries_) {
    json j;
    j["model_tag"] = e.model_tag;
    j["region"] = std::string(to_string(e.region));
    j["epoch_budget"] = e.epoch_budget;
    j["wer"] = e.wer;
    j["cer"] = e.cer;
    ss << j.dump() << '\n';
  }
  write_file_atomic(path, ss.str());
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("report file not found: " + path.string());
  EvalReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("report line " + std::to_string(line_no) +
                      ": invalid JSON");
    ReportEntry e;
    e.model_tag = j.at("model_tag").get<std::string>();
    auto region = parse_region(j.at("region").get<std::string>());
    if (!region)
      throw DataError("report line " + std::to_string(line_no) +
                      ": unknown region");
    e.region = *region;
    e.epoch_budget = j.at("epoch_budget").get<int>();
    e.wer = j.at("wer").get<double>();
    e.cer = j.at("cer").get<double>();
    report.add_entry(std::move(e));
  }
  return report;
}

std::string format_score(double value) {
  if (!std::isfinite(value) || value < 0)
    throw DataError("cannot format score " + std::to_string(value));
  // nearbyint under the default rounding mode is half-even
  const auto scaled = static_cast<long long>(std::nearbyint(value * 10000.0));
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%lld.%04lld", scaled / 10000,
                scaled % 10000);
  return buf;
}

namespace {

struct TableData {
  std::vector<std::string> tags;     // row order
  std::vector<Region> regions;       // column-group order
  std::vector<int> budgets;          // sub-column order
  // cell text incl. best marker, indexed [row][region_idx*budgets+budget_idx]
  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<bool>> best;
};

TableData collect(const EvalReport& report, Metric metric,
                  bool mark_best) {
  if (report.entries().empty()) throw DataError("cannot render empty report");
  TableData t;

  std::set<std::string> tag_set;
  std::set<Region> region_set;
  std::set<int> budget_set;
  for (const ReportEntry& e : report.entries()) {
    tag_set.insert(e.model_tag);
    region_set.insert(e.region);
    budget_set.insert(e.epoch_budget);
  }
  t.tags.assign(tag_set.begin(), tag_set.end());
  std::sort(t.tags.begin(), t.tags.end(),
            [](const std::string& a, const std::string& b) {
              const std::string la = lower(a), lb = lower(b);
              return la != lb ? la < lb : a < b;
            });
  for (Region r : report_column_order())
    if (region_set.count(r)) t.regions.push_back(r);
  t.budgets.assign(budget_set.begin(), budget_set.end());

  const std::size_t ncols = t.regions.size() * t.budgets.size();
  std::vector<std::vector<std::optional<double>>> values(
      t.tags.size(), std::vector<std::optional<double>>(ncols));
  for (const ReportEntry& e : report.entries()) {
    const auto row = static_cast<std::size_t>(
        std::find(t.tags.begin(), t.tags.end(), e.model_tag) - t.tags.begin());
    const auto ri = static_cast<std::size_t>(
        std::find(t.regions.begin(), t.regions.end(), e.region) -
        t.regions.begin());
    const auto bi = static_cast<std::size_t>(
        std::find(t.budgets.begin(), t.budgets.end(), e.epoch_budget) -
        t.budgets.begin());
    values[row][ri * t.budgets.size() + bi] =
        metric == Metric::WER ? e.wer : e.cer;
  }

  t.cells.assign(t.tags.size(), std::vector<std::string>(ncols, kMissingCell));
  t.best.assign(t.tags.size(), std::vector<bool>(ncols, false));
  for (std::size_t col = 0; col < ncols; ++col) {
    std::optional<std::string> col_min;
    for (std::size_t row = 0; row < t.tags.size(); ++row) {
      if (!values[row][col]) continue;
      std::string s = format_score(*values[row][col]);
      if (!col_min || s < *col_min) col_min = s;
      t.cells[row][col] = std::move(s);
    }
    if (!mark_best || !col_min) continue;
    for (std::size_t row = 0; row < t.tags.size(); ++row)
      if (values[row][col] && t.cells[row][col] == *col_min)
        t.best[row][col] = true;
  }
  return t;
}

std::string render_text(const TableData& t, Metric metric) {
  const std::size_t nb = t.budgets.size();
  // cell width: scores are x.xxxx (6) plus optional '*' marker
  std::size_t cell_w = 6 + 1;
  for (const auto& row : t.cells)
    for (const auto& c : row) cell_w = std::max(cell_w, c.size() + 1);
  std::size_t tag_w = 5;
  for (const auto& tag : t.tags) tag_w = std::max(tag_w, tag.size());

  auto pad_right = [](std::string s, std::size_t w) {
    // markers are inside the width so marked/unmarked columns align
    while (s.size() < w) s += ' ';
    return s;
  };

  std::ostringstream out;
  out << "Metric: " << (metric == Metric::WER ? "WER" : "CER") << '\n';
  out << pad_right("model", tag_w);
  for (Region r : t.regions) {
    out << " | " << pad_right(std::string(to_string(r)), cell_w * nb + (nb - 1));
  }
  out << '\n';
  out << pad_right("", tag_w);
  for (std::size_t ri = 0; ri < t.regions.size(); ++ri) {
    out << " | ";
    for (std::size_t bi = 0; bi < nb; ++bi) {
      if (bi) out << ' ';
      out << pad_right(std::to_string(t.budgets[bi]), cell_w);
    }
  }
  out << '\n';
  for (std::size_t row = 0; row < t.tags.size(); ++row) {
    out << pad_right(t.tags[row], tag_w);
    for (std::size_t ri = 0; ri < t.regions.size(); ++ri) {
      out << " | ";
      for (std::size_t bi = 0; bi < nb; ++bi) {
        if (bi) out << ' ';
        const std::size_t col = ri * nb + bi;
        std::string cell = t.cells[row][col];
        if (t.best[row][col]) cell += '*';
        out << pad_right(cell, cell_w);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const TableData& t, Metric metric) {
  std::ostringstream out;
  out << "model";
  for (Region r : t.regions)
    for (int b : t.budgets) out << ',' << to_string(r) << '_' << b;
  out << '\n';
  (void)metric;
  for (std::size_t row = 0; row < t.tags.size(); ++row) {
    out << t.tags[row];
    for (const std::string& cell : t.cells[row]) out << ',' << cell;
    out << '\n';
  }
  return out.str();
}

std::string render_markdown(const TableData& t, Metric metric) {
  std::ostringstream out;
  out << "| model (" << (metric == Metric::WER ? "WER" : "CER") << ')';
  for (Region r : t.regions)
    for (int b : t.budgets) out << " | " << to_string(r) << ' ' << b;
  out << " |\n|---";
  for (std::size_t c = 0; c < t.regions.size() * t.budgets.size(); ++c)
    out << "|---";
  out << "|\n";
  for (std::size_t row = 0; row < t.tags.size(); ++row) {
    out << "| " << t.tags[row];
    for (std::size_t col = 0; col < t.cells[row].size(); ++col) {
      const std::string& cell = t.cells[row][col];
      out << " | ";
      if (t.best[row][col])
        out << "**" << cell << "**";
      else
        out << cell;
    }
    out << " |\n";
  }
  return out.str();
}

}  // namespace

std::string render_table(const EvalReport& report, Metric metric,
                         TableFormat format) {
  TableData t = collect(report, metric, format != TableFormat::Csv);
  switch (format) {
    case TableFormat::Text: return render_text(t, metric);
    case TableFormat::Csv: return render_csv(t, metric);
    case TableFormat::Markdown: return render_markdown(t, metric);
  }
  throw UsageError("unknown table format");
}

void export_loss_csv(const LossHistory& history,
                     const std::filesystem::path& path) {
  if (history.empty()) throw DataError("cannot export empty loss history");
  std::ostringstream ss;
  ss << "epoch,train_loss,val_loss\n";
  for (const EpochRecord& r : history) {
    ss << r.epoch << ',' << shortest_double(r.train_loss) << ','
       << shortest_double(r.val_loss) << '\n';
  }
  write_file_atomic(path, ss.str());
}

LossHistory load_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("loss CSV not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss")
    throw DataError("loss CSV has an unexpected header");
  LossHistory history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("loss CSV row malformed: " + line);
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(line.substr(0, c1)));
    r.train_loss = parse_double(line.substr(c1 + 1, c2 - c1 - 1));
    r.val_loss = parse_double(line.substr(c2 + 1));
    history.push_back(r);
  }
  return history;
}

}  // namespace dialectmt
