#include "dialectmt/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"
#include "dialectmt/unicode.hpp"

namespace dialectmt {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config key \"" + key + "\": invalid integer \"" + v +
                     "\"");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config key \"" + key + "\": invalid unsigned \"" + v +
                     "\"");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config key \"" + key + "\": invalid number \"" + v +
                     "\"");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw UsageError("config key \"" + key + "\": invalid boolean \"" + v +
                   "\"");
}

char32_t parse_hex_cp(const std::string& key, std::string_view v) {
  std::uint32_t cp = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), cp, 16);
  if (ec != std::errc() || p != v.data() + v.size() || cp > 0x10FFFF)
    throw UsageError("config key \"" + key + "\": invalid code point \"" +
                     std::string(v) + "\"");
  return static_cast<char32_t>(cp);
}

// "1F300-1F5FF,FE0F" -> ranges; a bare value is a single-point range
std::vector<std::pair<char32_t, char32_t>> parse_ranges(
    const std::string& key, const std::string& v) {
  std::vector<std::pair<char32_t, char32_t>> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    char32_t lo, hi;
    if (dash == std::string::npos) {
      lo = hi = parse_hex_cp(key, item);
    } else {
      lo = parse_hex_cp(key, std::string_view(item).substr(0, dash));
      hi = parse_hex_cp(key, std::string_view(item).substr(dash + 1));
    }
    if (hi < lo)
      throw UsageError("config key \"" + key + "\": empty range \"" + item +
                       "\"");
    out.emplace_back(lo, hi);
  }
  return out;
}

std::string ranges_to_string(
    const std::vector<std::pair<char32_t, char32_t>>& ranges) {
  std::ostringstream ss;
  ss << std::uppercase << std::hex;
  bool first = true;
  for (const auto& [lo, hi] : ranges) {
    if (!first) ss << ',';
    first = false;
    ss << static_cast<std::uint32_t>(lo);
    if (hi != lo) ss << '-' << static_cast<std::uint32_t>(hi);
  }
  return ss.str();
}

std::string real_to_string(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw UsageError("float formatting failed");
  return std::string(buf, end);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "corpus") corpus = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "region") {
    auto r = parse_region(value);
    if (!r) throw UsageError("config key \"region\": unknown region \"" +
                             value + "\"");
    region = r;
  }
  else if (key == "tag") tag = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "learning_rate") learning_rate = parse_real(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "epochs") epochs = parse_int(key, value);
  else if (key == "d_model") model.d_model = parse_int(key, value);
  else if (key == "n_heads") model.n_heads = parse_int(key, value);
  else if (key == "n_layers") model.n_layers = parse_int(key, value);
  else if (key == "d_ff") model.d_ff = parse_int(key, value);
  else if (key == "max_seq_len") model.max_seq_len = parse_int(key, value);
  else if (key == "dropout") model.dropout_rate = parse_real(key, value);
  else if (key == "split_train") ratios.train = parse_real(key, value);
  else if (key == "split_val") ratios.validation = parse_real(key, value);
  else if (key == "split_test") ratios.test = parse_real(key, value);
  else if (key == "punctuation") norm.punctuation = uni::decode_utf8(value);
  else if (key == "emoji_ranges") norm.emoji_ranges = parse_ranges(key, value);
  else if (key == "metric_normalize") metric_normalize = parse_bool(key, value);
  else if (key == "beam_width") decode.beam_width = parse_int(key, value);
  else if (key == "length_penalty")
    decode.length_penalty_alpha = parse_real(key, value);
  else if (key == "decode_max_len") decode.max_len = parse_int(key, value);
  else if (key == "jobs") jobs = parse_int(key, value);
  else throw UsageError("unknown config key \"" + key + "\"");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("config file not found: " + path.string());
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected key = value");
    config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return config;
}

std::string RunConfig::canonical_serialization() const {
  std::ostringstream ss;
  ss << "corpus = " << corpus.string() << '\n';
  ss << "out_dir = " << out_dir.string() << '\n';
  ss << "region = " << (region ? to_string(*region) : "") << '\n';
  ss << "tag = " << tag << '\n';
  ss << "seed = " << seed << '\n';
  ss << "learning_rate = " << real_to_string(learning_rate) << '\n';
  ss << "batch_size = " << batch_size << '\n';
  ss << "epochs = " << epochs << '\n';
  ss << "d_model = " << model.d_model << '\n';
  ss << "n_heads = " << model.n_heads << '\n';
  ss << "n_layers = " << model.n_layers << '\n';
  ss << "d_ff = " << model.d_ff << '\n';
  ss << "max_seq_len = " << model.max_seq_len << '\n';
  ss << "dropout = " << real_to_string(model.dropout_rate) << '\n';
  ss << "split_train = " << real_to_string(ratios.train) << '\n';
  ss << "split_val = " << real_to_string(ratios.validation) << '\n';
  ss << "split_test = " << real_to_string(ratios.test) << '\n';
  ss << "punctuation = " << uni::encode_utf8(norm.punctuation) << '\n';
  ss << "emoji_ranges = " << ranges_to_string(norm.emoji_ranges) << '\n';
  ss << "metric_normalize = " << (metric_normalize ? "true" : "false") << '\n';
  ss << "beam_width = " << decode.beam_width << '\n';
  ss << "length_penalty = " << real_to_string(decode.length_penalty_alpha)
     << '\n';
  ss << "decode_max_len = " << decode.max_len << '\n';
  ss << "jobs = " << jobs << '\n';
  return ss.str();
}

std::string RunConfig::digest() const {
  return to_hex(fnv1a64(canonical_serialization()));
}

Hyperparams RunConfig::hyperparams() const {
  Hyperparams hp;
  hp.learning_rate = learning_rate;
  hp.batch_size = batch_size;
  hp.epochs = epochs;
  hp.model = model;
  hp.seed = seed;
  return hp;
}

MetricOptions RunConfig::metric_options() const {
  MetricOptions opts;
  opts.normalize = metric_normalize;
  opts.norm = norm;
  return opts;
}

void RunConfig::validate() const {
  if (learning_rate <= 0) throw UsageError("learning_rate must be positive");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (epochs <= 0) throw UsageError("epochs must be positive");
  if (jobs <= 0) throw UsageError("jobs must be positive");
  if (decode.beam_width < 1) throw UsageError("beam_width must be at least 1");
  if (decode.max_len < 1) throw UsageError("decode_max_len must be positive");
  if (decode.length_penalty_alpha < 0)
    throw UsageError("length_penalty must be nonnegative");
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw UsageError("split ratios must sum to 1");
  // model dims validated on use (vocab_size is resolved from data)
  if (model.d_model <= 0 || model.n_heads <= 0 ||
      model.d_model % model.n_heads != 0)
    throw UsageError("d_model must be positive and divisible by n_heads");
  if (model.dropout_rate < 0 || model.dropout_rate >= 1)
    throw UsageError("dropout must lie in [0,1)");
}

}  // namespace dialectmt
