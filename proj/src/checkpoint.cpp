#include "dialectmt/checkpoint.hpp"

#include <json.hpp>

#include <cstring>

#include "dialectmt/errors.hpp"
#include "dialectmt/io_util.hpp"

namespace dialectmt {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'M', 'T', 'C', 'K', 'P', 'T', '1'};

void append_tensors(std::string& buf, const ModelParams& p, json& manifest) {
  visit_tensors(p, [&](const std::string& name, const Eigen::MatrixXd& t) {
    manifest.push_back({{"name", name},
                        {"rows", t.rows()},
                        {"cols", t.cols()}});
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double v = t(r, c);
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        buf.append(bytes, sizeof(double));
      }
    }
  });
}

void read_tensors(const std::string& buf, std::size_t& off, ModelParams& p,
                  const json& manifest) {
  std::size_t idx = 0;
  visit_tensors(p, [&](const std::string& name, Eigen::MatrixXd& t) {
    if (idx >= manifest.size())
      throw DataError("checkpoint: tensor manifest too short");
    const json& m = manifest[idx++];
    if (m.at("name").get<std::string>() != name ||
        m.at("rows").get<Eigen::Index>() != t.rows() ||
        m.at("cols").get<Eigen::Index>() != t.cols())
      throw DataError("checkpoint: tensor layout mismatch at " + name);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        if (off + sizeof(double) > buf.size())
          throw DataError("checkpoint: truncated tensor data");
        double v;
        std::memcpy(&v, buf.data() + off, sizeof(double));
        off += sizeof(double);
        t(r, c) = v;
      }
    }
  });
}

json config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},         {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},       {"d_ff", c.d_ff},
          {"max_seq_len", c.max_seq_len}, {"dropout_rate", c.dropout_rate},
          {"vocab_size", c.vocab_size}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json header;
  header["version"] = 1;
  header["config"] = config_to_json(ck.config);
  header["tag"] = ck.tag;
  header["region"] =
      ck.region ? json(std::string(to_string(*ck.region))) : json(nullptr);
  header["completed_epochs"] = ck.completed_epochs;
  header["seed"] = ck.seed;
  header["adam_step"] = ck.adam.step;
  json vocab = json::array();
  for (char32_t cp : ck.vocab.tokens())
    vocab.push_back(static_cast<std::uint32_t>(cp));
  header["vocab"] = std::move(vocab);

  std::string data;
  json manifest = json::array();
  append_tensors(data, ck.params, manifest);
  append_tensors(data, ck.adam.m, manifest);
  append_tensors(data, ck.adam.v, manifest);
  header["tensors"] = std::move(manifest);

  const std::string header_str = header.dump();
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  const std::uint64_t len = header_str.size();
  char len_bytes[sizeof(len)];
  std::memcpy(len_bytes, &len, sizeof(len));
  out.append(len_bytes, sizeof(len));
  out += header_str;
  out += data;
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, buf.data() + sizeof(kMagic), sizeof(header_len));
  const std::size_t header_off = sizeof(kMagic) + sizeof(std::uint64_t);
  if (header_off + header_len > buf.size())
    throw DataError("checkpoint: truncated header");
  json header = json::parse(buf.substr(header_off, header_len), nullptr, false);
  if (header.is_discarded()) throw DataError("checkpoint: invalid header");

  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.tag = header.at("tag").get<std::string>();
  if (!header.at("region").is_null()) {
    auto region = parse_region(header.at("region").get<std::string>());
    if (!region) throw DataError("checkpoint: unknown region tag");
    ck.region = region;
  }
  ck.completed_epochs = header.at("completed_epochs").get<int>();
  ck.seed = header.at("seed").get<std::uint64_t>();
  std::vector<char32_t> tokens;
  for (const json& v : header.at("vocab"))
    tokens.push_back(static_cast<char32_t>(v.get<std::uint32_t>()));
  ck.vocab = Vocabulary::from_tokens(std::move(tokens));
  if (ck.vocab.size() != ck.config.vocab_size)
    throw DataError("checkpoint: vocabulary size disagrees with config");

  ck.params = init_params(ck.config, 0);  // shapes only; overwritten below
  ck.adam = adam_init(ck.params);
  ck.adam.step = header.at("adam_step").get<std::int64_t>();
  std::size_t off = header_off + header_len;
  const json& manifest = header.at("tensors");
  // manifest holds params, adam.m, adam.v contiguously in visit order
  const std::size_t per = manifest.size() / 3;
  read_tensors(buf, off, ck.params,
               json(manifest.begin(), manifest.begin() + static_cast<long>(per)));
  read_tensors(buf, off, ck.adam.m,
               json(manifest.begin() + static_cast<long>(per),
                    manifest.begin() + static_cast<long>(2 * per)));
  read_tensors(buf, off, ck.adam.v,
               json(manifest.begin() + static_cast<long>(2 * per),
                    manifest.end()));
  if (off != buf.size()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

}  // namespace dialectmt
