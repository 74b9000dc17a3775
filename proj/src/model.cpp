#include "dialectmt/model.hpp"

#include <cmath>
#include <limits>

#include "dialectmt/errors.hpp"

namespace dialectmt {

namespace {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

constexpr double kMaskScore = -1e30;  // additive key mask; exp underflows to 0
constexpr double kLnEps = 1e-5;

// ---- primitive layers -----------------------------------------------------

struct LnCache {
  MatrixXd xhat;      // normalized rows
  VectorXd inv_std;   // per row
};

MatrixXd layer_norm(const MatrixXd& x, const LayerNormParams& p,
                    LnCache* cache) {
  const auto rows = x.rows();
  MatrixXd xhat(x.rows(), x.cols());
  VectorXd inv_std(rows);
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / d;
    const double is = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_std(r) = is;
  }
  MatrixXd y = xhat.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const LnCache& c,
                             const LayerNormParams& p, LayerNormParams& grad) {
  grad.gain.row(0).array() += (dy.array() * c.xhat.array()).colwise().sum();
  grad.bias.row(0) += dy.colwise().sum();
  MatrixXd dxhat = dy.array().rowwise() * p.gain.row(0).array();
  MatrixXd dx(dy.rows(), dy.cols());
  const double d = static_cast<double>(dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() / d;
    const double m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).sum() / d;
    dx.row(r) =
        (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2) * c.inv_std(r);
  }
  return dx;
}

double gelu_scalar(double x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const double u = c * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
  constexpr double c = 0.7978845608028654;
  const double u = c * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

struct FfCache {
  MatrixXd in;   // L x d
  MatrixXd z1;   // L x d_ff pre-activation
  MatrixXd a1;   // gelu(z1)
};

MatrixXd feed_forward(const MatrixXd& x, const FeedForwardParams& p,
                      FfCache* cache) {
  MatrixXd z1 = x * p.w1;
  z1.rowwise() += p.b1.row(0);
  MatrixXd a1 = z1.unaryExpr(&gelu_scalar);
  MatrixXd out = a1 * p.w2;
  out.rowwise() += p.b2.row(0);
  if (cache) {
    cache->in = x;
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
  }
  return out;
}

MatrixXd feed_forward_backward(const MatrixXd& dout, const FfCache& c,
                               const FeedForwardParams& p,
                               FeedForwardParams& grad) {
  grad.w2 += c.a1.transpose() * dout;
  grad.b2.row(0) += dout.colwise().sum();
  MatrixXd da1 = dout * p.w2.transpose();
  MatrixXd dz1 = da1.array() * c.z1.unaryExpr(&gelu_grad_scalar).array();
  grad.w1 += c.in.transpose() * dz1;
  grad.b1.row(0) += dz1.colwise().sum();
  return dz1 * p.w1.transpose();
}

void softmax_rows_inplace(MatrixXd& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct AttnCache {
  MatrixXd q_in, kv_in;         // projection inputs
  MatrixXd q, k, v;             // packed heads
  std::vector<MatrixXd> probs;  // per head, Lq x Lk
  MatrixXd context;             // Lq x d before the output projection
};

// mask: Lq x Lk additive scores (0 or kMaskScore)
MatrixXd attention(const MatrixXd& q_in, const MatrixXd& kv_in,
                   const MatrixXd& mask, const AttentionParams& p, int n_heads,
                   AttnCache* cache, std::vector<MatrixXd>* trace_probs) {
  const int d = static_cast<int>(p.wq.rows());
  const int dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  MatrixXd q = q_in * p.wq;
  q.rowwise() += p.bq.row(0);
  MatrixXd k = kv_in * p.wk;
  k.rowwise() += p.bk.row(0);
  MatrixXd v = kv_in * p.wv;
  v.rowwise() += p.bv.row(0);

  MatrixXd context(q.rows(), d);
  std::vector<MatrixXd> probs;
  probs.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    auto qh = q.middleCols(h * dh, dh);
    auto kh = k.middleCols(h * dh, dh);
    auto vh = v.middleCols(h * dh, dh);
    MatrixXd scores = (qh * kh.transpose()) * scale + mask;
    softmax_rows_inplace(scores);
    context.middleCols(h * dh, dh) = scores * vh;
    probs.push_back(std::move(scores));
  }
  MatrixXd out = context * p.wo;
  out.rowwise() += p.bo.row(0);
  if (trace_probs) *trace_probs = probs;
  if (cache) {
    cache->q_in = q_in;
    cache->kv_in = kv_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return out;
}

// Returns gradient w.r.t. q_in; gradient w.r.t. kv_in is accumulated into
// d_kv_in (self-attention passes the same buffer through both).
MatrixXd attention_backward(const MatrixXd& dout, const AttnCache& c,
                            const AttentionParams& p, int n_heads,
                            AttentionParams& grad, MatrixXd& d_kv_in) {
  const int d = static_cast<int>(p.wq.rows());
  const int dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  grad.wo += c.context.transpose() * dout;
  grad.bo.row(0) += dout.colwise().sum();
  MatrixXd dctx = dout * p.wo.transpose();

  MatrixXd dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    auto dctx_h = dctx.middleCols(h * dh, dh);
    const MatrixXd& probs = c.probs[static_cast<std::size_t>(h)];
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);

    MatrixXd dprobs = dctx_h * vh.transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * dctx_h;

    // softmax rows: ds = p .* (dp - sum(dp .* p)); masked entries have p=0
    MatrixXd dscores(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      const double dot = dprobs.row(r).dot(probs.row(r));
      dscores.row(r) =
          probs.row(r).array() * (dprobs.row(r).array() - dot);
    }
    dq.middleCols(h * dh, dh) = (dscores * kh) * scale;
    dk.middleCols(h * dh, dh) = (dscores.transpose() * qh) * scale;
  }

  grad.wq += c.q_in.transpose() * dq;
  grad.bq.row(0) += dq.colwise().sum();
  grad.wk += c.kv_in.transpose() * dk;
  grad.bk.row(0) += dk.colwise().sum();
  grad.wv += c.kv_in.transpose() * dv;
  grad.bv.row(0) += dv.colwise().sum();

  d_kv_in += dk * p.wk.transpose() + dv * p.wv.transpose();
  return dq * p.wq.transpose();
}

struct DropCache {
  MatrixXd mask;
  bool active = false;
};

void apply_dropout(MatrixXd& x, double rate, Rng* rng, DropCache* cache) {
  if (!rng || rate <= 0.0) return;
  MatrixXd mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      mask(r, c) = rng->next_double() >= rate ? keep_scale : 0.0;
  x.array() *= mask.array();
  if (cache) {
    cache->mask = std::move(mask);
    cache->active = true;
  }
}

void dropout_backward(MatrixXd& d, const DropCache& cache) {
  if (cache.active) d.array() *= cache.mask.array();
}

// ---- sequence-level forward/backward ---------------------------------------

struct EncLayerCache {
  LnCache ln1;
  AttnCache attn;
  DropCache drop1;
  MatrixXd after_attn;  // residual sum entering the ff sub-block
  LnCache ln2;
  FfCache ff;
  DropCache drop2;
};

struct DecLayerCache {
  LnCache ln1;
  AttnCache self_attn;
  DropCache drop1;
  MatrixXd after_self;
  LnCache ln2;
  AttnCache cross;
  DropCache drop2;
  MatrixXd after_cross;
  LnCache ln3;
  FfCache ff;
  DropCache drop3;
};

struct EncCache {
  std::vector<std::int32_t> ids;
  std::vector<bool> pad;
  DropCache emb_drop;
  std::vector<EncLayerCache> layers;
  LnCache final_ln;
  MatrixXd memory;
};

struct DecCache {
  std::vector<std::int32_t> ids;
  DropCache emb_drop;
  std::vector<DecLayerCache> layers;
  LnCache final_ln;
  MatrixXd out;     // post final-ln decoder states
  MatrixXd logits;  // T x vocab
};

class SeqRunner {
 public:
  SeqRunner(const ModelConfig& cfg, const MatrixXd& pos,
            const ModelParams& params, Rng* dropout_rng)
      : cfg_(cfg), pos_(pos), p_(params), rng_(dropout_rng) {}

  void check_ids(std::span<const std::int32_t> ids, const char* what) const {
    if (static_cast<int>(ids.size()) > cfg_.max_seq_len)
      throw DataError(std::string(what) + " sequence of length " +
                      std::to_string(ids.size()) + " exceeds max_seq_len " +
                      std::to_string(cfg_.max_seq_len));
    for (std::int32_t id : ids) {
      if (id < 0 || id >= cfg_.vocab_size)
        throw DataError("token id " + std::to_string(id) +
                        " outside vocabulary of size " +
                        std::to_string(cfg_.vocab_size));
    }
  }

  MatrixXd embed(std::span<const std::int32_t> ids, DropCache* drop) const {
    const auto len = static_cast<Eigen::Index>(ids.size());
    const double scale = std::sqrt(static_cast<double>(cfg_.d_model));
    MatrixXd x(len, cfg_.d_model);
    for (Eigen::Index t = 0; t < len; ++t)
      x.row(t) = p_.embedding.row(ids[static_cast<std::size_t>(t)]) * scale +
                 pos_.row(t);
    apply_dropout(x, cfg_.dropout_rate, rng_, drop);
    return x;
  }

  static MatrixXd key_pad_mask(Eigen::Index q_len,
                               const std::vector<bool>& key_pad) {
    MatrixXd mask = MatrixXd::Zero(q_len, static_cast<Eigen::Index>(key_pad.size()));
    for (std::size_t j = 0; j < key_pad.size(); ++j)
      if (key_pad[j]) mask.col(static_cast<Eigen::Index>(j)).setConstant(kMaskScore);
    return mask;
  }

  static MatrixXd causal_mask(Eigen::Index len, const std::vector<bool>& pad) {
    MatrixXd mask = key_pad_mask(len, pad);
    for (Eigen::Index i = 0; i < len; ++i)
      for (Eigen::Index j = i + 1; j < len; ++j) mask(i, j) = kMaskScore;
    return mask;
  }

  static std::vector<bool> pad_flags(std::span<const std::int32_t> ids) {
    std::vector<bool> pad(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      pad[i] = ids[i] == Vocabulary::kPad;
    return pad;
  }

  EncCache run_encoder(std::span<const std::int32_t> src,
                       Transformer::AttentionMaps* maps) const {
    check_ids(src, "source");
    EncCache c;
    c.ids.assign(src.begin(), src.end());
    c.pad = pad_flags(src);
    MatrixXd x = embed(src, &c.emb_drop);
    const MatrixXd self_mask = key_pad_mask(x.rows(), c.pad);
    c.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const EncoderLayerParams& lp = p_.encoder[static_cast<std::size_t>(l)];
      EncLayerCache& lc = c.layers[static_cast<std::size_t>(l)];
      std::vector<MatrixXd>* trace = nullptr;
      if (maps) trace = &maps->enc_self.emplace_back();
      MatrixXd ln1 = layer_norm(x, lp.ln1, &lc.ln1);
      MatrixXd att = attention(ln1, ln1, self_mask, lp.attn, cfg_.n_heads,
                               &lc.attn, trace);
      apply_dropout(att, cfg_.dropout_rate, rng_, &lc.drop1);
      lc.after_attn = x + att;
      MatrixXd ln2 = layer_norm(lc.after_attn, lp.ln2, &lc.ln2);
      MatrixXd ff = feed_forward(ln2, lp.ff, &lc.ff);
      apply_dropout(ff, cfg_.dropout_rate, rng_, &lc.drop2);
      x = lc.after_attn + ff;
    }
    c.memory = layer_norm(x, p_.encoder_norm, &c.final_ln);
    return c;
  }

  DecCache run_decoder(const MatrixXd& memory, const std::vector<bool>& src_pad,
                       std::span<const std::int32_t> tgt_in,
                       Transformer::AttentionMaps* maps) const {
    check_ids(tgt_in, "target");
    DecCache c;
    c.ids.assign(tgt_in.begin(), tgt_in.end());
    const std::vector<bool> tgt_pad = pad_flags(tgt_in);
    MatrixXd x = embed(tgt_in, &c.emb_drop);
    const MatrixXd self_mask = causal_mask(x.rows(), tgt_pad);
    const MatrixXd cross_mask = key_pad_mask(x.rows(), src_pad);
    c.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const DecoderLayerParams& lp = p_.decoder[static_cast<std::size_t>(l)];
      DecLayerCache& lc = c.layers[static_cast<std::size_t>(l)];
      std::vector<MatrixXd>* trace_self = nullptr;
      std::vector<MatrixXd>* trace_cross = nullptr;
      if (maps) {
        trace_self = &maps->dec_self.emplace_back();
        trace_cross = &maps->dec_cross.emplace_back();
      }
      MatrixXd ln1 = layer_norm(x, lp.ln1, &lc.ln1);
      MatrixXd att = attention(ln1, ln1, self_mask, lp.self_attn, cfg_.n_heads,
                               &lc.self_attn, trace_self);
      apply_dropout(att, cfg_.dropout_rate, rng_, &lc.drop1);
      lc.after_self = x + att;
      MatrixXd ln2 = layer_norm(lc.after_self, lp.ln2, &lc.ln2);
      MatrixXd cross = attention(ln2, memory, cross_mask, lp.cross_attn,
                                 cfg_.n_heads, &lc.cross, trace_cross);
      apply_dropout(cross, cfg_.dropout_rate, rng_, &lc.drop2);
      lc.after_cross = lc.after_self + cross;
      MatrixXd ln3 = layer_norm(lc.after_cross, lp.ln3, &lc.ln3);
      MatrixXd ff = feed_forward(ln3, lp.ff, &lc.ff);
      apply_dropout(ff, cfg_.dropout_rate, rng_, &lc.drop3);
      x = lc.after_cross + ff;
    }
    c.out = layer_norm(x, p_.decoder_norm, &c.final_ln);
    c.logits = c.out * p_.output_w;
    c.logits.rowwise() += p_.output_b.row(0);
    return c;
  }

  // Backward through the decoder stack; returns gradient w.r.t. memory.
  MatrixXd backward_decoder(const DecCache& c, const MatrixXd& dlogits,
                            Gradients& g) const {
    g.output_w += c.out.transpose() * dlogits;
    g.output_b.row(0) += dlogits.colwise().sum();
    MatrixXd dx = layer_norm_backward(dlogits * p_.output_w.transpose(),
                                      c.final_ln, p_.decoder_norm,
                                      g.decoder_norm);
    MatrixXd dmemory = MatrixXd::Zero(c.layers.empty()
                                          ? 0
                                          : c.layers[0].cross.kv_in.rows(),
                                      cfg_.d_model);
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      const DecoderLayerParams& lp = p_.decoder[static_cast<std::size_t>(l)];
      DecoderLayerParams& lg = g.decoder[static_cast<std::size_t>(l)];
      const DecLayerCache& lc = c.layers[static_cast<std::size_t>(l)];

      MatrixXd dff = dx;
      dropout_backward(dff, lc.drop3);
      MatrixXd dln3 = feed_forward_backward(dff, lc.ff, lp.ff, lg.ff);
      MatrixXd dafter_cross =
          dx + layer_norm_backward(dln3, lc.ln3, lp.ln3, lg.ln3);

      MatrixXd dcross = dafter_cross;
      dropout_backward(dcross, lc.drop2);
      MatrixXd dln2_from_cross = attention_backward(
          dcross, lc.cross, lp.cross_attn, cfg_.n_heads, lg.cross_attn,
          dmemory);
      MatrixXd dafter_self =
          dafter_cross +
          layer_norm_backward(dln2_from_cross, lc.ln2, lp.ln2, lg.ln2);

      MatrixXd dself = dafter_self;
      dropout_backward(dself, lc.drop1);
      MatrixXd dself_kv = MatrixXd::Zero(dself.rows(), cfg_.d_model);
      MatrixXd dln1 = attention_backward(dself, lc.self_attn, lp.self_attn,
                                         cfg_.n_heads, lg.self_attn, dself_kv);
      dln1 += dself_kv;
      dx = dafter_self + layer_norm_backward(dln1, lc.ln1, lp.ln1, lg.ln1);
    }
    backward_embedding(c.ids, c.emb_drop, dx, g);
    return dmemory;
  }

  void backward_encoder(const EncCache& c, const MatrixXd& dmemory,
                        Gradients& g) const {
    MatrixXd dx =
        layer_norm_backward(dmemory, c.final_ln, p_.encoder_norm,
                            g.encoder_norm);
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      const EncoderLayerParams& lp = p_.encoder[static_cast<std::size_t>(l)];
      EncoderLayerParams& lg = g.encoder[static_cast<std::size_t>(l)];
      const EncLayerCache& lc = c.layers[static_cast<std::size_t>(l)];

      MatrixXd dff = dx;
      dropout_backward(dff, lc.drop2);
      MatrixXd dln2 = feed_forward_backward(dff, lc.ff, lp.ff, lg.ff);
      MatrixXd dafter_attn =
          dx + layer_norm_backward(dln2, lc.ln2, lp.ln2, lg.ln2);

      MatrixXd datt = dafter_attn;
      dropout_backward(datt, lc.drop1);
      MatrixXd dkv = MatrixXd::Zero(datt.rows(), cfg_.d_model);
      MatrixXd dln1 = attention_backward(datt, lc.attn, lp.attn, cfg_.n_heads,
                                         lg.attn, dkv);
      dln1 += dkv;
      dx = dafter_attn + layer_norm_backward(dln1, lc.ln1, lp.ln1, lg.ln1);
    }
    backward_embedding(c.ids, c.emb_drop, dx, g);
  }

  void backward_embedding(const std::vector<std::int32_t>& ids,
                          const DropCache& drop, MatrixXd dx,
                          Gradients& g) const {
    dropout_backward(dx, drop);
    const double scale = std::sqrt(static_cast<double>(cfg_.d_model));
    for (std::size_t t = 0; t < ids.size(); ++t)
      g.embedding.row(ids[t]) += dx.row(static_cast<Eigen::Index>(t)) * scale;
  }

 private:
  const ModelConfig& cfg_;
  const MatrixXd& pos_;
  const ModelParams& p_;
  Rng* rng_;
};

std::vector<std::int32_t> row_ids(const MatrixXi& m, Eigen::Index r) {
  std::vector<std::int32_t> ids(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    ids[static_cast<std::size_t>(c)] = m(r, c);
  return ids;
}

}  // namespace

// ---- config / params -------------------------------------------------------

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0)
    throw UsageError("model dimensions must be positive");
  if (d_model % n_heads != 0)
    throw UsageError("d_model " + std::to_string(d_model) +
                     " not divisible by n_heads " + std::to_string(n_heads));
  if (max_seq_len < 2) throw UsageError("max_seq_len must be at least 2");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw UsageError("dropout_rate must lie in [0,1)");
  if (vocab_size < 5)
    throw UsageError("vocab_size must be at least 5 (4 specials + 1 symbol)");
}

namespace {

template <typename Params, typename F>
void visit_ln(const std::string& prefix, Params& ln, F& f) {
  f(prefix + ".gain", ln.gain);
  f(prefix + ".bias", ln.bias);
}

template <typename Params, typename F>
void visit_attn(const std::string& prefix, Params& a, F& f) {
  f(prefix + ".wq", a.wq);
  f(prefix + ".bq", a.bq);
  f(prefix + ".wk", a.wk);
  f(prefix + ".bk", a.bk);
  f(prefix + ".wv", a.wv);
  f(prefix + ".bv", a.bv);
  f(prefix + ".wo", a.wo);
  f(prefix + ".bo", a.bo);
}

template <typename Params, typename F>
void visit_ff(const std::string& prefix, Params& ff, F& f) {
  f(prefix + ".w1", ff.w1);
  f(prefix + ".b1", ff.b1);
  f(prefix + ".w2", ff.w2);
  f(prefix + ".b2", ff.b2);
}

template <typename Params, typename F>
void visit_impl(Params& p, F&& f) {
  f("embedding", p.embedding);
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const std::string base = "enc." + std::to_string(l);
    visit_ln(base + ".ln1", p.encoder[l].ln1, f);
    visit_attn(base + ".attn", p.encoder[l].attn, f);
    visit_ln(base + ".ln2", p.encoder[l].ln2, f);
    visit_ff(base + ".ff", p.encoder[l].ff, f);
  }
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const std::string base = "dec." + std::to_string(l);
    visit_ln(base + ".ln1", p.decoder[l].ln1, f);
    visit_attn(base + ".self", p.decoder[l].self_attn, f);
    visit_ln(base + ".ln2", p.decoder[l].ln2, f);
    visit_attn(base + ".cross", p.decoder[l].cross_attn, f);
    visit_ln(base + ".ln3", p.decoder[l].ln3, f);
    visit_ff(base + ".ff", p.decoder[l].ff, f);
  }
  visit_ln("enc.norm", p.encoder_norm, f);
  visit_ln("dec.norm", p.decoder_norm, f);
  f("out.w", p.output_w);
  f("out.b", p.output_b);
}

}  // namespace

void visit_tensors(ModelParams& p,
                   const std::function<void(const std::string&,
                                            Eigen::MatrixXd&)>& f) {
  visit_impl(p, f);
}

void visit_tensors(const ModelParams& p,
                   const std::function<void(const std::string&,
                                            const Eigen::MatrixXd&)>& f) {
  visit_impl(p, f);
}

bool all_finite(const ModelParams& p) {
  bool ok = true;
  visit_tensors(p, [&](const std::string&, const Eigen::MatrixXd& t) {
    if (!t.allFinite()) ok = false;
  });
  return ok;
}

Gradients zeros_like(const ModelParams& p) {
  Gradients g = p;
  visit_tensors(g,
                [](const std::string&, Eigen::MatrixXd& t) { t.setZero(); });
  return g;
}

namespace {

ModelParams shape_params(const ModelConfig& cfg) {
  ModelParams p;
  auto ln = [&](int d) {
    return LayerNormParams{Eigen::MatrixXd(1, d), Eigen::MatrixXd(1, d)};
  };
  auto attn = [&]() {
    AttentionParams a;
    a.wq = a.wk = a.wv = a.wo = Eigen::MatrixXd(cfg.d_model, cfg.d_model);
    a.bq = a.bk = a.bv = a.bo = Eigen::MatrixXd(1, cfg.d_model);
    return a;
  };
  auto ff = [&]() {
    FeedForwardParams f;
    f.w1 = Eigen::MatrixXd(cfg.d_model, cfg.d_ff);
    f.b1 = Eigen::MatrixXd(1, cfg.d_ff);
    f.w2 = Eigen::MatrixXd(cfg.d_ff, cfg.d_model);
    f.b2 = Eigen::MatrixXd(1, cfg.d_model);
    return f;
  };
  p.embedding = Eigen::MatrixXd(cfg.vocab_size, cfg.d_model);
  for (int l = 0; l < cfg.n_layers; ++l) {
    p.encoder.push_back(
        {ln(cfg.d_model), attn(), ln(cfg.d_model), ff()});
    p.decoder.push_back({ln(cfg.d_model), attn(), ln(cfg.d_model), attn(),
                         ln(cfg.d_model), ff()});
  }
  p.encoder_norm = ln(cfg.d_model);
  p.decoder_norm = ln(cfg.d_model);
  p.output_w = Eigen::MatrixXd(cfg.d_model, cfg.vocab_size);
  p.output_b = Eigen::MatrixXd(1, cfg.vocab_size);
  return p;
}

std::string leaf_of(const std::string& name) {
  const auto pos = name.rfind('.');
  return pos == std::string::npos ? name : name.substr(pos + 1);
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p = shape_params(config);
  Rng rng(derive_seed(seed, "init"));
  visit_tensors(p, [&](const std::string& name, Eigen::MatrixXd& t) {
    const std::string leaf = leaf_of(name);
    if (leaf == "gain") {
      t.setOnes();
    } else if (!leaf.empty() && leaf[0] == 'b') {  // bq/bk/bv/bo/b1/b2/b/bias
      t.setZero();
    } else {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c)
          t(r, c) = rng.next_uniform(bound);
    }
  });
  return p;
}

// ---- batching ---------------------------------------------------------------

Batch make_batch(std::span<const TokenIds> src_seqs,
                 std::span<const TokenIds> tgt_seqs) {
  if (src_seqs.empty() || src_seqs.size() != tgt_seqs.size())
    throw DataError("make_batch: need equal nonzero source/target counts");
  Eigen::Index src_len = 0, tgt_len = 0;
  for (const TokenIds& s : src_seqs)
    src_len = std::max(src_len, static_cast<Eigen::Index>(s.size()));
  for (const TokenIds& t : tgt_seqs) {
    if (t.size() < 2)
      throw DataError("make_batch: target sequences need BOS and EOS");
    tgt_len = std::max(tgt_len, static_cast<Eigen::Index>(t.size()) - 1);
  }
  const auto b = static_cast<Eigen::Index>(src_seqs.size());
  Batch batch;
  batch.src = Eigen::MatrixXi::Constant(b, src_len, Vocabulary::kPad);
  batch.tgt_in = Eigen::MatrixXi::Constant(b, tgt_len, Vocabulary::kPad);
  batch.tgt_out = Eigen::MatrixXi::Constant(b, tgt_len, Vocabulary::kPad);
  for (Eigen::Index i = 0; i < b; ++i) {
    const TokenIds& s = src_seqs[static_cast<std::size_t>(i)];
    const TokenIds& t = tgt_seqs[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < s.size(); ++j)
      batch.src(i, static_cast<Eigen::Index>(j)) = s[j];
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
      batch.tgt_in(i, static_cast<Eigen::Index>(j)) = t[j];
      batch.tgt_out(i, static_cast<Eigen::Index>(j)) = t[j + 1];
    }
  }
  return batch;
}

// ---- transformer ------------------------------------------------------------

Transformer::Transformer(ModelConfig config) : cfg_(config) {
  cfg_.validate();
  pos_ = Eigen::MatrixXd(cfg_.max_seq_len, cfg_.d_model);
  for (int t = 0; t < cfg_.max_seq_len; ++t) {
    for (int i = 0; i < cfg_.d_model; i += 2) {
      const double angle =
          static_cast<double>(t) /
          std::pow(10000.0, static_cast<double>(i) /
                                static_cast<double>(cfg_.d_model));
      pos_(t, i) = std::sin(angle);
      if (i + 1 < cfg_.d_model) pos_(t, i + 1) = std::cos(angle);
    }
  }
}

EncodedMemory Transformer::encode(const ModelParams& params,
                                  std::span<const std::int32_t> src) const {
  SeqRunner runner(cfg_, pos_, params, nullptr);
  EncCache c = runner.run_encoder(src, nullptr);
  return {std::move(c.memory), std::move(c.pad)};
}

Eigen::MatrixXd Transformer::decode_logits(
    const ModelParams& params, const EncodedMemory& memory,
    std::span<const std::int32_t> tgt_in) const {
  SeqRunner runner(cfg_, pos_, params, nullptr);
  DecCache c = runner.run_decoder(memory.memory, memory.pad, tgt_in, nullptr);
  return std::move(c.logits);
}

Eigen::MatrixXd Transformer::forward_one(
    const ModelParams& params, std::span<const std::int32_t> src,
    std::span<const std::int32_t> tgt_in) const {
  return decode_logits(params, encode(params, src), tgt_in);
}

Eigen::MatrixXd Transformer::forward_one_traced(
    const ModelParams& params, std::span<const std::int32_t> src,
    std::span<const std::int32_t> tgt_in, AttentionMaps* maps) const {
  SeqRunner runner(cfg_, pos_, params, nullptr);
  EncCache ec = runner.run_encoder(src, maps);
  DecCache dc = runner.run_decoder(ec.memory, ec.pad, tgt_in, maps);
  return std::move(dc.logits);
}

namespace {

// Cross-entropy over non-PAD positions of one example; fills dlogits rows
// (softmax - onehot, unscaled) when requested.
double sequence_loss_terms(const MatrixXd& logits,
                           const std::vector<std::int32_t>& gold,
                           std::int64_t& token_count, MatrixXd* dlogits) {
  double sum = 0.0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const std::int32_t y = gold[t];
    if (y == Vocabulary::kPad) continue;
    const auto r = static_cast<Eigen::Index>(t);
    const double m = logits.row(r).maxCoeff();
    const double lse =
        m + std::log((logits.row(r).array() - m).exp().sum());
    sum += lse - logits(r, y);
    ++token_count;
    if (dlogits) {
      dlogits->row(r) = (logits.row(r).array() - lse).exp();
      (*dlogits)(r, y) -= 1.0;
    }
  }
  return sum;
}

}  // namespace

double Transformer::loss(const ModelParams& params, const Batch& batch,
                         Rng* dropout_rng) const {
  SeqRunner runner(cfg_, pos_, params, dropout_rng);
  double sum = 0.0;
  std::int64_t tokens = 0;
  for (Eigen::Index i = 0; i < batch.src.rows(); ++i) {
    EncCache ec = runner.run_encoder(row_ids(batch.src, i), nullptr);
    DecCache dc =
        runner.run_decoder(ec.memory, ec.pad, row_ids(batch.tgt_in, i), nullptr);
    sum += sequence_loss_terms(dc.logits, row_ids(batch.tgt_out, i), tokens,
                               nullptr);
  }
  if (tokens == 0) throw DataError("loss: all-PAD target batch");
  return sum / static_cast<double>(tokens);
}

std::pair<double, Gradients> Transformer::loss_and_grad(
    const ModelParams& params, const Batch& batch, Rng* dropout_rng) const {
  SeqRunner runner(cfg_, pos_, params, dropout_rng);
  const auto b = batch.src.rows();
  std::vector<EncCache> enc(static_cast<std::size_t>(b));
  std::vector<DecCache> dec(static_cast<std::size_t>(b));
  std::vector<std::vector<std::int32_t>> gold(static_cast<std::size_t>(b));
  std::vector<MatrixXd> dlogits(static_cast<std::size_t>(b));

  double sum = 0.0;
  std::int64_t tokens = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    auto& ec = enc[static_cast<std::size_t>(i)];
    auto& dc = dec[static_cast<std::size_t>(i)];
    ec = runner.run_encoder(row_ids(batch.src, i), nullptr);
    dc = runner.run_decoder(ec.memory, ec.pad, row_ids(batch.tgt_in, i),
                            nullptr);
    gold[static_cast<std::size_t>(i)] = row_ids(batch.tgt_out, i);
    auto& dl = dlogits[static_cast<std::size_t>(i)];
    dl = MatrixXd::Zero(dc.logits.rows(), dc.logits.cols());
    sum += sequence_loss_terms(dc.logits, gold[static_cast<std::size_t>(i)],
                               tokens, &dl);
  }
  if (tokens == 0) throw DataError("loss: all-PAD target batch");
  const double inv_n = 1.0 / static_cast<double>(tokens);

  Gradients grads = zeros_like(params);
  for (Eigen::Index i = 0; i < b; ++i) {
    MatrixXd dl = dlogits[static_cast<std::size_t>(i)] * inv_n;
    MatrixXd dmem =
        runner.backward_decoder(dec[static_cast<std::size_t>(i)], dl, grads);
    runner.backward_encoder(enc[static_cast<std::size_t>(i)], dmem, grads);
  }
  return {sum * inv_n, std::move(grads)};
}

// ---- optimizer --------------------------------------------------------------

AdamState adam_init(const ModelParams& params) {
  AdamState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.step = 0;
  return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double lr) {
  if (!all_finite(grads))
    throw DivergenceError("non-finite gradient encountered");
  state.step += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

  // walk the three structures in lockstep via name-indexed buffers
  std::vector<Eigen::MatrixXd*> pt, mt, vt;
  std::vector<const Eigen::MatrixXd*> gt;
  visit_tensors(params,
                [&](const std::string&, Eigen::MatrixXd& t) { pt.push_back(&t); });
  visit_tensors(grads, [&](const std::string&, const Eigen::MatrixXd& t) {
    gt.push_back(&t);
  });
  visit_tensors(state.m,
                [&](const std::string&, Eigen::MatrixXd& t) { mt.push_back(&t); });
  visit_tensors(state.v,
                [&](const std::string&, Eigen::MatrixXd& t) { vt.push_back(&t); });
  if (pt.size() != gt.size() || pt.size() != mt.size() || pt.size() != vt.size())
    throw DataError("adam_step: parameter/gradient structure mismatch");

  for (std::size_t i = 0; i < pt.size(); ++i) {
    Eigen::MatrixXd& p = *pt[i];
    const Eigen::MatrixXd& g = *gt[i];
    Eigen::MatrixXd& m = *mt[i];
    Eigen::MatrixXd& v = *vt[i];
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw DataError("adam_step: gradient shape mismatch");
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v.array().matrix() +
        (1.0 - kAdamBeta2) * g.array().square().matrix();
    p.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
  }
}

}  // namespace dialectmt
