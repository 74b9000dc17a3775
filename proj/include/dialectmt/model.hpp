#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialectmt/rng.hpp"
#include "dialectmt/tokenizer.hpp"

namespace dialectmt {

struct ModelConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_layers = 2;  // shared by encoder and decoder
  int d_ff = 256;
  int max_seq_len = 128;
  double dropout_rate = 0.1;
  int vocab_size = 0;  // set from the vocabulary before init_params

  int d_head() const { return d_model / n_heads; }
  void validate() const;  // throws UsageError

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Biases and layer-norm vectors are stored as 1 x d matrices so one visitor
// covers every tensor.
struct LayerNormParams {
  Eigen::MatrixXd gain;  // 1 x d
  Eigen::MatrixXd bias;  // 1 x d
};

struct AttentionParams {
  Eigen::MatrixXd wq, wk, wv, wo;  // d x d
  Eigen::MatrixXd bq, bk, bv, bo;  // 1 x d
};

struct FeedForwardParams {
  Eigen::MatrixXd w1;  // d x d_ff
  Eigen::MatrixXd b1;  // 1 x d_ff
  Eigen::MatrixXd w2;  // d_ff x d
  Eigen::MatrixXd b2;  // 1 x d
};

struct EncoderLayerParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  FeedForwardParams ff;
};

struct DecoderLayerParams {
  LayerNormParams ln1;
  AttentionParams self_attn;
  LayerNormParams ln2;
  AttentionParams cross_attn;
  LayerNormParams ln3;
  FeedForwardParams ff;
};

struct ModelParams {
  Eigen::MatrixXd embedding;  // vocab x d, shared encoder/decoder input
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  LayerNormParams encoder_norm;  // final norms of the pre-LN stacks
  LayerNormParams decoder_norm;
  Eigen::MatrixXd output_w;  // d x vocab
  Eigen::MatrixXd output_b;  // 1 x vocab
};

// Same tensors, same shapes.
using Gradients = ModelParams;

// Visits every tensor in a fixed declared order with a dotted name; the
// order defines the checkpoint layout and the init draw sequence.
void visit_tensors(ModelParams& p,
                   const std::function<void(const std::string&,
                                            Eigen::MatrixXd&)>& f);
void visit_tensors(const ModelParams& p,
                   const std::function<void(const std::string&,
                                            const Eigen::MatrixXd&)>& f);

bool all_finite(const ModelParams& p);
Gradients zeros_like(const ModelParams& p);

// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out)) from the tensor
// shape), zero biases, unit layer-norm gains. Deterministic in seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Rectangular teacher-forcing batch, PAD-filled. tgt_in drops the final
// token of each encoded target, tgt_out drops the leading BOS.
struct Batch {
  Eigen::MatrixXi src;      // batch x src_len
  Eigen::MatrixXi tgt_in;   // batch x tgt_len
  Eigen::MatrixXi tgt_out;  // batch x tgt_len
};

Batch make_batch(std::span<const TokenIds> src_seqs,
                 std::span<const TokenIds> tgt_seqs);

// Encoder output for one source sequence plus its key-padding mask.
struct EncodedMemory {
  Eigen::MatrixXd memory;  // src_len x d
  std::vector<bool> pad;   // true = masked key
};

class Transformer {
 public:
  explicit Transformer(ModelConfig config);

  const ModelConfig& config() const { return cfg_; }

  // Mean token-level cross-entropy over non-PAD target positions.
  // dropout_rng non-null enables training mode (dropout active).
  double loss(const ModelParams& params, const Batch& batch,
              Rng* dropout_rng = nullptr) const;

  // Loss plus exact analytic gradients for every parameter tensor.
  std::pair<double, Gradients> loss_and_grad(const ModelParams& params,
                                             const Batch& batch,
                                             Rng* dropout_rng = nullptr) const;

  // Inference path (dropout always off).
  EncodedMemory encode(const ModelParams& params,
                       std::span<const std::int32_t> src) const;
  Eigen::MatrixXd decode_logits(const ModelParams& params,
                                const EncodedMemory& memory,
                                std::span<const std::int32_t> tgt_in) const;
  Eigen::MatrixXd forward_one(const ModelParams& params,
                              std::span<const std::int32_t> src,
                              std::span<const std::int32_t> tgt_in) const;

  // Attention probabilities for one pair, for inspection: [layer][head],
  // rows are softmax distributions with masked keys at exactly zero.
  struct AttentionMaps {
    std::vector<std::vector<Eigen::MatrixXd>> enc_self;
    std::vector<std::vector<Eigen::MatrixXd>> dec_self;
    std::vector<std::vector<Eigen::MatrixXd>> dec_cross;
  };
  Eigen::MatrixXd forward_one_traced(const ModelParams& params,
                                     std::span<const std::int32_t> src,
                                     std::span<const std::int32_t> tgt_in,
                                     AttentionMaps* maps) const;

  const Eigen::MatrixXd& positional_encoding() const { return pos_; }

 private:
  ModelConfig cfg_;
  Eigen::MatrixXd pos_;  // max_seq_len x d sinusoidal table
};

// Adam moment estimates; step counts the bias-correction power.
struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;
};

AdamState adam_init(const ModelParams& params);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// In-place Adam update with bias correction. Throws DivergenceError on
// non-finite gradients.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double lr);

}  // namespace dialectmt
