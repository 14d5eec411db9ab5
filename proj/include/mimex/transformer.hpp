#pragma once

#include "mimex/masking.hpp"
#include "mimex/nn.hpp"
#include "mimex/optim.hpp"
#include "mimex/rng.hpp"
#include "mimex/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimex {

struct TransformerConfig {
  int encoder_dim = 128;
  int encoder_blocks = 4;
  int encoder_heads = 4;
  int decoder_dim = 64;
  int decoder_blocks = 1;
  int decoder_heads = 2;
  double mlp_ratio = 4.0;
  int input_dim = 0;  // D, set per experiment
  int max_len = 64;   // T upper bound for positional tables

  void validate() const {
    if (encoder_dim < 1 || decoder_dim < 1 || encoder_blocks < 1 ||
        decoder_blocks < 1 || encoder_heads < 1 || decoder_heads < 1 ||
        input_dim < 1 || max_len < 1)
      throw std::invalid_argument("transformer config: all counts must be >= 1");
    if (encoder_dim % encoder_heads != 0)
      throw std::invalid_argument("encoder_dim not divisible by encoder_heads");
    if (decoder_dim % decoder_heads != 0)
      throw std::invalid_argument("decoder_dim not divisible by decoder_heads");
    if (mlp_ratio <= 0.0)
      throw std::invalid_argument("mlp_ratio must be positive");
  }

  int mlp_hidden(int dim) const {
    return static_cast<int>(std::lround(mlp_ratio * dim));
  }

  // The scaled-decoder preset: depth, heads and embedding dim all doubled.
  TransformerConfig larger_decoder() const {
    TransformerConfig c = *this;
    c.decoder_dim *= 2;
    c.decoder_blocks *= 2;
    c.decoder_heads *= 2;
    return c;
  }
};

// Fixed sinusoidal table, interleaved sin/cos. Row p, pair i:
//   pe[p, 2i] = sin(p / 10000^(2i/dim)), pe[p, 2i+1] = cos(...)
template <class Scalar>
Mat<Scalar> positional_embedding(int length, int dim, int max_len) {
  if (length > max_len)
    throw std::invalid_argument("positional_embedding: length " +
                                std::to_string(length) + " exceeds max_len " +
                                std::to_string(max_len));
  if (length < 0 || dim < 1)
    throw std::invalid_argument("positional_embedding: bad arguments");
  Mat<Scalar> pe(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int j = 0; j < dim; ++j) {
      const int i = j / 2;
      const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
      const double angle = p * freq;
      pe(p, j) = static_cast<Scalar>((j % 2 == 0) ? std::sin(angle)
                                                  : std::cos(angle));
    }
  }
  return pe;
}

// Pre-norm residual block: x + MHSA(LN(x)), then + MLP(LN(.)).
// Attention is full (non-causal).
template <class Scalar>
struct AttentionBlock {
  int dim = 0;
  int heads = 0;
  LayerNorm<Scalar> ln1, ln2;
  Linear<Scalar> q, k, v, out;
  Linear<Scalar> fc1, fc2;

  AttentionBlock() = default;
  AttentionBlock(int dim_, int heads_, int mlp_hidden, Rng& rng,
                 ParamList<Scalar>& params, const std::string& name)
      : dim(dim_),
        heads(heads_),
        ln1(dim_, params, name + ".ln1"),
        ln2(dim_, params, name + ".ln2"),
        q(dim_, dim_, rng, params, name + ".q"),
        k(dim_, dim_, rng, params, name + ".k"),
        v(dim_, dim_, rng, params, name + ".v"),
        out(dim_, dim_, rng, params, name + ".out"),
        fc1(dim_, mlp_hidden, rng, params, name + ".fc1"),
        fc2(mlp_hidden, dim_, rng, params, name + ".fc2") {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    if (x.cols() != dim)
      throw std::invalid_argument("attention_block: expected width " +
                                  std::to_string(dim) + ", got " +
                                  std::to_string(x.cols()));
    if (x.rows() < 1)
      throw std::invalid_argument("attention_block: empty sequence");
    const int head_dim = dim / heads;
    const Scalar inv_sqrt_dk =
        Scalar(1) / static_cast<Scalar>(std::sqrt(static_cast<double>(head_dim)));

    Tensor<Scalar> h = ln1(x);
    Tensor<Scalar> qs = q(h), ks = k(h), vs = v(h);
    std::vector<Tensor<Scalar>> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int hh = 0; hh < heads; ++hh) {
      Tensor<Scalar> qh = slice_cols(qs, hh * head_dim, head_dim);
      Tensor<Scalar> kh = slice_cols(ks, hh * head_dim, head_dim);
      Tensor<Scalar> vh = slice_cols(vs, hh * head_dim, head_dim);
      Tensor<Scalar> att = softmax(scale(matmul_nt(qh, kh), inv_sqrt_dk));
      head_outs.push_back(matmul(att, vh));
    }
    Tensor<Scalar> merged =
        heads == 1 ? head_outs[0] : concat_cols(head_outs);
    Tensor<Scalar> y = add(x, out(merged));

    Tensor<Scalar> m = fc2(gelu(fc1(ln2(y))));
    return add(y, m);
  }
};

template <class Scalar>
struct TransformerStack {
  std::vector<AttentionBlock<Scalar>> blocks;
  LayerNorm<Scalar> final_ln;

  TransformerStack() = default;
  TransformerStack(int dim, int n_blocks, int heads, int mlp_hidden, Rng& rng,
                   ParamList<Scalar>& params, const std::string& name) {
    for (int b = 0; b < n_blocks; ++b)
      blocks.emplace_back(dim, heads, mlp_hidden, rng, params,
                          name + ".block" + std::to_string(b));
    final_ln = LayerNorm<Scalar>(dim, params, name + ".final_ln");
  }

  Tensor<Scalar> operator()(Tensor<Scalar> x) const {
    for (const auto& b : blocks) x = b(x);
    return final_ln(x);
  }
};

// MAE-style masked sequence autoencoder: encode only the kept tokens,
// reconstruct the full window through a light decoder with a learned mask
// token at every masked slot.
template <class Scalar>
class MaskedSeqAutoencoder {
 public:
  MaskedSeqAutoencoder() = default;

  MaskedSeqAutoencoder(const TransformerConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    in_proj_ = Linear<Scalar>(cfg.input_dim, cfg.encoder_dim, rng, params_,
                              "in_proj");
    encoder_ = TransformerStack<Scalar>(cfg.encoder_dim, cfg.encoder_blocks,
                                        cfg.encoder_heads,
                                        cfg.mlp_hidden(cfg.encoder_dim), rng,
                                        params_, "encoder");
    enc_to_dec_ = Linear<Scalar>(cfg.encoder_dim, cfg.decoder_dim, rng,
                                 params_, "enc_to_dec");
    mask_token_ = params_.add(
        "mask_token",
        Tensor<Scalar>(glorot_uniform<Scalar>(1, cfg.decoder_dim, rng), true));
    decoder_ = TransformerStack<Scalar>(cfg.decoder_dim, cfg.decoder_blocks,
                                        cfg.decoder_heads,
                                        cfg.mlp_hidden(cfg.decoder_dim), rng,
                                        params_, "decoder");
    out_proj_ = Linear<Scalar>(cfg.decoder_dim, cfg.input_dim, rng, params_,
                               "out_proj");
    enc_pos_ = positional_embedding<Scalar>(cfg.max_len, cfg.encoder_dim,
                                            cfg.max_len);
    dec_pos_ = positional_embedding<Scalar>(cfg.max_len, cfg.decoder_dim,
                                            cfg.max_len);
  }

  const TransformerConfig& config() const { return cfg_; }
  ParamList<Scalar>& params() { return params_; }
  const ParamList<Scalar>& params() const { return params_; }
  const Tensor<Scalar>& mask_token() const { return mask_token_; }

  // Kept tokens only (MAE protocol); positional embeddings are looked up at
  // the original window positions.
  Tensor<Scalar> encode(const Tensor<Scalar>& kept_tokens,
                        const std::vector<int>& kept_positions) const {
    if (kept_tokens.rows() < 1)
      throw std::invalid_argument("encode: empty keep set");
    if (static_cast<std::size_t>(kept_tokens.rows()) != kept_positions.size())
      throw std::invalid_argument("encode: tokens/positions length mismatch");
    for (std::size_t i = 0; i < kept_positions.size(); ++i) {
      if (kept_positions[i] < 0 || kept_positions[i] >= cfg_.max_len)
        throw std::invalid_argument("encode: position out of window");
      for (std::size_t j = 0; j < i; ++j)
        if (kept_positions[j] == kept_positions[i])
          throw std::invalid_argument("encode: duplicate position");
    }
    Mat<Scalar> pos(kept_tokens.rows(), cfg_.encoder_dim);
    for (std::size_t i = 0; i < kept_positions.size(); ++i)
      pos.row(static_cast<Eigen::Index>(i)) = enc_pos_.row(kept_positions[i]);
    Tensor<Scalar> z = add_const(in_proj_(kept_tokens), pos);
    return encoder_(z);
  }

  // Decoder input before any attention: latents projected to decoder width,
  // scattered to the unmasked slots, mask token at masked slots, plus
  // positional embeddings.
  Tensor<Scalar> decode_input(const Tensor<Scalar>& latents,
                              const std::vector<bool>& time_mask) const {
    const int T = static_cast<int>(time_mask.size());
    if (T < 1 || T > cfg_.max_len)
      throw std::invalid_argument("decode: bad window length");
    int kept = 0;
    for (bool m : time_mask) kept += m ? 0 : 1;
    if (kept != latents.rows())
      throw std::invalid_argument("decode: kept count " + std::to_string(kept) +
                                  " != latent rows " +
                                  std::to_string(latents.rows()));
    Tensor<Scalar> proj =
        latents.rows() > 0
            ? enc_to_dec_(latents)
            : Tensor<Scalar>(Mat<Scalar>(0, cfg_.decoder_dim));
    Tensor<Scalar> seq = assemble_rows(proj, mask_token_, time_mask);
    return add_const(seq, Mat<Scalar>(dec_pos_.topRows(T)));
  }

  // Scatter latents to the unmasked slots, fill masked slots with the mask
  // token, run the decoder, and project back to the input dimension.
  Tensor<Scalar> decode(const Tensor<Scalar>& latents,
                        const std::vector<bool>& time_mask) const {
    return out_proj_(decoder_(decode_input(latents, time_mask)));
  }

  // Full forward for one window under a sampled mask. Returns the scalar
  // reconstruction loss on the masked positions (or cells).
  Tensor<Scalar> reconstruction_loss(const Tensor<Scalar>& window,
                                     const Mask& mask) const {
    auto [kept, positions] = apply_mask(window, mask);
    Tensor<Scalar> recon;
    if (mask.feature_mask) {
      // feature masking keeps every token; masked cells were zeroed
      Tensor<Scalar> lat = encode(kept, positions);
      std::vector<bool> none(mask.time_mask.size(), false);
      recon = decode(lat, none);
      return masked_mse_cells(recon, window.detach(), *mask.feature_mask);
    }
    if (positions.empty()) {
      recon = decode(Tensor<Scalar>(Mat<Scalar>(0, cfg_.encoder_dim)),
                     mask.time_mask);
    } else {
      recon = decode(encode(kept, positions), mask.time_mask);
    }
    return masked_mse(recon, window.detach(), mask.time_mask);
  }

  long param_count() const { return params_.total_size(); }

  // --- checkpoint: text header, then little-endian float32 blob -----------
  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f << "mimex-checkpoint v1\n";
    for (std::size_t i = 0; i < params_.tensors.size(); ++i)
      f << "tensor " << params_.names[i] << " " << params_.tensors[i].rows()
        << " " << params_.tensors[i].cols() << "\n";
    f << "data\n";
    for (const auto& t : params_.tensors) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
          const float x = static_cast<float>(t.value()(r, c));
          f.write(reinterpret_cast<const char*>(&x), sizeof(float));
        }
      }
    }
  }

  void load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    std::getline(f, line);
    if (line != "mimex-checkpoint v1")
      throw std::runtime_error("bad checkpoint magic: " + line);
    std::size_t idx = 0;
    while (std::getline(f, line)) {
      if (line == "data") break;
      std::istringstream is(line);
      std::string tag, name;
      long r = 0, c = 0;
      is >> tag >> name >> r >> c;
      if (tag != "tensor" || idx >= params_.tensors.size() ||
          name != params_.names[idx] || r != params_.tensors[idx].rows() ||
          c != params_.tensors[idx].cols())
        throw std::runtime_error("checkpoint header mismatch at: " + line);
      ++idx;
    }
    if (idx != params_.tensors.size())
      throw std::runtime_error("checkpoint lists wrong tensor count");
    for (auto& t : params_.tensors) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
          float x = 0;
          f.read(reinterpret_cast<char*>(&x), sizeof(float));
          if (!f) throw std::runtime_error("checkpoint data truncated");
          t.value()(r, c) = static_cast<Scalar>(x);
        }
      }
    }
  }

 private:
  TransformerConfig cfg_;
  ParamList<Scalar> params_;
  Linear<Scalar> in_proj_;
  TransformerStack<Scalar> encoder_;
  Linear<Scalar> enc_to_dec_;
  Tensor<Scalar> mask_token_;
  TransformerStack<Scalar> decoder_;
  Linear<Scalar> out_proj_;
  Mat<Scalar> enc_pos_, dec_pos_;
};

// Analytic parameter count, asserted against the registry in tests.
inline long transformer_param_count(const TransformerConfig& cfg) {
  auto block = [&](int d, int hidden) {
    long n = 0;
    n += 2L * 2 * d;                 // two layer norms
    n += 4L * (static_cast<long>(d) * d + d);  // q, k, v, out
    n += static_cast<long>(d) * hidden + hidden;  // fc1
    n += static_cast<long>(hidden) * d + d;       // fc2
    return n;
  };
  long n = 0;
  n += static_cast<long>(cfg.input_dim) * cfg.encoder_dim + cfg.encoder_dim;
  n += static_cast<long>(cfg.encoder_blocks) *
       block(cfg.encoder_dim, cfg.mlp_hidden(cfg.encoder_dim));
  n += 2L * cfg.encoder_dim;  // encoder final ln
  n += static_cast<long>(cfg.encoder_dim) * cfg.decoder_dim + cfg.decoder_dim;
  n += cfg.decoder_dim;  // mask token
  n += static_cast<long>(cfg.decoder_blocks) *
       block(cfg.decoder_dim, cfg.mlp_hidden(cfg.decoder_dim));
  n += 2L * cfg.decoder_dim;  // decoder final ln
  n += static_cast<long>(cfg.decoder_dim) * cfg.input_dim + cfg.input_dim;
  return n;
}

}  // namespace mimex
