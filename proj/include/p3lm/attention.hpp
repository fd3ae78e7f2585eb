#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "p3lm/autodiff.hpp"

namespace p3lm {

// Forward-pass knobs shared by encoder and decoder. Attention-weight dropout
// is only applied when train is set; it draws from *rng in a fixed order.
struct ForwardOptions {
  bool train = false;
  double attn_dropout = 0.0;
  RngStream* rng = nullptr;
};

// Projection parameters for one attention block (all hidden x hidden, no
// biases). Held as tape handles so sharing a block between streams is just
// passing the same handles.
template <typename T>
struct AttnWeights {
  VarT<T> wq, wk, wv, wo;
};

// Multi-head scaled dot-product attention with a hard inclusion mask.
//
//   q_in:  (Rq x D) query-side inputs
//   kv_in: (Rk x D) key/value-side inputs
//   mask:  (Rq x Rk), 1 = may attend; excluded positions receive an additive
//          -1e9 and come out of the softmax with an exact 0.0 weight.
//
// Scores are scaled by 1/sqrt(D/heads). Ordered self-attention over one
// stream is this with q_in == kv_in and the stream's order mask; the
// prediction streams pass kv_in = [main states; own placeholders].
template <typename T>
VarT<T> attention(VarT<T> q_in, VarT<T> kv_in, const MaskMatrix& mask,
                  const AttnWeights<T>& w, int heads, const ForwardOptions& opts) {
  const std::int64_t D = q_in.val().cols();
  if (kv_in.val().cols() != D)
    throw ShapeError("attention: query/key width mismatch");
  if (heads < 1 || D % heads != 0)
    throw ShapeError("attention: heads must divide hidden size");
  if (mask.rows() != q_in.val().rows() || mask.cols() != kv_in.val().rows())
    throw ShapeError("attention: mask " + mask.shape_str() + " does not cover " +
                     std::to_string(q_in.val().rows()) + " x " +
                     std::to_string(kv_in.val().rows()));
  if (opts.train && opts.attn_dropout > 0.0 && opts.rng == nullptr)
    throw ConfigError("attention: dropout requested without an RNG stream");

  const std::int64_t head_dim = D / heads;
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  VarT<T> q = matmul(q_in, w.wq);
  VarT<T> k = matmul(kv_in, w.wk);
  VarT<T> v = matmul(kv_in, w.wv);

  std::vector<VarT<T>> head_ctx;
  head_ctx.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    VarT<T> qh = slice_cols(q, h * head_dim, head_dim);
    VarT<T> kh = slice_cols(k, h * head_dim, head_dim);
    VarT<T> vh = slice_cols(v, h * head_dim, head_dim);
    VarT<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_d);
    VarT<T> weights = masked_softmax(scores, mask);
    if (opts.train && opts.attn_dropout > 0.0)
      weights = dropout(weights, opts.attn_dropout, *opts.rng);
    head_ctx.push_back(matmul(weights, vh));
  }
  VarT<T> ctx = heads == 1 ? head_ctx[0] : concat_cols(head_ctx);
  return matmul(ctx, w.wo);
}

// Attention from decoder rows onto encoder states. valid[s] = 0 marks a
// padded source slot every query row must ignore.
template <typename T>
VarT<T> cross_attention(VarT<T> q_in, VarT<T> enc_states,
                        const std::vector<std::uint8_t>& valid, const AttnWeights<T>& w,
                        int heads, const ForwardOptions& opts) {
  const std::int64_t S = enc_states.val().rows();
  if (static_cast<std::int64_t>(valid.size()) != S)
    throw ShapeError("cross_attention: validity flags do not cover source length");
  MaskMatrix mask({q_in.val().rows(), S});
  for (std::int64_t r = 0; r < mask.rows(); ++r)
    for (std::int64_t s = 0; s < S; ++s) mask.at(r, s) = valid[static_cast<std::size_t>(s)];
  return attention(q_in, enc_states, mask, w, heads, opts);
}

}  // namespace p3lm
