#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p3lm/attention.hpp"
#include "p3lm/autodiff.hpp"
#include "p3lm/order.hpp"
#include "p3lm/tokens.hpp"

namespace p3lm {

inline constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
  int layers = 2;
  int hidden = 16;
  int ffn = 64;
  int heads = 2;
  int vocab = 0;          // total size including the special tokens
  int streams = 2;        // number of prediction streams (1 = next-token only)
  int max_positions = 64; // bound on source length and on target length + 1
  bool share_stream_params = true;  // one OSA/cross projection set per layer

  void validate() const;
};

// Model manifest: structured text (key=value) describing the architecture,
// written next to every checkpoint so a saved model is self-describing.
void write_model_manifest(const std::string& path, const ModelConfig& cfg);
ModelConfig read_model_manifest(const std::string& path);

// ---- parameter naming -------------------------------------------------------

namespace names {
inline std::string enc_layer(int k, const char* leaf) {
  return "enc." + std::to_string(k) + "." + leaf;
}
inline std::string dec_layer(int k, const char* leaf) {
  return "dec." + std::to_string(k) + "." + leaf;
}
// Attention set for decoder layer k used by stream n (0 = main). With shared
// stream parameters every n maps to the same set.
inline std::string dec_attn(int k, const char* block, int stream, bool shared) {
  std::string base = "dec." + std::to_string(k) + "." + block;
  if (shared || stream == 0) return base;
  return base + ".s" + std::to_string(stream);
}
}  // namespace names

// The full parameter set plus its architecture description. Templated on the
// scalar type so the identical model can run in 64-bit verification mode.
template <typename T>
struct ModelT {
  ModelConfig cfg;
  ParamStoreT<T> params;

  static ModelT init(const ModelConfig& cfg, std::uint64_t seed);

  template <typename U>
  ModelT<U> cast() const {
    ModelT<U> out;
    out.cfg = cfg;
    out.params = params.template cast<U>();
    return out;
  }

  AttnWeights<T> attn_weights(TapeT<T>& tape, const std::string& base) const {
    return AttnWeights<T>{tape.param(base + ".wq"), tape.param(base + ".wk"),
                          tape.param(base + ".wv"), tape.param(base + ".wo")};
  }
};

using Model = ModelT<float>;

inline void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (hidden < 1) throw ConfigError("model: hidden must be >= 1");
  if (ffn < 1) throw ConfigError("model: ffn must be >= 1");
  if (heads < 1 || hidden % heads != 0)
    throw ConfigError("model: heads must be >= 1 and divide hidden");
  if (vocab <= tokens::kNumSpecials)
    throw ConfigError("model: vocab must exceed the special-token count");
  if (streams < 1) throw ConfigError("model: streams must be >= 1");
  if (max_positions < 2) throw ConfigError("model: max_positions must be >= 2");
}

namespace detail {

template <typename T>
ArrayT<T> init_normal(std::vector<std::int64_t> shape, double sd, RngStream rng) {
  ArrayT<T> a(std::move(shape));
  for (std::int64_t i = 0; i < a.size(); ++i)
    a[i] = static_cast<T>(rng.next_normal() * sd);
  return a;
}

// Fan-in-scaled uniform U(-1/sqrt(fan_in), +1/sqrt(fan_in)); fan_in is the
// input width, i.e. the row count of an (in x out) matrix.
template <typename T>
ArrayT<T> init_fanin(std::vector<std::int64_t> shape, RngStream rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.at(0)));
  ArrayT<T> a(std::move(shape));
  for (std::int64_t i = 0; i < a.size(); ++i)
    a[i] = static_cast<T>((rng.next_double() * 2.0 - 1.0) * bound);
  return a;
}

}  // namespace detail

template <typename T>
ModelT<T> ModelT<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelT<T> m;
  m.cfg = cfg;
  RngStream root = RngStream(seed).derive("init");
  const std::int64_t D = cfg.hidden, F = cfg.ffn, V = cfg.vocab, P = cfg.max_positions;

  auto add_embed = [&](const std::string& name, std::int64_t rows) {
    m.params.add(name, detail::init_normal<T>({rows, D}, 0.02, root.derive(name)));
  };
  auto add_weight = [&](const std::string& name, std::int64_t in, std::int64_t out) {
    m.params.add(name, detail::init_fanin<T>({in, out}, root.derive(name)));
  };
  auto add_zeros = [&](const std::string& name, std::int64_t n) {
    m.params.add(name, ArrayT<T>({n}, T(0)));
  };
  auto add_ones = [&](const std::string& name, std::int64_t n) {
    m.params.add(name, ArrayT<T>({n}, T(1)));
  };
  auto add_attn = [&](const std::string& base) {
    add_weight(base + ".wq", D, D);
    add_weight(base + ".wk", D, D);
    add_weight(base + ".wv", D, D);
    add_weight(base + ".wo", D, D);
  };
  auto add_ffn = [&](const std::string& base) {
    add_weight(base + ".w1", D, F);
    add_zeros(base + ".b1", F);
    add_weight(base + ".w2", F, D);
    add_zeros(base + ".b2", D);
  };
  auto add_ln = [&](const std::string& base) {
    add_ones(base + ".g", D);
    add_zeros(base + ".b", D);
  };

  add_embed("tok_embed", V);
  add_embed("enc_pos", P);
  add_embed("dec_pos", P);
  add_embed("stream_embed", cfg.streams);

  for (int k = 0; k < cfg.layers; ++k) {
    add_attn(names::enc_layer(k, "attn"));
    add_ln(names::enc_layer(k, "ln1"));
    add_ffn(names::enc_layer(k, "ffn"));
    add_ln(names::enc_layer(k, "ln2"));
  }
  add_ln("enc.ln");

  for (int k = 0; k < cfg.layers; ++k) {
    add_attn(names::dec_attn(k, "osa", 0, true));
    add_attn(names::dec_attn(k, "cross", 0, true));
    if (!cfg.share_stream_params) {
      for (int n = 1; n <= cfg.streams; ++n) {
        add_attn(names::dec_attn(k, "osa", n, false));
        add_attn(names::dec_attn(k, "cross", n, false));
      }
    }
    add_ln(names::dec_layer(k, "ln_osa"));
    add_ln(names::dec_layer(k, "ln_cross"));
    add_ffn(names::dec_layer(k, "ffn"));
    add_ln(names::dec_layer(k, "ln_ffn"));
  }
  add_ln("dec.ln");
  return m;
}

// ---- forward passes ---------------------------------------------------------

template <typename T>
struct EncodedSource {
  VarT<T> states;                   // (S x D) final-normalized encoder states
  std::vector<std::uint8_t> valid;  // per-slot validity; 0 marks padding
};

namespace detail {

inline std::vector<int> iota_ids(std::int64_t n, int start = 0) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = start + static_cast<int>(i);
  return ids;
}

template <typename T>
VarT<T> ffn_block(TapeT<T>& tape, const std::string& base, VarT<T> x) {
  VarT<T> h = add_rowvec(matmul(x, tape.param(base + ".w1")), tape.param(base + ".b1"));
  return add_rowvec(matmul(gelu(h), tape.param(base + ".w2")), tape.param(base + ".b2"));
}

template <typename T>
VarT<T> ln_block(TapeT<T>& tape, const std::string& base, VarT<T> x) {
  return layer_norm(x, tape.param(base + ".g"), tape.param(base + ".b"),
                    static_cast<T>(kLayerNormEps));
}

}  // namespace detail

template <typename T>
EncodedSource<T> encode(TapeT<T>& tape, const ModelT<T>& m, const std::vector<int>& source,
                        const ForwardOptions& opts = {}) {
  const std::int64_t S = static_cast<std::int64_t>(source.size());
  if (S < 1) throw ShapeError("encode: empty source");
  if (S > m.cfg.max_positions)
    throw ShapeError("encode: source length " + std::to_string(S) + " exceeds max_positions " +
                     std::to_string(m.cfg.max_positions));
  VarT<T> x = add(embedding_rows(tape.param("tok_embed"), source),
                  embedding_rows(tape.param("enc_pos"), detail::iota_ids(S)));
  MaskMatrix full({S, S});
  std::fill(full.v.begin(), full.v.end(), std::uint8_t(1));
  for (int k = 0; k < m.cfg.layers; ++k) {
    VarT<T> xn = detail::ln_block(tape, names::enc_layer(k, "ln1"), x);
    x = add(x, attention(xn, xn, full, m.attn_weights(tape, names::enc_layer(k, "attn")),
                         m.cfg.heads, opts));
    VarT<T> xf = detail::ln_block(tape, names::enc_layer(k, "ln2"), x);
    x = add(x, detail::ffn_block(tape, names::enc_layer(k, "ffn"), xf));
  }
  EncodedSource<T> out;
  out.states = detail::ln_block(tape, "enc.ln", x);
  out.valid.assign(static_cast<std::size_t>(S), 1);
  return out;
}

// Placeholder inputs for prediction stream n (1-based): each decode step t
// contributes stream_embed[n-1] + dec_pos[z_t], i.e. the stream identity plus
// the absolute position the step will fill.
template <typename T>
VarT<T> placeholder_rows(TapeT<T>& tape, const ModelT<T>& m, const DecodeOrder& order, int n) {
  if (n < 1 || n > m.cfg.streams)
    throw ConsistencyError("placeholder_rows: stream " + std::to_string(n) + " out of range");
  std::vector<int> stream_ids(order.positions.size(), n - 1);
  std::vector<int> pos_ids;
  pos_ids.reserve(order.positions.size());
  for (int p : order.positions) pos_ids.push_back(p);  // slot of position p is p
  return add(embedding_rows(tape.param("stream_embed"), stream_ids),
             embedding_rows(tape.param("dec_pos"), pos_ids));
}

template <typename T>
struct DecoderOutput {
  // stream_logits[n-1]: (T x V); row t-1 scores the token at the position
  // decoded at step t, conditioned on positions decoded at steps <= t - n.
  std::vector<VarT<T>> stream_logits;
  VarT<T> main_states;  // (T+1 x D) final-normalized main stream
};

template <typename T>
DecoderOutput<T> decoder_forward(TapeT<T>& tape, const ModelT<T>& m, const EncodedSource<T>& enc,
                                 const std::vector<int>& target, const DecodeOrder& order,
                                 const RelativeOrderMasks& masks, const ForwardOptions& opts = {}) {
  const int T_len = static_cast<int>(target.size());
  if (T_len < 1) throw ShapeError("decoder_forward: empty target");
  if (T_len + 1 > m.cfg.max_positions)
    throw ShapeError("decoder_forward: target length " + std::to_string(T_len) +
                     " exceeds max_positions - 1");
  if (order.length() != T_len)
    throw ConsistencyError("decoder_forward: order covers " + std::to_string(order.length()) +
                           " positions for a length-" + std::to_string(T_len) + " target");
  if (masks.target_len != T_len || masks.streams != m.cfg.streams)
    throw ConsistencyError("decoder_forward: masks built for T=" +
                           std::to_string(masks.target_len) + ", N=" +
                           std::to_string(masks.streams) + "; model wants T=" +
                           std::to_string(T_len) + ", N=" + std::to_string(m.cfg.streams));
  const int N = m.cfg.streams;
  const bool shared = m.cfg.share_stream_params;

  // Main-stream inputs: slot 0 is the start token, slot p holds target token p.
  std::vector<int> main_ids;
  main_ids.reserve(static_cast<std::size_t>(T_len) + 1);
  main_ids.push_back(tokens::kBos);
  main_ids.insert(main_ids.end(), target.begin(), target.end());
  VarT<T> h = add(embedding_rows(tape.param("tok_embed"), main_ids),
                  embedding_rows(tape.param("dec_pos"), detail::iota_ids(T_len + 1)));

  std::vector<VarT<T>> g;
  g.reserve(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) g.push_back(placeholder_rows(tape, m, order, n));

  for (int k = 0; k < m.cfg.layers; ++k) {
    const std::string ln_osa = names::dec_layer(k, "ln_osa");
    const std::string ln_cross = names::dec_layer(k, "ln_cross");
    const std::string ln_ffn = names::dec_layer(k, "ln_ffn");
    const std::string ffn = names::dec_layer(k, "ffn");

    // Main stream first: ordered self-attention, source attention, FFN.
    {
      AttnWeights<T> osa_w = m.attn_weights(tape, names::dec_attn(k, "osa", 0, shared));
      AttnWeights<T> cross_w = m.attn_weights(tape, names::dec_attn(k, "cross", 0, shared));
      VarT<T> hn = detail::ln_block(tape, ln_osa, h);
      h = add(h, attention(hn, hn, masks.main, osa_w, m.cfg.heads, opts));
      VarT<T> hc = detail::ln_block(tape, ln_cross, h);
      h = add(h, cross_attention(hc, enc.states, enc.valid, cross_w, m.cfg.heads, opts));
      VarT<T> hf = detail::ln_block(tape, ln_ffn, h);
      h = add(h, detail::ffn_block(tape, ffn, hf));
    }

    // Prediction streams read the layer's updated main states. Layer norm is
    // per-row, so normalizing the concatenated key/value block equals
    // concatenating the separately normalized halves.
    VarT<T> h_normed = detail::ln_block(tape, ln_osa, h);
    for (int n = 1; n <= N; ++n) {
      AttnWeights<T> osa_w = m.attn_weights(tape, names::dec_attn(k, "osa", n, shared));
      AttnWeights<T> cross_w = m.attn_weights(tape, names::dec_attn(k, "cross", n, shared));
      VarT<T>& gn = g[static_cast<std::size_t>(n - 1)];
      VarT<T> gn_normed = detail::ln_block(tape, ln_osa, gn);
      VarT<T> kv = concat_rows(std::vector<VarT<T>>{h_normed, gn_normed});
      gn = add(gn, attention(gn_normed, kv, masks.query[static_cast<std::size_t>(n - 1)], osa_w,
                             m.cfg.heads, opts));
      VarT<T> gc = detail::ln_block(tape, ln_cross, gn);
      gn = add(gn, cross_attention(gc, enc.states, enc.valid, cross_w, m.cfg.heads, opts));
      VarT<T> gf = detail::ln_block(tape, ln_ffn, gn);
      gn = add(gn, detail::ffn_block(tape, ffn, gf));
    }
  }

  DecoderOutput<T> out;
  out.main_states = detail::ln_block(tape, "dec.ln", h);
  VarT<T> embed_t = transpose(tape.param("tok_embed"));  // tied output projection
  out.stream_logits.reserve(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    VarT<T> gn_out = detail::ln_block(tape, "dec.ln", g[static_cast<std::size_t>(n - 1)]);
    out.stream_logits.push_back(matmul(gn_out, embed_t));
  }
  return out;
}

}  // namespace p3lm
