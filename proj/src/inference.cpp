#include "p3lm/inference.hpp"

#include <cmath>

#include "p3lm/attention.hpp"
#include "p3lm/tokens.hpp"

namespace p3lm {

namespace {

// Forward-only tapes never call backward(), so binding the store mutably is
// safe; parameter values are only read.
ParamStore* mutable_params(const Model& model) {
  return const_cast<ParamStore*>(&model.params);
}

MaskMatrix ones_row(std::int64_t cols) {
  MaskMatrix m({1, cols});
  std::fill(m.v.begin(), m.v.end(), std::uint8_t{1});
  return m;
}

// Runs one decoder block (self-attention over `kv_rows` with a full one-row
// mask, source attention, FFN) for a single row, mirroring the layer
// structure of the batched decoder. `self_normed_kv` already carries the
// pre-attention layer norm.
VarT<float> decoder_block_row(TapeT<float>& tape, const Model& model, int layer,
                              VarT<float> row, VarT<float> self_normed_q,
                              VarT<float> self_normed_kv, VarT<float> enc_states,
                              const std::vector<std::uint8_t>& enc_valid) {
  const bool shared = model.cfg.share_stream_params;
  const std::string ln_cross = names::dec_layer(layer, "ln_cross");
  const std::string ln_ffn = names::dec_layer(layer, "ln_ffn");
  AttnWeights<float> osa_w = model.attn_weights(tape, names::dec_attn(layer, "osa", 0, shared));
  AttnWeights<float> cross_w = model.attn_weights(tape, names::dec_attn(layer, "cross", 0, shared));
  row = add(row, attention(self_normed_q, self_normed_kv, ones_row(self_normed_kv.val().rows()),
                           osa_w, model.cfg.heads, ForwardOptions{}));
  VarT<float> rc = detail::ln_block(tape, ln_cross, row);
  row = add(row, cross_attention(rc, enc_states, enc_valid, cross_w, model.cfg.heads, ForwardOptions{}));
  VarT<float> rf = detail::ln_block(tape, ln_ffn, row);
  row = add(row, detail::ffn_block(tape, names::dec_layer(layer, "ffn"), rf));
  return row;
}

}  // namespace

namespace detail {

std::vector<double> log_softmax_row(const DenseArray& logits) {
  if (logits.rank() != 1 && !(logits.rank() == 2 && logits.rows() == 1))
    throw ShapeError("log_softmax_row: expected a single row");
  std::vector<double> out(logits.v.begin(), logits.v.end());
  double mx = out[0];
  for (double v : out) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  for (double& v : out) v -= lse;
  return out;
}

}  // namespace detail

EncodedValues encode_values(const Model& model, const std::vector<int>& source) {
  TapeT<float> tape(mutable_params(model));
  EncodedSource<float> enc = encode(tape, model, source);
  EncodedValues out;
  out.states = enc.states.val();
  out.valid = enc.valid;
  return out;
}

// Appends one main-stream slot to the cache: the start anchor when the cache
// is empty, otherwise the next decoded token. The new row at each level is
// computed exactly as the batched decoder computes it — for the identity
// order, main slot p attends slots 0..p, all already cached.
static void extend_main(const Model& model, const EncodedValues& enc, DecoderCache& cache,
                        int token_id, int slot) {
  TapeT<float> tape(mutable_params(model));
  VarT<float> enc_states = tape.leaf(enc.states);

  VarT<float> row = add(embedding_rows(tape.param("tok_embed"), std::vector<int>{token_id}),
                        embedding_rows(tape.param("dec_pos"), std::vector<int>{slot}));
  bool fresh = cache.levels.empty();
  if (fresh) cache.levels.resize(static_cast<std::size_t>(model.cfg.layers) + 1);

  for (int k = 0; k < model.cfg.layers; ++k) {
    // record the level-k input row
    {
      DenseArray& level = cache.levels[static_cast<std::size_t>(k)];
      const DenseArray& rv = row.val();
      if (fresh && level.v.empty()) {
        level = DenseArray({1, rv.cols()});
        std::copy(rv.v.begin(), rv.v.end(), level.v.begin());
      } else {
        level.shape[0] += 1;
        level.v.insert(level.v.end(), rv.v.begin(), rv.v.end());
      }
    }
    const std::string ln_osa = names::dec_layer(k, "ln_osa");
    VarT<float> kv_raw = tape.leaf(cache.levels[static_cast<std::size_t>(k)]);
    VarT<float> kv_normed = detail::ln_block(tape, ln_osa, kv_raw);
    VarT<float> q_normed = detail::ln_block(tape, ln_osa, row);
    row = decoder_block_row(tape, model, k, row, q_normed, kv_normed, enc_states, enc.valid);
  }
  // record the post-layers row (input to the final norm)
  {
    DenseArray& level = cache.levels[static_cast<std::size_t>(model.cfg.layers)];
    const DenseArray& rv = row.val();
    if (fresh) {
      level = DenseArray({1, rv.cols()});
      std::copy(rv.v.begin(), rv.v.end(), level.v.begin());
    } else {
      level.shape[0] += 1;
      level.v.insert(level.v.end(), rv.v.begin(), rv.v.end());
    }
  }
}

DecoderCache init_decoder_cache(const Model& model, const EncodedValues& enc) {
  model.cfg.validate();
  if (enc.states.rank() != 2 || enc.states.cols() != model.cfg.hidden)
    throw ShapeError("decoder cache: encoder states have the wrong width");
  DecoderCache cache;
  extend_main(model, enc, cache, tokens::kBos, 0);
  return cache;
}

void cache_append(const Model& model, const EncodedValues& enc, DecoderCache& cache, int token) {
  if (cache.levels.empty()) throw ConsistencyError("decoder cache: not initialized");
  if (token < 0 || token >= model.cfg.vocab)
    throw ShapeError("decoder cache: token id out of range");
  int slot = static_cast<int>(cache.prefix.size()) + 1;
  if (slot + 1 > model.cfg.max_positions)
    throw ShapeError("decoder cache: prefix exceeds max_positions - 1");
  extend_main(model, enc, cache, token, slot);
  cache.prefix.push_back(token);
}

DenseArray incremental_step(const Model& model, const EncodedValues& enc,
                            const DecoderCache& cache, const std::vector<int>& prefix,
                            int stream) {
  if (cache.levels.empty()) throw ConsistencyError("decoder cache: not initialized");
  if (prefix != cache.prefix)
    throw ConsistencyError("incremental_step: prefix disagrees with the cache (stale cache?)");
  if (stream < 1 || stream > model.cfg.streams)
    throw ConsistencyError("incremental_step: stream out of range");
  const int t = static_cast<int>(cache.prefix.size()) + 1;  // 1-based decode step
  if (t + 1 > model.cfg.max_positions)
    throw ShapeError("incremental_step: step exceeds max_positions - 1");

  TapeT<float> tape(mutable_params(model));
  VarT<float> enc_states = tape.leaf(enc.states);

  // placeholder for stream n at step t: stream identity + target position (= t
  // under the identity order)
  VarT<float> g = add(embedding_rows(tape.param("stream_embed"), std::vector<int>{stream - 1}),
                      embedding_rows(tape.param("dec_pos"), std::vector<int>{t}));

  // stream n at step t sees main slots with step <= t - n, plus the anchor
  const int visible = std::max(0, t - stream) + 1;  // rows 0..max(0, t-n)
  for (int k = 0; k < model.cfg.layers; ++k) {
    const std::string ln_osa = names::dec_layer(k, "ln_osa");
    const DenseArray& level = cache.levels[static_cast<std::size_t>(k) + 1];
    DenseArray main_part({visible, level.cols()});
    std::copy(level.v.begin(), level.v.begin() + static_cast<std::ptrdiff_t>(visible * level.cols()),
              main_part.v.begin());
    VarT<float> main_normed = detail::ln_block(tape, ln_osa, tape.leaf(main_part));
    VarT<float> g_normed = detail::ln_block(tape, ln_osa, g);
    VarT<float> kv = concat_rows(std::vector<VarT<float>>{main_normed, g_normed});

    const bool shared = model.cfg.share_stream_params;
    AttnWeights<float> osa_w = model.attn_weights(tape, names::dec_attn(k, "osa", stream, shared));
    AttnWeights<float> cross_w =
        model.attn_weights(tape, names::dec_attn(k, "cross", stream, shared));
    g = add(g, attention(g_normed, kv, ones_row(kv.val().rows()), osa_w, model.cfg.heads, ForwardOptions{}));
    VarT<float> gc = detail::ln_block(tape, names::dec_layer(k, "ln_cross"), g);
    g = add(g, cross_attention(gc, enc_states, enc.valid, cross_w, model.cfg.heads, ForwardOptions{}));
    VarT<float> gf = detail::ln_block(tape, names::dec_layer(k, "ln_ffn"), g);
    g = add(g, detail::ffn_block(tape, names::dec_layer(k, "ffn"), gf));
  }
  VarT<float> out = detail::ln_block(tape, "dec.ln", g);
  VarT<float> logits = matmul(out, transpose(tape.param("tok_embed")));
  DenseArray row({model.cfg.vocab});
  const DenseArray& lv = logits.val();
  std::copy(lv.v.begin(), lv.v.end(), row.v.begin());
  return row;
}

double score_sequence(const Model& model, const std::vector<int>& source,
                      const std::vector<int>& target, const DecodeOrder& order, int stream) {
  if (stream < 1 || stream > model.cfg.streams)
    throw ConsistencyError("score_sequence: stream out of range");
  if (target.empty()) throw ShapeError("score_sequence: empty target");
  TapeT<float> tape(mutable_params(model));
  EncodedSource<float> enc = encode(tape, model, source);
  RelativeOrderMasks masks = build_masks(order, model.cfg.streams);
  DecoderOutput<float> out = decoder_forward(tape, model, enc, target, order, masks);
  std::vector<int> permuted(target.size());
  for (std::size_t t = 0; t < target.size(); ++t)
    permuted[t] = target[static_cast<std::size_t>(order.positions[t] - 1)];
  VarT<float> nll = nll_rows(out.stream_logits[static_cast<std::size_t>(stream - 1)], permuted);
  double sum = 0.0;
  for (float v : nll.val().v) sum += static_cast<double>(v);
  return -sum;
}

namespace {

struct ModelScorer {
  using State = DecoderCache;
  const Model& model;
  const EncodedValues& enc;

  int vocab() const { return model.cfg.vocab; }
  State initial() const { return init_decoder_cache(model, enc); }
  std::vector<double> log_probs(const State& s) const {
    return detail::log_softmax_row(incremental_step(model, enc, s, s.prefix, 1));
  }
  State advance(const State& s, int token) const {
    State next = s;
    cache_append(model, enc, next, token);
    return next;
  }
};

}  // namespace

std::vector<Hypothesis> beam_search(const Model& model, const std::vector<int>& source,
                                    const BeamConfig& cfg) {
  cfg.validate();
  if (cfg.max_len + 1 > model.cfg.max_positions)
    throw ConfigError("beam: max_len exceeds the model's max_positions - 1");
  EncodedValues enc = encode_values(model, source);
  ModelScorer scorer{model, enc};
  return beam_search_core(scorer, cfg, tokens::kEos);
}

Hypothesis greedy_decode(const Model& model, const std::vector<int>& source,
                         const BeamConfig& cfg) {
  BeamConfig g = cfg;
  g.beam = 1;
  std::vector<Hypothesis> out = beam_search(model, source, g);
  if (out.empty()) throw ConsistencyError("greedy_decode: no hypothesis produced");
  return out.front();
}

}  // namespace p3lm
