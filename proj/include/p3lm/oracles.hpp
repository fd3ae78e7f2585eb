#pragma once

#include <functional>
#include <vector>

#include "p3lm/array.hpp"
#include "p3lm/autodiff.hpp"
#include "p3lm/model.hpp"
#include "p3lm/order.hpp"

// Independent reference implementations used by tests and the selfcheck
// command. Each oracle recomputes its answer through a deliberately different
// construction from the production path (prefix slicing instead of inverse
// permutations, structural loop bounds instead of additive masks, exhaustive
// enumeration instead of beam pruning) so agreement is meaningful.

namespace p3lm::oracle {

// ---- mask oracle ------------------------------------------------------------
// Builds visibility sets by slicing the order's step prefix directly:
// step t of stream n may see slot 0, every position listed in the first t - n
// order entries, and its own placeholder. The main stream at slot p sees the
// order prefix up to and including p's own step.

MaskMatrix main_mask(const std::vector<int>& order_positions);
std::vector<MaskMatrix> query_masks(const std::vector<int>& order_positions, int streams);

// ---- vanilla causal decoder oracle -------------------------------------------
// A from-scratch forward pass of the architecture specialized to one
// prediction stream over the identity order: a standard causal decoder with a
// placeholder query stream. No tape, no mask matrices; causality comes from
// loop bounds, and excluded positions are simply never touched. Reads the
// same named parameters as the production model.

template <typename T>
ArrayT<T> vanilla_encode(const ModelConfig& cfg, const ParamStoreT<T>& params,
                         const std::vector<int>& source);

// Returns (T x V) next-token logits; row t-1 predicts target position t.
template <typename T>
ArrayT<T> vanilla_stream_logits(const ModelConfig& cfg, const ParamStoreT<T>& params,
                                const ArrayT<T>& enc_states, const std::vector<int>& target);

// Per-position NLL of the target under the oracle's logits (length T).
template <typename T>
std::vector<double> vanilla_nll(const ModelConfig& cfg, const ParamStoreT<T>& params,
                                const std::vector<int>& source, const std::vector<int>& target);

// ---- exhaustive search oracle -------------------------------------------------
// Enumerates every candidate sequence up to max_len and applies the same
// finishing and ranking rules as the beam: a hypothesis ends on the end token
// (not allowed before min_len) or at max_len, and candidates are ranked by
// log-prob / len^length_penalty with ties broken toward lexicographically
// smaller token sequences.

struct EnumerationResult {
  std::vector<int> tokens;
  double logprob = 0.0;
  double score = 0.0;
};

// next_logprobs(prefix) returns log p(token | prefix) for every token id.
std::vector<EnumerationResult> enumerate_best(
    const std::function<std::vector<double>(const std::vector<int>&)>& next_logprobs,
    int vocab, int eos, int min_len, int max_len, double length_penalty, int top);

// ---- vanilla oracle implementation -------------------------------------------

namespace detail {

template <typename T>
ArrayT<T> ln_rows(const ArrayT<T>& x, const ArrayT<T>& gain, const ArrayT<T>& bias) {
  const std::int64_t R = x.rows(), C = x.cols();
  ArrayT<T> out({R, C});
  for (std::int64_t r = 0; r < R; ++r) {
    T mu = T(0);
    for (std::int64_t c = 0; c < C; ++c) mu += x.at(r, c);
    mu /= static_cast<T>(C);
    T var = T(0);
    for (std::int64_t c = 0; c < C; ++c) {
      const T d = x.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<T>(C);
    const T isd = T(1) / std::sqrt(var + T(1e-5));
    for (std::int64_t c = 0; c < C; ++c)
      out.at(r, c) = (x.at(r, c) - mu) * isd * gain[c] + bias[c];
  }
  return out;
}

template <typename T>
ArrayT<T> ffn_rows(const ArrayT<T>& x, const ArrayT<T>& w1, const ArrayT<T>& b1,
                   const ArrayT<T>& w2, const ArrayT<T>& b2) {
  ArrayT<T> h = matmul_nn(x, w1);
  for (std::int64_t r = 0; r < h.rows(); ++r)
    for (std::int64_t c = 0; c < h.cols(); ++c) {
      const double v = static_cast<double>(h.at(r, c) + b1[c]);
      h.at(r, c) = static_cast<T>(v * 0.5 * (1.0 + std::erf(v / 1.4142135623730951)));
    }
  ArrayT<T> out = matmul_nn(h, w2);
  for (std::int64_t r = 0; r < out.rows(); ++r)
    for (std::int64_t c = 0; c < out.cols(); ++c) out.at(r, c) += b2[c];
  return out;
}

// Attention where row r of the queries may only see the key indices listed in
// allowed[r]; nothing else is ever read, so exclusion is structural.
template <typename T>
ArrayT<T> attend_rows(const ArrayT<T>& q_in, const ArrayT<T>& kv_in,
                      const std::vector<std::vector<int>>& allowed, const ArrayT<T>& wq,
                      const ArrayT<T>& wk, const ArrayT<T>& wv, const ArrayT<T>& wo, int heads) {
  const std::int64_t D = q_in.cols();
  const std::int64_t hd = D / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
  ArrayT<T> Q = matmul_nn(q_in, wq);
  ArrayT<T> K = matmul_nn(kv_in, wk);
  ArrayT<T> V = matmul_nn(kv_in, wv);
  ArrayT<T> ctx({q_in.rows(), D});
  for (std::int64_t r = 0; r < q_in.rows(); ++r) {
    const auto& keys = allowed[static_cast<std::size_t>(r)];
    for (int h = 0; h < heads; ++h) {
      const std::int64_t off = h * hd;
      std::vector<T> scores;
      scores.reserve(keys.size());
      T mx = -std::numeric_limits<T>::infinity();
      for (int j : keys) {
        T s = T(0);
        for (std::int64_t c = 0; c < hd; ++c) s += Q.at(r, off + c) * K.at(j, off + c);
        s *= inv_sqrt;
        scores.push_back(s);
        mx = std::max(mx, s);
      }
      T z = T(0);
      for (T& s : scores) {
        s = std::exp(s - mx);
        z += s;
      }
      for (std::size_t ji = 0; ji < keys.size(); ++ji) {
        const T w = scores[ji] / z;
        for (std::int64_t c = 0; c < hd; ++c)
          ctx.at(r, off + c) += w * V.at(keys[ji], off + c);
      }
    }
  }
  return matmul_nn(ctx, wo);
}

template <typename T>
const ArrayT<T>& pv(const ParamStoreT<T>& params, const std::string& name) {
  return params.by_name(name).value;
}

}  // namespace detail

template <typename T>
ArrayT<T> vanilla_encode(const ModelConfig& cfg, const ParamStoreT<T>& params,
                         const std::vector<int>& source) {
  using detail::pv;
  const std::int64_t S = static_cast<std::int64_t>(source.size());
  const std::int64_t D = cfg.hidden;
  ArrayT<T> x({S, D});
  const ArrayT<T>& tok = pv(params, "tok_embed");
  const ArrayT<T>& pos = pv(params, "enc_pos");
  for (std::int64_t r = 0; r < S; ++r)
    for (std::int64_t c = 0; c < D; ++c)
      x.at(r, c) = tok.at(source[static_cast<std::size_t>(r)], c) + pos.at(r, c);
  std::vector<std::vector<int>> all(static_cast<std::size_t>(S));
  for (std::int64_t r = 0; r < S; ++r)
    for (std::int64_t j = 0; j < S; ++j)
      all[static_cast<std::size_t>(r)].push_back(static_cast<int>(j));
  for (int k = 0; k < cfg.layers; ++k) {
    const std::string a = names::enc_layer(k, "attn");
    ArrayT<T> xn = detail::ln_rows(x, pv(params, names::enc_layer(k, "ln1") + ".g"),
                                   pv(params, names::enc_layer(k, "ln1") + ".b"));
    add_into(x, detail::attend_rows(xn, xn, all, pv(params, a + ".wq"), pv(params, a + ".wk"),
                                    pv(params, a + ".wv"), pv(params, a + ".wo"), cfg.heads));
    const std::string f = names::enc_layer(k, "ffn");
    ArrayT<T> xf = detail::ln_rows(x, pv(params, names::enc_layer(k, "ln2") + ".g"),
                                   pv(params, names::enc_layer(k, "ln2") + ".b"));
    add_into(x, detail::ffn_rows(xf, pv(params, f + ".w1"), pv(params, f + ".b1"),
                                 pv(params, f + ".w2"), pv(params, f + ".b2")));
  }
  return detail::ln_rows(x, pv(params, "enc.ln.g"), pv(params, "enc.ln.b"));
}

template <typename T>
ArrayT<T> vanilla_stream_logits(const ModelConfig& cfg, const ParamStoreT<T>& params,
                                const ArrayT<T>& enc_states, const std::vector<int>& target) {
  using detail::pv;
  const int TL = static_cast<int>(target.size());
  const std::int64_t D = cfg.hidden;
  const ArrayT<T>& tok = pv(params, "tok_embed");
  const ArrayT<T>& pos = pv(params, "dec_pos");
  const ArrayT<T>& stream = pv(params, "stream_embed");

  ArrayT<T> h({TL + 1, D});
  for (std::int64_t c = 0; c < D; ++c) h.at(0, c) = tok.at(tokens::kBos, c) + pos.at(0, c);
  for (int p = 1; p <= TL; ++p)
    for (std::int64_t c = 0; c < D; ++c)
      h.at(p, c) = tok.at(target[static_cast<std::size_t>(p - 1)], c) + pos.at(p, c);

  // Next-token queries: step t sits at position t, so its placeholder carries
  // the stream-0 embedding plus the position-t embedding.
  ArrayT<T> g({TL, D});
  for (int t = 1; t <= TL; ++t)
    for (std::int64_t c = 0; c < D; ++c) g.at(t - 1, c) = stream.at(0, c) + pos.at(t, c);

  const std::int64_t S = enc_states.rows();
  std::vector<std::vector<int>> enc_all_h(static_cast<std::size_t>(TL + 1));
  for (auto& row : enc_all_h)
    for (std::int64_t j = 0; j < S; ++j) row.push_back(static_cast<int>(j));
  std::vector<std::vector<int>> enc_all_g(static_cast<std::size_t>(TL));
  for (auto& row : enc_all_g)
    for (std::int64_t j = 0; j < S; ++j) row.push_back(static_cast<int>(j));

  // Causal structure, by construction rather than by mask: slot p sees slots
  // 0..p; query step t sees main slots 0..t-1 plus itself.
  std::vector<std::vector<int>> causal(static_cast<std::size_t>(TL + 1));
  for (int p = 0; p <= TL; ++p)
    for (int j = 0; j <= p; ++j) causal[static_cast<std::size_t>(p)].push_back(j);
  std::vector<std::vector<int>> step_keys(static_cast<std::size_t>(TL));
  for (int t = 1; t <= TL; ++t) {
    for (int j = 0; j < t; ++j) step_keys[static_cast<std::size_t>(t - 1)].push_back(j);
    step_keys[static_cast<std::size_t>(t - 1)].push_back(TL + 1 + (t - 1));  // own placeholder
  }

  for (int k = 0; k < cfg.layers; ++k) {
    const std::string osa = names::dec_attn(k, "osa", 0, true);
    const std::string cross = names::dec_attn(k, "cross", 0, true);
    const std::string ffn = names::dec_layer(k, "ffn");
    const std::string lna = names::dec_layer(k, "ln_osa");
    const std::string lnc = names::dec_layer(k, "ln_cross");
    const std::string lnf = names::dec_layer(k, "ln_ffn");

    ArrayT<T> hn = detail::ln_rows(h, pv(params, lna + ".g"), pv(params, lna + ".b"));
    add_into(h, detail::attend_rows(hn, hn, causal, pv(params, osa + ".wq"),
                                    pv(params, osa + ".wk"), pv(params, osa + ".wv"),
                                    pv(params, osa + ".wo"), cfg.heads));
    ArrayT<T> hc = detail::ln_rows(h, pv(params, lnc + ".g"), pv(params, lnc + ".b"));
    add_into(h, detail::attend_rows(hc, enc_states, enc_all_h, pv(params, cross + ".wq"),
                                    pv(params, cross + ".wk"), pv(params, cross + ".wv"),
                                    pv(params, cross + ".wo"), cfg.heads));
    ArrayT<T> hf = detail::ln_rows(h, pv(params, lnf + ".g"), pv(params, lnf + ".b"));
    add_into(h, detail::ffn_rows(hf, pv(params, ffn + ".w1"), pv(params, ffn + ".b1"),
                                 pv(params, ffn + ".w2"), pv(params, ffn + ".b2")));

    // The query stream reads the layer's updated main states.
    ArrayT<T> h2 = detail::ln_rows(h, pv(params, lna + ".g"), pv(params, lna + ".b"));
    ArrayT<T> gn = detail::ln_rows(g, pv(params, lna + ".g"), pv(params, lna + ".b"));
    ArrayT<T> kv({TL + 1 + TL, D});
    for (std::int64_t r = 0; r < h2.rows(); ++r)
      for (std::int64_t c = 0; c < D; ++c) kv.at(r, c) = h2.at(r, c);
    for (std::int64_t r = 0; r < gn.rows(); ++r)
      for (std::int64_t c = 0; c < D; ++c) kv.at(TL + 1 + r, c) = gn.at(r, c);
    add_into(g, detail::attend_rows(gn, kv, step_keys, pv(params, osa + ".wq"),
                                    pv(params, osa + ".wk"), pv(params, osa + ".wv"),
                                    pv(params, osa + ".wo"), cfg.heads));
    ArrayT<T> gc = detail::ln_rows(g, pv(params, lnc + ".g"), pv(params, lnc + ".b"));
    add_into(g, detail::attend_rows(gc, enc_states, enc_all_g, pv(params, cross + ".wq"),
                                    pv(params, cross + ".wk"), pv(params, cross + ".wv"),
                                    pv(params, cross + ".wo"), cfg.heads));
    ArrayT<T> gf = detail::ln_rows(g, pv(params, lnf + ".g"), pv(params, lnf + ".b"));
    add_into(g, detail::ffn_rows(gf, pv(params, ffn + ".w1"), pv(params, ffn + ".b1"),
                                 pv(params, ffn + ".w2"), pv(params, ffn + ".b2")));
  }

  ArrayT<T> g_out = detail::ln_rows(g, pv(params, "dec.ln.g"), pv(params, "dec.ln.b"));
  return matmul_nt(g_out, tok);  // tied output projection: (T x D) * (V x D)^T
}

template <typename T>
std::vector<double> vanilla_nll(const ModelConfig& cfg, const ParamStoreT<T>& params,
                                const std::vector<int>& source, const std::vector<int>& target) {
  ArrayT<T> enc = vanilla_encode(cfg, params, source);
  ArrayT<T> logits = vanilla_stream_logits(cfg, params, enc, target);
  std::vector<double> out;
  out.reserve(target.size());
  for (std::int64_t r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < logits.cols(); ++c)
      mx = std::max(mx, static_cast<double>(logits.at(r, c)));
    double z = 0.0;
    for (std::int64_t c = 0; c < logits.cols(); ++c)
      z += std::exp(static_cast<double>(logits.at(r, c)) - mx);
    const int y = target[static_cast<std::size_t>(r)];
    out.push_back(std::log(z) + mx - static_cast<double>(logits.at(r, y)));
  }
  return out;
}

}  // namespace p3lm::oracle
