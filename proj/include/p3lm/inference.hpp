#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "p3lm/errors.hpp"
#include "p3lm/model.hpp"
#include "p3lm/order.hpp"

namespace p3lm {

struct BeamConfig {
  int beam = 5;
  double length_penalty = 1.2;  // score = logprob / len^length_penalty
  int min_len = 1;              // content tokens required before </s> may fire
  int max_len = 32;

  void validate() const {
    if (beam < 1) throw ConfigError("beam: width must be >= 1");
    if (length_penalty < 0) throw ConfigError("beam: length_penalty must be >= 0");
    if (min_len < 1 || min_len > max_len)
      throw ConfigError("beam: need 1 <= min_len <= max_len");
  }
};

// A (possibly finished) decode. tokens includes the trailing </s> when the
// hypothesis ended on it; ends_with_eos=false marks the best-effort result
// returned when max_len arrived first. score = logprob / len^gamma where len
// counts every emitted token including </s>.
struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0.0;
  double score = 0.0;
  bool ends_with_eos = false;
};

// Generic beam loop over a Scorer:
//   int vocab() const;
//   State initial() const;
//   std::vector<double> log_probs(const State&) const;  // size vocab()
//   State advance(const State&, int token) const;
// Each step keeps the top `beam` candidates by joint log-prob; a kept
// candidate ending on eos (or hitting max_len) leaves the live set as a
// finished hypothesis, so width 1 is exactly the greedy walk and a width
// covering every candidate enumerates the full tree. Final ranking is
// (score desc, tokens lex asc).
template <typename Scorer>
std::vector<Hypothesis> beam_search_core(const Scorer& scorer, const BeamConfig& cfg, int eos) {
  cfg.validate();
  const int V = scorer.vocab();
  if (V < 2) throw ConfigError("beam: vocabulary too small");
  if (eos < 0 || eos >= V) throw ConfigError("beam: eos id out of range");

  struct Live {
    typename Scorer::State state;
    std::vector<int> tokens;
    double logprob = 0.0;
  };
  std::vector<Live> live;
  live.push_back(Live{scorer.initial(), {}, 0.0});
  std::vector<Hypothesis> finished;

  for (int step = 1; step <= cfg.max_len && !live.empty(); ++step) {
    struct Cand {
      int parent;
      int token;
      double logprob;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * static_cast<std::size_t>(V));
    for (std::size_t i = 0; i < live.size(); ++i) {
      std::vector<double> lp = scorer.log_probs(live[i].state);
      if (static_cast<int>(lp.size()) != V)
        throw ConsistencyError("beam: scorer returned wrong vocab size");
      for (int tok = 0; tok < V; ++tok) {
        if (tok == eos && static_cast<int>(live[i].tokens.size()) < cfg.min_len) continue;
        cands.push_back(Cand{static_cast<int>(i), tok, live[i].logprob + lp[static_cast<std::size_t>(tok)]});
      }
    }
    auto seq_of = [&](const Cand& c) {
      std::vector<int> s = live[static_cast<std::size_t>(c.parent)].tokens;
      s.push_back(c.token);
      return s;
    };
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return seq_of(a) < seq_of(b);
    });

    std::vector<Live> next;
    const std::size_t take = std::min(cands.size(), static_cast<std::size_t>(cfg.beam));
    for (std::size_t c = 0; c < take; ++c) {
      const Cand& cand = cands[c];
      const bool ends = cand.token == eos;
      if (ends || step == cfg.max_len) {
        Hypothesis h;
        h.tokens = seq_of(cand);
        h.logprob = cand.logprob;
        h.ends_with_eos = ends;
        h.score =
            cand.logprob / std::pow(static_cast<double>(h.tokens.size()), cfg.length_penalty);
        finished.push_back(std::move(h));
      } else {
        next.push_back(Live{scorer.advance(live[static_cast<std::size_t>(cand.parent)].state, cand.token),
                            seq_of(cand), cand.logprob});
      }
    }
    live = std::move(next);
  }

  std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  if (static_cast<int>(finished.size()) > cfg.beam)
    finished.resize(static_cast<std::size_t>(cfg.beam));
  return finished;
}

// Encoder output captured as plain values for repeated incremental decoding.
struct EncodedValues {
  DenseArray states;  // (S x D), final-normalized
  std::vector<std::uint8_t> valid;
};

EncodedValues encode_values(const Model& model, const std::vector<int>& source);

// Left-to-right incremental decoder state. levels[k] holds the main-stream
// slot states entering layer k (level layers = input to the final norm), one
// row per decoded slot including the start anchor. Plain value arrays, so
// beam hypotheses copy it freely.
struct DecoderCache {
  std::vector<int> prefix;          // decoded target tokens, identity order
  std::vector<DenseArray> levels;   // layers+1 arrays, rows = prefix.size()+1
};

DecoderCache init_decoder_cache(const Model& model, const EncodedValues& enc);

// Extends the cache with the next decoded token (slot prefix.size()+1).
void cache_append(const Model& model, const EncodedValues& enc, DecoderCache& cache, int token);

// Logits (shape {vocab}) for prediction stream `stream` at the next step,
// given the cached prefix. `prefix` must equal cache.prefix (consistency
// guard against stale caches).
DenseArray incremental_step(const Model& model, const EncodedValues& enc,
                            const DecoderCache& cache, const std::vector<int>& prefix,
                            int stream = 1);

// Sum over steps of log p(token at the step's position | visible context) for
// the given stream under the given order; always <= 0. source/target carry
// their trailing </s>.
double score_sequence(const Model& model, const std::vector<int>& source,
                      const std::vector<int>& target, const DecodeOrder& order, int stream = 1);

// Left-to-right beam search over stream 1. source carries its trailing </s>.
// Returned hypotheses include </s> when finished by it; an all-unfinished
// outcome yields best-effort hypotheses with ends_with_eos=false.
std::vector<Hypothesis> beam_search(const Model& model, const std::vector<int>& source,
                                    const BeamConfig& cfg);

// beam_search with width 1.
Hypothesis greedy_decode(const Model& model, const std::vector<int>& source, const BeamConfig& cfg);

namespace detail {
// Numerically stable log-softmax over a logit row, computed in double.
std::vector<double> log_softmax_row(const DenseArray& logits);
}  // namespace detail

}  // namespace p3lm
