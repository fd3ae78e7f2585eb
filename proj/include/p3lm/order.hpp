#pragma once

#include <string>
#include <vector>

#include "p3lm/array.hpp"
#include "p3lm/rng.hpp"

namespace p3lm {

enum class OrderKind { kL2R, kURP, kAlpha };
enum class OrderBranch { kL2R, kURP };

OrderKind order_kind_from_string(const std::string& s);
std::string to_string(OrderKind k);
std::string to_string(OrderBranch b);

// A decoding order over a length-T target: positions[t-1] is the 1-based
// absolute target position generated at step t. The branch tag records which
// mixture component produced the order (a uniform draw that happens to be the
// identity still counts as the uniform branch).
struct DecodeOrder {
  std::vector<int> positions;
  OrderBranch branch = OrderBranch::kL2R;

  int length() const { return static_cast<int>(positions.size()); }
  bool is_identity() const;
  void validate() const;  // throws ConsistencyError unless a permutation of 1..T

  static DecodeOrder identity(int target_len);
};

// Draws an order: left-to-right is the identity with probability one; the
// uniform kind draws from all T! permutations; the mixture picks left-to-right
// with probability alpha and otherwise a uniform permutation.
DecodeOrder sample_order(OrderKind kind, int target_len, double alpha, RngStream& rng);

// Inverse permutation: result[p-1] = step at which absolute position p is
// generated (both 1-based).
std::vector<int> step_index(const DecodeOrder& order);

// Log-probability of the order under the sampling distribution. Left-to-right
// assigns probability 1 to the identity and 0 elsewhere (log = -inf).
double log_prior(OrderKind kind, double alpha, const DecodeOrder& order);

// Attention inclusion masks for one decoding order, laid out on absolute
// target slots. Slot 0 is the start token; slots 1..T are target positions.
//
//   main:  (T+1) x (T+1). Row p = key/query slot p of the main stream. The
//          start row sees only itself; row p sees the start slot plus every
//          position decoded no later than p.
//   query: one T x (2T+1) matrix per prediction stream n (1-based). Row t is
//          the query for decode step t; columns 0..T are main-stream slots and
//          column T+t is the stream's own placeholder. Stream n sees the start
//          slot, positions decoded at steps <= t - n, and its placeholder.
struct RelativeOrderMasks {
  int target_len = 0;
  int streams = 0;
  MaskMatrix main;
  std::vector<MaskMatrix> query;
};

RelativeOrderMasks build_masks(const DecodeOrder& order, int streams);

// Text round-trip for inspection and cross-checking. dump -> parse -> dump is
// byte-identical.
std::string dump_masks(const DecodeOrder& order, const RelativeOrderMasks& masks);

struct ParsedMasks {
  DecodeOrder order;  // branch defaults to kL2R; the dump does not carry it
  RelativeOrderMasks masks;
};

ParsedMasks parse_masks(const std::string& text);

}  // namespace p3lm
