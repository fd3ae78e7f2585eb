#pragma once

#include <cstdint>
#include <vector>

#include "p3lm/errors.hpp"

namespace p3lm {

// ROUGE-L: longest-common-subsequence overlap between a candidate and a
// reference token sequence. precision = LCS/|candidate|, recall = LCS/|reference|,
// f1 = harmonic mean (0 when both are 0). Worked example: candidate [a, c]
// against reference [a, b, c] has LCS 2, precision 1.0, recall 2/3, f1 0.8.
struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int lcs = 0;
};

// Length of the longest common subsequence of a and b.
int lcs_length(const std::vector<int>& a, const std::vector<int>& b);

// Throws DataError when the reference is empty (an empty candidate is legal
// and scores zero).
RougeL rouge_l(const std::vector<int>& candidate, const std::vector<int>& reference);

// Positional token accuracy: matches at aligned positions divided by the
// reference length. Extra candidate tokens beyond the reference count as
// wrong only through the denominator staying |reference|; missing positions
// count as misses. Throws DataError on an empty reference.
double token_accuracy(const std::vector<int>& candidate, const std::vector<int>& reference);

// Whole-sequence equality.
bool exact_match(const std::vector<int>& candidate, const std::vector<int>& reference);

// Corpus-level aggregation (micro-averaged: totals pooled across pairs, not a
// mean of per-pair scores). Pairs are matched by index; the two lists must
// have equal, nonzero length and no empty reference.
struct CorpusMetrics {
  double token_accuracy = 0.0;  // total position matches / total reference tokens
  double exact_match = 0.0;     // fraction of exactly matching pairs
  double rouge_l_f1 = 0.0;      // micro F1 from pooled LCS/candidate/reference totals
  std::int64_t pairs = 0;
  std::int64_t reference_tokens = 0;
};

CorpusMetrics corpus_metrics(const std::vector<std::vector<int>>& candidates,
                             const std::vector<std::vector<int>>& references);

}  // namespace p3lm
