#include "p3lm/metrics.hpp"

#include <algorithm>
#include <cstdint>

namespace p3lm {

int lcs_length(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  // rolling single-row DP
  std::vector<int> row(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    int diag = 0;  // dp[i-1][j-1]
    for (std::size_t j = 1; j <= m; ++j) {
      const int up = row[j];
      row[j] = (a[i - 1] == b[j - 1]) ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[m];
}

RougeL rouge_l(const std::vector<int>& candidate, const std::vector<int>& reference) {
  if (reference.empty()) throw DataError("rouge_l: empty reference");
  RougeL r;
  r.lcs = lcs_length(candidate, reference);
  r.precision = candidate.empty() ? 0.0 : static_cast<double>(r.lcs) / candidate.size();
  r.recall = static_cast<double>(r.lcs) / reference.size();
  const double denom = r.precision + r.recall;
  r.f1 = denom == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / denom;
  return r;
}

double token_accuracy(const std::vector<int>& candidate, const std::vector<int>& reference) {
  if (reference.empty()) throw DataError("token_accuracy: empty reference");
  const std::size_t overlap = std::min(candidate.size(), reference.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < overlap; ++i)
    if (candidate[i] == reference[i]) ++hits;
  return static_cast<double>(hits) / reference.size();
}

bool exact_match(const std::vector<int>& candidate, const std::vector<int>& reference) {
  return candidate == reference;
}

CorpusMetrics corpus_metrics(const std::vector<std::vector<int>>& candidates,
                             const std::vector<std::vector<int>>& references) {
  if (candidates.size() != references.size())
    throw DataError("corpus_metrics: candidate/reference count mismatch");
  if (candidates.empty()) throw DataError("corpus_metrics: no pairs");

  std::int64_t hits = 0, ref_tokens = 0, cand_tokens = 0, lcs_total = 0, exact = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& ref = references[i];
    if (ref.empty()) throw DataError("corpus_metrics: empty reference at pair " + std::to_string(i));
    const std::size_t overlap = std::min(cand.size(), ref.size());
    for (std::size_t j = 0; j < overlap; ++j)
      if (cand[j] == ref[j]) ++hits;
    ref_tokens += static_cast<std::int64_t>(ref.size());
    cand_tokens += static_cast<std::int64_t>(cand.size());
    lcs_total += lcs_length(cand, ref);
    if (cand == ref) ++exact;
  }

  CorpusMetrics m;
  m.pairs = static_cast<std::int64_t>(candidates.size());
  m.reference_tokens = ref_tokens;
  m.token_accuracy = static_cast<double>(hits) / static_cast<double>(ref_tokens);
  m.exact_match = static_cast<double>(exact) / static_cast<double>(m.pairs);
  const double p = cand_tokens == 0 ? 0.0 : static_cast<double>(lcs_total) / static_cast<double>(cand_tokens);
  const double r = static_cast<double>(lcs_total) / static_cast<double>(ref_tokens);
  m.rouge_l_f1 = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  return m;
}

}  // namespace p3lm
