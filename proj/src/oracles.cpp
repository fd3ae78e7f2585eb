#include "p3lm/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "p3lm/errors.hpp"

namespace p3lm::oracle {

namespace {
// Visible absolute positions after the first `steps` decode steps.
std::vector<int> prefix_positions(const std::vector<int>& order, int steps) {
  std::vector<int> out;
  for (int s = 0; s < steps && s < static_cast<int>(order.size()); ++s)
    out.push_back(order[static_cast<std::size_t>(s)]);
  return out;
}
}  // namespace

MaskMatrix main_mask(const std::vector<int>& order) {
  const int T = static_cast<int>(order.size());
  MaskMatrix m({T + 1, T + 1});
  m.at(0, 0) = 1;
  for (int p = 1; p <= T; ++p) {
    // Find p's own step by scanning the order list.
    int step_p = 0;
    for (int s = 0; s < T; ++s)
      if (order[static_cast<std::size_t>(s)] == p) step_p = s + 1;
    m.at(p, 0) = 1;
    for (int q : prefix_positions(order, step_p)) m.at(p, q) = 1;
  }
  return m;
}

std::vector<MaskMatrix> query_masks(const std::vector<int>& order, int streams) {
  const int T = static_cast<int>(order.size());
  std::vector<MaskMatrix> out;
  for (int n = 1; n <= streams; ++n) {
    MaskMatrix m({T, 2 * T + 1});
    for (int t = 1; t <= T; ++t) {
      m.at(t - 1, 0) = 1;
      for (int q : prefix_positions(order, t - n)) m.at(t - 1, q) = 1;
      m.at(t - 1, T + t) = 1;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EnumerationResult> enumerate_best(
    const std::function<std::vector<double>(const std::vector<int>&)>& next_logprobs,
    int vocab, int eos, int min_len, int max_len, double length_penalty, int top) {
  if (max_len < 1 || min_len < 1 || min_len > max_len)
    throw ConfigError("enumerate_best: need 1 <= min_len <= max_len");
  std::vector<EnumerationResult> finished;
  std::vector<int> prefix;

  // Depth-first walk over every sequence; a candidate finishes on eos (only
  // once min_len non-eos tokens exist) or by hitting max_len. The running
  // log-probability is passed down by value and extended with one rounded
  // addition per token, left to right: restoring a shared accumulator by
  // subtraction would drift by an ulp per visit and turn exact ties between
  // same-scored sequences into phantom strict inequalities.
  std::function<void(double)> walk = [&](double logprob) {
    const std::vector<double> lp = next_logprobs(prefix);
    if (static_cast<int>(lp.size()) != vocab)
      throw ConsistencyError("enumerate_best: scorer returned wrong vocab size");
    for (int tok = 0; tok < vocab; ++tok) {
      if (tok == eos && static_cast<int>(prefix.size()) < min_len) continue;
      prefix.push_back(tok);
      const double child = logprob + lp[static_cast<std::size_t>(tok)];
      if (tok == eos || static_cast<int>(prefix.size()) == max_len) {
        EnumerationResult r;
        r.tokens = prefix;
        r.logprob = child;
        r.score = child / std::pow(static_cast<double>(prefix.size()), length_penalty);
        finished.push_back(std::move(r));
      } else {
        walk(child);
      }
      prefix.pop_back();
    }
  };
  walk(0.0);

  std::sort(finished.begin(), finished.end(),
            [](const EnumerationResult& a, const EnumerationResult& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.tokens < b.tokens;
            });
  if (static_cast<int>(finished.size()) > top)
    finished.resize(static_cast<std::size_t>(top));
  return finished;
}

}  // namespace p3lm::oracle
