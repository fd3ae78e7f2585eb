#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace p3lm {

// One internal consistency suite's outcome. `detail` is a short deterministic
// summary (counts, worst-case errors) so repeated runs with the same seed
// print byte-identical reports.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Exhaustive mask comparison against the prefix-slicing oracle: every
// permutation for target lengths 1..5 with two prediction streams.
CheckResult check_masks();

// Random leakage probes: mutate a target position that is invisible to a
// chosen (stream, step) and require that step's logits to be bit-identical.
CheckResult check_leakage(int probes, std::uint64_t seed);

// Random tiny configurations decoded over the identity order must match the
// loop-bound vanilla causal decoder to within tolerance.
CheckResult check_vanilla(int configs, std::uint64_t seed, double tolerance = 1e-5);

// Central finite differences against tape gradients through the full
// encoder/decoder stack in double precision.
CheckResult check_gradients(std::uint64_t seed, double tolerance = 1e-4);

// Order sampler statistics: chi-square uniformity over the 6 permutations of
// length 3, and the mixture's identity frequency alpha + (1-alpha)/6.
CheckResult check_sampler(std::uint64_t seed);

// All suites in a fixed order.
std::vector<CheckResult> run_all_selfchecks(std::uint64_t seed);

// "PASS name: detail" / "FAIL name: detail" lines plus a summary line.
std::string format_selfcheck_report(const std::vector<CheckResult>& results);

}  // namespace p3lm
