// Acceptance gate. Each numbered criterion below is checked end to end and
// reported as exactly one verdict line with its stated tolerance. Criterion 9
// is observational (REPORT, never gates); every other criterion must PASS for
// the binary to exit 0. Criterion 10 reruns criteria 1-8 with the same seed
// and requires their accumulated logs to be byte-identical, so everything a
// criterion logs must be deterministic (no timestamps, pointers, or wall
// times inside `log`; timing is printed outside the compared text).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "p3lm/data.hpp"
#include "p3lm/inference.hpp"
#include "p3lm/metrics.hpp"
#include "p3lm/model.hpp"
#include "p3lm/oracles.hpp"
#include "p3lm/order.hpp"
#include "p3lm/rng.hpp"
#include "p3lm/selfcheck.hpp"
#include "p3lm/tokens.hpp"
#include "p3lm/training.hpp"

namespace {

constexpr std::uint64_t kSeed = 20260819;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

struct Outcome {
  bool pass = false;
  std::string detail;  // one-line summary, deterministic
  std::string log;     // full deterministic record, compared in criterion 10
};

Outcome from_check(const p3lm::CheckResult& r, const std::string& framing) {
  Outcome o;
  o.pass = r.pass;
  o.detail = framing + ": " + r.detail;
  o.log = o.detail + "\n";
  return o;
}

// ---- criterion 1: exhaustive mask oracle ------------------------------------
// Every order Z for target lengths 1..5 with two prediction streams must give
// main and per-stream query masks bit-for-bit equal to the prefix-slicing
// oracle.

Outcome crit1_masks() {
  return from_check(p3lm::check_masks(),
                    "all orders T<=5, N=2, bit-for-bit vs enumeration oracle");
}

// ---- criterion 2: no leakage -------------------------------------------------
// 200 random (order, stream, step) probes: perturbing a target position that
// the probed step must not see has to leave that step's logits bit-identical
// (an exactly-zero change, not merely a small one).

Outcome crit2_leakage(std::uint64_t seed) {
  return from_check(p3lm::check_leakage(200, seed),
                    "200 random probes, exactly-zero logit change required");
}

// ---- criterion 3: vanilla equivalence ---------------------------------------
// 20 random tiny configurations decoded over the identity order must match an
// independently coded loop-bound causal decoder to within 1e-5 per token NLL.

Outcome crit3_vanilla(std::uint64_t seed) {
  return from_check(p3lm::check_vanilla(20, seed, 1e-5),
                    "20 random tiny configs, identity order, tol 1e-5");
}

// ---- criterion 4: gradient fidelity -----------------------------------------
// Central finite differences against the tape gradient through the full stack
// at the stated configuration (K=2 layers, D=16, H=2 heads, V=20, target
// length 5, N=2 streams): relative error <= 1e-4 over at least 200 sampled
// coordinates, computed in double precision.

Outcome crit4_gradients(std::uint64_t seed) {
  using p3lm::ModelT;
  p3lm::ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.ffn = 32;
  cfg.heads = 2;
  cfg.vocab = 20;
  cfg.streams = 2;
  cfg.max_positions = 8;
  ModelT<double> model = ModelT<double>::init(cfg, seed);

  const std::vector<int> source = {7, 12, 5, 18, 9, p3lm::tokens::kEos};
  const std::vector<int> target = {11, 6, 15, 8, p3lm::tokens::kEos};  // T = 5
  p3lm::DecodeOrder order;
  order.positions = {3, 1, 5, 2, 4};
  order.branch = p3lm::OrderBranch::kURP;
  const p3lm::RelativeOrderMasks masks = p3lm::build_masks(order, cfg.streams);

  std::vector<int> permuted(target.size());
  for (std::size_t t = 0; t < target.size(); ++t)
    permuted[t] = target[static_cast<std::size_t>(order.positions[t] - 1)];

  auto loss_fn = [&](p3lm::TapeT<double>& tape) {
    p3lm::EncodedSource<double> enc = p3lm::encode(tape, model, source);
    p3lm::DecoderOutput<double> out =
        p3lm::decoder_forward(tape, model, enc, target, order, masks);
    p3lm::VarT<double> total =
        p3lm::add(p3lm::sum_all(p3lm::nll_rows(out.stream_logits[0], permuted)),
                  p3lm::sum_all(p3lm::nll_rows(out.stream_logits[1], permuted)));
    const double denom = 2.0 * static_cast<double>(target.size());
    return p3lm::scale(total, 1.0 / denom);
  };

  p3lm::RngStream rng = p3lm::RngStream(seed).derive("grad-coords");
  const p3lm::GradCheckReport rep = p3lm::grad_check(model.params, loss_fn, 1e-5, 3, rng);

  Outcome o;
  o.pass = rep.max_rel_err <= 1e-4 && rep.coords_checked >= 200;
  o.detail = fmt(
      "K=2 D=16 H=2 V=20 T=5 N=2, double FD step 1e-5: max rel err %.3g (tol 1e-4) "
      "over %lld coords (>=200 required)",
      rep.max_rel_err, static_cast<long long>(rep.coords_checked));
  if (!o.pass) o.detail += "; worst " + rep.worst_coord;
  o.log = o.detail + "\n";
  return o;
}

// ---- criterion 5: order sampler statistics ----------------------------------
// 60k uniform random-permutation draws at T=3: chi-square over the 6
// permutations < 20.515 (df 5, p ~ 0.001); the alpha=0.5 mixture's identity
// frequency must sit within 0.5833 +- 0.01.

Outcome crit5_sampler(std::uint64_t seed) {
  return from_check(p3lm::check_sampler(seed),
                    "60k draws at T=3: chi^2(5) < 20.515, identity freq 0.5833 +- 0.01");
}

// ---- criterion 6: span masking statistics -----------------------------------
// Every full 64-token window masks exactly one contiguous 9-token span, and
// the in-span replacement mix observed over >= 1e5 masked tokens is
// 80% [M] / 10% random / 10% kept, each within +-2% absolute. Tokens outside
// spans must pass through untouched and the target must reproduce the
// original span contents.

Outcome crit6_spans(std::uint64_t seed) {
  const p3lm::SpanMaskSpec spec;  // canonical: window 64, span 9
  const int vocab = 32;
  const int windows_per_line = 10;
  const int line_len = spec.window * windows_per_line;
  const int lines = 1112;  // 1112 * 10 * 9 = 100,080 masked tokens

  p3lm::RngStream root(seed);
  std::int64_t masked = 0, as_mask = 0, as_keep = 0, as_random = 0;
  std::int64_t structure_violations = 0, passthrough_violations = 0, target_violations = 0;

  for (int li = 0; li < lines; ++li) {
    p3lm::RngStream irng = root.derive("input").derive(static_cast<std::uint64_t>(li));
    std::vector<int> input(static_cast<std::size_t>(line_len));
    for (int i = 0; i < line_len; ++i)
      input[static_cast<std::size_t>(i)] =
          p3lm::tokens::kNumSpecials +
          static_cast<int>(irng.below(static_cast<std::uint64_t>(vocab - p3lm::tokens::kNumSpecials)));

    p3lm::RngStream mrng = root.derive("mask").derive(static_cast<std::uint64_t>(li));
    const p3lm::SpanMaskResult r = p3lm::apply_span_mask(input, spec, vocab, mrng);

    // Structure: one span per window, length exactly 9, fully inside its window.
    if (static_cast<int>(r.spans.size()) != windows_per_line) ++structure_violations;
    std::vector<std::uint8_t> in_span(static_cast<std::size_t>(line_len), 0);
    std::vector<int> expect_target;
    for (int w = 0; w < static_cast<int>(r.spans.size()); ++w) {
      const auto [off, len] = r.spans[static_cast<std::size_t>(w)];
      if (len != spec.span_len || off < w * spec.window ||
          off + len > (w + 1) * spec.window)
        ++structure_violations;
      for (int i = off; i < off + len; ++i) {
        in_span[static_cast<std::size_t>(i)] = 1;
        expect_target.push_back(input[static_cast<std::size_t>(i)]);
      }
    }
    if (r.target != expect_target) ++target_violations;

    for (int i = 0; i < line_len; ++i) {
      const int src = r.source[static_cast<std::size_t>(i)];
      const int orig = input[static_cast<std::size_t>(i)];
      if (!in_span[static_cast<std::size_t>(i)]) {
        if (src != orig) ++passthrough_violations;
        continue;
      }
      ++masked;
      if (src == p3lm::tokens::kMask)
        ++as_mask;
      else if (src == orig)
        ++as_keep;
      else
        ++as_random;
    }
  }

  const double fm = static_cast<double>(as_mask) / static_cast<double>(masked);
  const double fk = static_cast<double>(as_keep) / static_cast<double>(masked);
  const double fr = static_cast<double>(as_random) / static_cast<double>(masked);

  Outcome o;
  o.pass = masked >= 100000 && structure_violations == 0 && passthrough_violations == 0 &&
           target_violations == 0 && std::abs(fm - 0.8) <= 0.02 && std::abs(fr - 0.1) <= 0.02 &&
           std::abs(fk - 0.1) <= 0.02;
  o.detail = fmt(
      "%lld masked tokens, 9 per 64-window (%lld structure, %lld passthrough, %lld target "
      "violations): [M]=%.4f random=%.4f keep=%.4f vs 0.80/0.10/0.10 +-0.02",
      static_cast<long long>(masked), static_cast<long long>(structure_violations),
      static_cast<long long>(passthrough_violations), static_cast<long long>(target_violations),
      fm, fr, fk);
  o.log = o.detail + "\n";
  return o;
}

// ---- criterion 7: copy-task convergence -------------------------------------
// Train on 20,000 synthetic copy instances (vocab 32, lengths 4..16) with two
// prediction streams, the alpha=0.5 order mixture, and one order per instance,
// then decode 200 held-out sources greedily left-to-right. Requires >= 99%
// token accuracy and >= 95% exact match within <= 5000 optimizer steps on one
// core.

Outcome crit7_copy(std::uint64_t seed) {
  p3lm::RngStream gen = p3lm::RngStream(seed).derive("copy-train");
  const p3lm::Dataset train_data =
      p3lm::gen_synthetic(p3lm::SynthTask::kCopy, 27, 4, 16, 20000, gen);

  p3lm::ModelConfig mc;
  mc.layers = 1;
  mc.hidden = 32;
  mc.ffn = 64;
  mc.heads = 2;
  mc.vocab = 32;
  mc.streams = 2;
  mc.max_positions = 32;
  p3lm::Model model = p3lm::Model::init(mc, seed);

  p3lm::TrainingConfig tc;
  tc.lr = 5e-3;
  tc.warmup = 100;
  tc.batch_size = 16;
  tc.epochs = 2;
  tc.max_steps = 1500;
  tc.alpha = 0.5;
  tc.order_dist = p3lm::OrderKind::kAlpha;
  tc.orders_per_instance = 1;
  tc.seed = seed;

  std::string log;
  const p3lm::TrainResult res =
      p3lm::train(model, train_data, tc, "", [&](const p3lm::TrainStepLog& s) {
        if (s.step % 250 == 0)
          log += fmt("step %d loss %.6f\n", s.step, s.report.total);
      });

  p3lm::RngStream hgen = p3lm::RngStream(seed).derive("copy-heldout");
  const p3lm::Dataset held = p3lm::gen_synthetic(p3lm::SynthTask::kCopy, 27, 4, 16, 200, hgen);

  p3lm::BeamConfig bc;
  bc.beam = 1;  // greedy left-to-right decode
  bc.length_penalty = 1.0;
  bc.min_len = 1;
  bc.max_len = 18;

  std::vector<std::vector<int>> cands, refs;
  for (const p3lm::Instance& ins : held.instances) {
    std::vector<int> src = ins.source;
    src.push_back(p3lm::tokens::kEos);
    p3lm::Hypothesis hyp = p3lm::greedy_decode(model, src, bc);
    std::vector<int> toks = hyp.tokens;
    if (hyp.ends_with_eos) toks.pop_back();
    cands.push_back(std::move(toks));
    refs.push_back(ins.target);
  }
  const p3lm::CorpusMetrics m = p3lm::corpus_metrics(cands, refs);

  Outcome o;
  const int steps = static_cast<int>(res.steps.size());
  o.pass = steps <= 5000 && m.token_accuracy >= 0.99 && m.exact_match >= 0.95;
  o.detail = fmt(
      "copy vocab=32 len 4..16, 20000 instances, N=2 alpha=0.5 R=1, %d steps (<=5000): "
      "greedy L2R token_acc=%.4f (>=0.99), exact_match=%.4f (>=0.95) on 200 held-out",
      steps, m.token_accuracy, m.exact_match);
  o.log = log + o.detail + "\n";
  return o;
}

// ---- criterion 8: beam search vs enumeration oracle --------------------------
// Two hand-scored toy languages (V=4, max_len=4). On the concentrated table
// the full hypothesis list at widths 1..3 must equal the oracle's top-k. On
// the garden-path table width 1 provably misses the optimum while widths 2..3
// must recover it, and width 1 must walk exactly the same path as an
// independent greedy loop. Width 128 covers every candidate, so its list must
// equal the oracle's complete ranking.

struct TableScorer {
  using State = std::vector<int>;
  int V = 4;
  std::function<std::vector<double>(const State&)> fn;
  int vocab() const { return V; }
  State initial() const { return {}; }
  std::vector<double> log_probs(const State& s) const { return fn(s); }
  State advance(const State& s, int t) const {
    State n = s;
    n.push_back(t);
    return n;
  }
};

std::vector<double> to_logs(std::vector<double> probs) {
  for (double& p : probs) p = std::log(p);
  return probs;
}

std::vector<int> reference_greedy(const TableScorer& sc, const p3lm::BeamConfig& cfg, int eos) {
  std::vector<int> prefix;
  for (int step = 1; step <= cfg.max_len; ++step) {
    const std::vector<double> lp = sc.log_probs(prefix);
    int best = -1;
    for (int t = 0; t < sc.vocab(); ++t) {
      if (t == eos && static_cast<int>(prefix.size()) < cfg.min_len) continue;
      if (best < 0 || lp[static_cast<std::size_t>(t)] > lp[static_cast<std::size_t>(best)])
        best = t;
    }
    prefix.push_back(best);
    if (best == eos) break;
  }
  return prefix;
}

Outcome crit8_beam() {
  const int eos = 1;
  p3lm::BeamConfig cfg;
  cfg.length_penalty = 1.0;
  cfg.min_len = 1;
  cfg.max_len = 4;

  // Concentrated: token 2 dominates, </s> takes over from depth 2, so the
  // greedy path [2,2,</s>] is also the global optimum.
  TableScorer conc;
  conc.fn = [](const std::vector<int>& prefix) {
    if (prefix.size() >= 2) return to_logs({0.02, 0.7, 0.25, 0.03});
    return to_logs({0.02, 0.05, 0.9, 0.03});
  };

  // Garden path: token 2 wins the first step (0.45 > 0.40) but leads to a
  // diffuse continuation; token 3 leads to an immediate high-probability
  // </s>, so [3,</s>] is the global optimum and greedy misses it.
  TableScorer garden;
  garden.fn = [](const std::vector<int>& prefix) {
    if (prefix.empty()) return to_logs({0.10, 0.05, 0.45, 0.40});
    if (prefix[0] == 3) return to_logs({0.04, 0.90, 0.03, 0.03});
    return to_logs({0.25, 0.25, 0.25, 0.25});
  };

  auto oracle_for = [&](const TableScorer& sc, int top) {
    return p3lm::oracle::enumerate_best(sc.fn, sc.V, eos, cfg.min_len, cfg.max_len,
                                        cfg.length_penalty, top);
  };
  auto lists_equal = [](const std::vector<p3lm::Hypothesis>& got,
                        const std::vector<p3lm::oracle::EnumerationResult>& want) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].tokens != want[i].tokens) return false;
      if (std::abs(got[i].logprob - want[i].logprob) > 1e-12) return false;
      if (std::abs(got[i].score - want[i].score) > 1e-12) return false;
    }
    return true;
  };

  std::string log;
  bool pass = true;

  // Concentrated table: list equality at widths 1..3.
  for (int width = 1; width <= 3; ++width) {
    p3lm::BeamConfig c = cfg;
    c.beam = width;
    const auto got = p3lm::beam_search_core(conc, c, eos);
    const bool ok = lists_equal(got, oracle_for(conc, width));
    pass = pass && ok;
    log += fmt("concentrated width %d: list == oracle top-%d: %s\n", width, width,
               ok ? "yes" : "NO");
  }

  // Garden path: width 1 equals the independent greedy loop and (by design)
  // misses the optimum; widths 2..3 must find it.
  {
    p3lm::BeamConfig c = cfg;
    c.beam = 1;
    const auto got = p3lm::beam_search_core(garden, c, eos);
    const std::vector<int> greedy = reference_greedy(garden, cfg, eos);
    const auto best = oracle_for(garden, 1);
    const bool same_as_greedy = got.size() == 1 && got[0].tokens == greedy;
    const bool misses = got[0].tokens != best[0].tokens;
    pass = pass && same_as_greedy && misses;
    log += fmt("garden width 1: == greedy walk: %s; misses oracle optimum (expected): %s\n",
               same_as_greedy ? "yes" : "NO", misses ? "yes" : "NO");
  }
  for (int width = 2; width <= 3; ++width) {
    p3lm::BeamConfig c = cfg;
    c.beam = width;
    const auto got = p3lm::beam_search_core(garden, c, eos);
    const auto best = oracle_for(garden, 1);
    const bool ok = !got.empty() && got[0].tokens == best[0].tokens &&
                    std::abs(got[0].logprob - best[0].logprob) <= 1e-12;
    pass = pass && ok;
    log += fmt("garden width %d: best == oracle optimum: %s\n", width, ok ? "yes" : "NO");
  }

  // Exhaustive width: every candidate survives, so the full ranking must
  // match the oracle's complete list on both tables.
  for (const auto* named : {&conc, &garden}) {
    p3lm::BeamConfig c = cfg;
    c.beam = 128;
    const auto got = p3lm::beam_search_core(*named, c, eos);
    const auto want = oracle_for(*named, static_cast<int>(got.size()));
    const bool ok = lists_equal(got, want);
    pass = pass && ok;
    log += fmt("%s width 128 (exhaustive): full list == oracle: %s\n",
               named == &conc ? "concentrated" : "garden", ok ? "yes" : "NO");
  }

  // Width-1 greedy identity on the concentrated table as well.
  {
    p3lm::BeamConfig c = cfg;
    c.beam = 1;
    const auto got = p3lm::beam_search_core(conc, c, eos);
    const std::vector<int> greedy = reference_greedy(conc, cfg, eos);
    const bool ok = got.size() == 1 && got[0].tokens == greedy;
    pass = pass && ok;
    log += fmt("concentrated width 1: == greedy walk: %s\n", ok ? "yes" : "NO");
  }

  Outcome o;
  o.pass = pass;
  o.detail = fmt(
      "hand-scored toys V=4 max_len=4: widths 1..3 match enumeration oracle, width 1 == "
      "greedy, width 128 reproduces the full ranking: %s",
      pass ? "all checks hold" : "MISMATCH (see log)");
  o.log = log + o.detail + "\n";
  return o;
}

// ---- criterion 9 (observational): branch loss split on infill data ----------
// Train on synthetic infill data under the alpha=0.5 mixture and report the
// per-epoch token-weighted loss of orders drawn from each branch. The
// direction of the final-epoch comparison is reported, never asserted.

Outcome crit9_loss_split(std::uint64_t seed) {
  p3lm::RngStream gen = p3lm::RngStream(seed).derive("infill-split");
  const p3lm::Dataset data = p3lm::gen_synthetic(p3lm::SynthTask::kInfill, 27, 6, 12, 4000, gen);

  p3lm::ModelConfig mc;
  mc.layers = 1;
  mc.hidden = 32;
  mc.ffn = 64;
  mc.heads = 2;
  mc.vocab = 32;
  mc.streams = 2;
  mc.max_positions = 32;
  p3lm::Model model = p3lm::Model::init(mc, seed);

  p3lm::TrainingConfig tc;
  tc.lr = 3e-3;
  tc.warmup = 50;
  tc.batch_size = 16;
  tc.epochs = 4;
  tc.alpha = 0.5;
  tc.order_dist = p3lm::OrderKind::kAlpha;
  tc.orders_per_instance = 1;
  tc.seed = seed;

  const p3lm::TrainResult res = p3lm::train(model, data, tc, "");
  const p3lm::LossSplit split = p3lm::loss_split(res);

  std::string log;
  std::map<int, std::pair<double, double>> by_epoch;  // epoch -> (l2r, urp)
  for (std::size_t i = 0; i < split.l2r.epoch.size(); ++i)
    by_epoch[split.l2r.epoch[i]].first = split.l2r.value[i];
  for (std::size_t i = 0; i < split.urp.epoch.size(); ++i)
    by_epoch[split.urp.epoch[i]].second = split.urp.value[i];
  for (const auto& [epoch, v] : by_epoch)
    log += fmt("epoch %d: loss_l2r=%.4f loss_urp=%.4f\n", epoch, v.first, v.second);

  Outcome o;
  o.pass = true;  // observational
  if (by_epoch.empty()) {
    o.detail = "no epochs recorded";
    o.pass = false;
  } else {
    const auto& [epoch, v] = *by_epoch.rbegin();
    o.detail = fmt(
        "infill corpus, alpha=0.5, final epoch %d: loss_l2r=%.4f loss_urp=%.4f -> "
        "loss_urp %s loss_l2r (observational, not gated)",
        epoch, v.first, v.second, v.second < v.first ? "<" : ">=");
  }
  o.log = log + o.detail + "\n";
  return o;
}

// ---- harness -----------------------------------------------------------------

struct SuiteRun {
  std::vector<Outcome> outcomes;  // criteria 1..8
  std::string joined_log;
};

SuiteRun run_criteria_1_to_8(std::uint64_t seed) {
  SuiteRun run;
  run.outcomes.push_back(crit1_masks());
  run.outcomes.push_back(crit2_leakage(seed));
  run.outcomes.push_back(crit3_vanilla(seed));
  run.outcomes.push_back(crit4_gradients(seed));
  run.outcomes.push_back(crit5_sampler(seed));
  run.outcomes.push_back(crit6_spans(seed));
  run.outcomes.push_back(crit7_copy(seed));
  run.outcomes.push_back(crit8_beam());
  for (std::size_t i = 0; i < run.outcomes.size(); ++i)
    run.joined_log += fmt("[criterion %zu]\n", i + 1) + run.outcomes[i].log;
  return run;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  std::printf("acceptance gate: seed=%llu\n", static_cast<unsigned long long>(kSeed));
  std::fflush(stdout);

  const auto t_suite = std::chrono::steady_clock::now();
  SuiteRun first = run_criteria_1_to_8(kSeed);
  const double suite_secs = seconds_since(t_suite);

  int failed = 0;
  for (std::size_t i = 0; i < first.outcomes.size(); ++i) {
    const Outcome& o = first.outcomes[i];
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", i + 1, o.detail.c_str());
    std::fflush(stdout);
  }

  const auto t9 = std::chrono::steady_clock::now();
  Outcome nine = crit9_loss_split(kSeed);
  std::printf("%s criterion 9: %s [%.1fs]\n", nine.pass ? "REPORT" : "FAIL",
              nine.detail.c_str(), seconds_since(t9));
  if (!nine.pass) ++failed;  // only fails if the run produced no data at all
  std::fflush(stdout);

  // Criterion 10: rerun criteria 1-8 with the same seed; the accumulated logs
  // must be byte-identical.
  const auto t10 = std::chrono::steady_clock::now();
  SuiteRun second = run_criteria_1_to_8(kSeed);
  Outcome ten;
  ten.pass = first.joined_log == second.joined_log;
  if (ten.pass) {
    ten.detail = fmt("criteria 1-8 rerun with seed %llu: logs byte-identical (%zu bytes)",
                     static_cast<unsigned long long>(kSeed), first.joined_log.size());
  } else {
    std::size_t d = 0;
    while (d < first.joined_log.size() && d < second.joined_log.size() &&
           first.joined_log[d] == second.joined_log[d])
      ++d;
    ten.detail = fmt("logs diverge at byte %zu of %zu/%zu", d, first.joined_log.size(),
                     second.joined_log.size());
  }
  if (!ten.pass) ++failed;
  std::printf("%s criterion 10: %s [%.1fs]\n", ten.pass ? "PASS" : "FAIL", ten.detail.c_str(),
              seconds_since(t10));

  std::printf("acceptance gate: %d of 10 criteria failed (criteria 1-8 first pass: %.1fs)\n",
              failed, suite_secs);
  return failed == 0 ? 0 : 1;
}
