#include "p3lm/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

#include "p3lm/model.hpp"
#include "p3lm/oracles.hpp"
#include "p3lm/order.hpp"
#include "p3lm/rng.hpp"
#include "p3lm/tokens.hpp"

namespace p3lm {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Runs the body and converts any thrown error into a failed result.
template <typename Fn>
CheckResult guarded(const std::string& name, Fn&& body) {
  CheckResult r;
  r.name = name;
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

std::vector<int> random_regular_tokens(int len, int vocab, RngStream& rng) {
  std::vector<int> out(static_cast<std::size_t>(len));
  const auto regular = static_cast<std::uint64_t>(vocab - tokens::kNumSpecials);
  for (auto& t : out) t = tokens::kNumSpecials + static_cast<int>(rng.below(regular));
  return out;
}

ModelConfig probe_config(int streams) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.ffn = 32;
  cfg.heads = 2;
  cfg.vocab = 13;
  cfg.streams = streams;
  cfg.max_positions = 16;
  return cfg;
}

template <typename T>
ArrayT<T> stream_logits(const ModelT<T>& m, const std::vector<int>& src,
                        const std::vector<int>& tgt, const DecodeOrder& order,
                        const RelativeOrderMasks& masks, int n) {
  TapeT<T> tape(const_cast<ParamStoreT<T>*>(&m.params));
  auto enc = encode(tape, m, src);
  auto out = decoder_forward(tape, m, enc, tgt, order, masks);
  return out.stream_logits[static_cast<std::size_t>(n - 1)].val();
}

}  // namespace

CheckResult check_masks() {
  return guarded("mask-oracle", [](CheckResult& r) {
    const int streams = 2;
    long orders = 0, mismatches = 0;
    for (int T = 1; T <= 5; ++T) {
      std::vector<int> perm(static_cast<std::size_t>(T));
      for (int i = 0; i < T; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
      do {
        DecodeOrder o;
        o.positions = perm;
        o.branch = OrderBranch::kURP;
        RelativeOrderMasks m = build_masks(o, streams);
        bool ok = m.main.v == oracle::main_mask(perm).v;
        const auto oq = oracle::query_masks(perm, streams);
        ok = ok && m.query.size() == oq.size();
        for (std::size_t n = 0; ok && n < oq.size(); ++n) ok = m.query[n].v == oq[n].v;
        ++orders;
        if (!ok) ++mismatches;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    r.pass = mismatches == 0;
    r.detail = std::to_string(orders) + " orders x " + std::to_string(streams) +
               " streams, " + std::to_string(mismatches) + " mismatches";
  });
}

CheckResult check_leakage(int probes, std::uint64_t seed) {
  return guarded("leakage", [=](CheckResult& r) {
    Model m = Model::init(probe_config(2), 41);
    RngStream root = RngStream(seed).derive("leakage");
    long leaks = 0;
    for (int probe = 0; probe < probes; ++probe) {
      RngStream rng = root.derive(static_cast<std::uint64_t>(probe));
      const int T = 1 + static_cast<int>(rng.below(5));
      const std::vector<int> src = random_regular_tokens(1 + static_cast<int>(rng.below(4)),
                                                         m.cfg.vocab, rng);
      std::vector<int> tgt = random_regular_tokens(T, m.cfg.vocab, rng);
      const DecodeOrder o = sample_order(OrderKind::kURP, T, 0.5, rng);
      const RelativeOrderMasks masks = build_masks(o, m.cfg.streams);
      const std::vector<int> inv = step_index(o);
      const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m.cfg.streams)));
      const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));

      // every step hides at least one position from stream n (t - n < T)
      std::vector<int> hidden;
      for (int p = 1; p <= T; ++p)
        if (inv[static_cast<std::size_t>(p - 1)] > t - n) hidden.push_back(p);
      const int p = hidden[rng.below(hidden.size())];

      ArrayT<float> base = stream_logits(m, src, tgt, o, masks, n);
      int& cell = tgt[static_cast<std::size_t>(p - 1)];
      cell = cell == tokens::kNumSpecials ? tokens::kNumSpecials + 1 : tokens::kNumSpecials;
      ArrayT<float> mutated = stream_logits(m, src, tgt, o, masks, n);
      if (std::memcmp(&base.at(t - 1, 0), &mutated.at(t - 1, 0),
                      sizeof(float) * static_cast<std::size_t>(base.cols())) != 0)
        ++leaks;
    }
    r.pass = leaks == 0;
    r.detail = std::to_string(probes) + " probes, " + std::to_string(leaks) +
               " leaked (logit deltas must be exactly zero)";
  });
}

CheckResult check_vanilla(int configs, std::uint64_t seed, double tolerance) {
  return guarded("vanilla-equivalence", [=](CheckResult& r) {
    RngStream root = RngStream(seed).derive("vanilla");
    double worst = 0.0;
    for (int c = 0; c < configs; ++c) {
      RngStream rng = root.derive(static_cast<std::uint64_t>(c));
      ModelConfig cfg;
      cfg.layers = 1 + static_cast<int>(rng.below(2));
      cfg.heads = 1 << rng.below(3);  // 1, 2, or 4
      cfg.hidden = cfg.heads * (4 + static_cast<int>(rng.below(3)) * 2);
      cfg.ffn = cfg.hidden * 2;
      cfg.vocab = 9 + static_cast<int>(rng.below(8));
      cfg.streams = 1 + static_cast<int>(rng.below(3));
      cfg.max_positions = 12;
      Model m = Model::init(cfg, rng.derive("init").next_u64());

      const int S = 2 + static_cast<int>(rng.below(3));
      const int T = 1 + static_cast<int>(rng.below(5));
      std::vector<int> src = random_regular_tokens(S, cfg.vocab, rng);
      src.push_back(tokens::kEos);
      const std::vector<int> tgt = random_regular_tokens(T, cfg.vocab, rng);
      const DecodeOrder o = DecodeOrder::identity(T);

      TapeT<float> tape(&m.params);
      auto enc = encode(tape, m, src);
      auto out = decoder_forward(tape, m, enc, tgt, o, build_masks(o, cfg.streams));
      VarT<float> nll = nll_rows(out.stream_logits[0], tgt);

      ModelT<double> md = m.cast<double>();
      const std::vector<double> want = oracle::vanilla_nll(md.cfg, md.params, src, tgt);
      for (int t = 0; t < T; ++t)
        worst = std::max(worst, std::abs(static_cast<double>(nll.val()[t]) - want[static_cast<std::size_t>(t)]));
    }
    r.pass = worst <= tolerance;
    r.detail = std::to_string(configs) + " configs, max per-token nll diff " + fmt(worst) +
               " (tolerance " + fmt(tolerance) + ")";
  });
}

CheckResult check_gradients(std::uint64_t seed, double tolerance) {
  return guarded("gradient-check", [=](CheckResult& r) {
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.ffn = 12;
    cfg.heads = 2;
    cfg.vocab = 9;
    cfg.streams = 2;
    cfg.max_positions = 10;
    ModelT<double> m = Model::init(cfg, 5).cast<double>();
    RngStream rng = RngStream(seed).derive("gradcheck");
    const std::vector<int> src = {6, 7, 8, tokens::kEos};
    const std::vector<int> tgt = {7, 5, 8};
    DecodeOrder o;
    o.positions = {2, 3, 1};
    o.branch = OrderBranch::kURP;
    const RelativeOrderMasks masks = build_masks(o, cfg.streams);

    auto rep = grad_check(
        m.params,
        [&](TapeT<double>& t) {
          auto enc = encode(t, m, src);
          auto out = decoder_forward(t, m, enc, tgt, o, masks);
          VarT<double> s1 = sum_all(nll_rows(out.stream_logits[0], {7, 8, 5}));
          VarT<double> s2 = sum_all(nll_rows(out.stream_logits[1], {7, 8, 5}));
          return scale(add(s1, s2), 0.5);
        },
        1e-5, 5, rng);
    r.pass = rep.max_rel_err < tolerance;
    r.detail = std::to_string(rep.coords_checked) + " coords, max rel err " +
               fmt(rep.max_rel_err) + " (tolerance " + fmt(tolerance) + ")";
  });
}

CheckResult check_sampler(std::uint64_t seed) {
  return guarded("sampler-statistics", [=](CheckResult& r) {
    const int draws = 60000;
    RngStream rng = RngStream(seed).derive("sampler");
    std::map<std::vector<int>, int> counts;
    for (int i = 0; i < draws; ++i)
      counts[sample_order(OrderKind::kURP, 3, 0.5, rng).positions]++;
    double chi2 = 0.0;
    const double expected = draws / 6.0;
    for (const auto& [perm, c] : counts) {
      const double d = c - expected;
      chi2 += d * d / expected;
    }
    const bool all_seen = counts.size() == 6;

    RngStream rng2 = RngStream(seed).derive("mixture");
    int identity = 0;
    for (int i = 0; i < draws; ++i)
      if (sample_order(OrderKind::kAlpha, 3, 0.5, rng2).is_identity()) ++identity;
    const double freq = static_cast<double>(identity) / draws;
    const double expect_freq = 0.5 + 0.5 / 6.0;

    // chi-square critical value for df=5 at significance 0.001
    r.pass = all_seen && chi2 < 20.515 && std::abs(freq - expect_freq) < 0.01;
    r.detail = "chi2(df=5) " + fmt(chi2) + " (< 20.515), identity freq " + fmt(freq) +
               " (expect " + fmt(expect_freq) + " +- 0.01)";
  });
}

std::vector<CheckResult> run_all_selfchecks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_masks());
  out.push_back(check_leakage(200, seed));
  out.push_back(check_vanilla(10, seed));
  out.push_back(check_gradients(seed));
  out.push_back(check_sampler(seed));
  return out;
}

std::string format_selfcheck_report(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  int failed = 0;
  for (const auto& r : results) {
    out << (r.pass ? "PASS" : "FAIL") << " " << r.name << ": " << r.detail << "\n";
    if (!r.pass) ++failed;
  }
  out << (failed == 0 ? "selfcheck: all suites passed"
                      : "selfcheck: " + std::to_string(failed) + " suite(s) failed")
      << " (" << results.size() << " total)\n";
  return out.str();
}

}  // namespace p3lm
