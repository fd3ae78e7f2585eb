#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "p3lm/oracles.hpp"
#include "p3lm/order.hpp"

using namespace p3lm;

namespace {
DecodeOrder make_order(std::vector<int> positions) {
  DecodeOrder o;
  o.positions = std::move(positions);
  o.branch = OrderBranch::kURP;
  o.validate();
  return o;
}

int popcount_row(const MaskMatrix& m, std::int64_t r) {
  int n = 0;
  for (std::int64_t c = 0; c < m.cols(); ++c) n += m.at(r, c);
  return n;
}
}  // namespace

TEST_CASE("order: validation rejects non-permutations") {
  CHECK_THROWS_AS(make_order({1, 1, 3}), ConsistencyError);
  CHECK_THROWS_AS(make_order({0, 1, 2}), ConsistencyError);
  CHECK_THROWS_AS(make_order({2, 3, 4}), ConsistencyError);
  CHECK_THROWS_AS(make_order({}), ConsistencyError);
}

TEST_CASE("order: step_index inverts the permutation") {
  DecodeOrder o = make_order({2, 1, 3});
  auto inv = step_index(o);
  CHECK(inv == std::vector<int>{2, 1, 3});
  DecodeOrder o2 = make_order({3, 1, 4, 2});
  auto inv2 = step_index(o2);
  CHECK(inv2 == std::vector<int>{2, 4, 1, 3});
  for (int t = 1; t <= o2.length(); ++t)
    CHECK(inv2[static_cast<std::size_t>(o2.positions[static_cast<std::size_t>(t - 1)] - 1)] == t);
}

TEST_CASE("order: frozen mask dump for a worked example") {
  // Hand-derived: order (2,1,3) with two prediction streams. Step 1 fills
  // position 2, step 2 position 1, step 3 position 3.
  DecodeOrder o = make_order({2, 1, 3});
  RelativeOrderMasks m = build_masks(o, 2);
  const std::string expected =
      "3 2\n"
      "2 1 3\n"
      "1 0 0 0\n"
      "1 1 1 0\n"
      "1 0 1 0\n"
      "1 1 1 1\n"
      "\n"
      "1000100\n"
      "1010010\n"
      "1110001\n"
      "\n"
      "1000100\n"
      "1000010\n"
      "1010001\n";
  CHECK(dump_masks(o, m) == expected);
}

TEST_CASE("order: frozen mask dump for the smallest case") {
  DecodeOrder o = DecodeOrder::identity(1);
  RelativeOrderMasks m = build_masks(o, 1);
  CHECK(dump_masks(o, m) ==
        "1 1\n"
        "1\n"
        "1 0\n"
        "1 1\n"
        "\n"
        "101\n");
}

TEST_CASE("order: masks agree with the prefix-slicing oracle on every small permutation") {
  for (int T = 1; T <= 6; ++T) {
    std::vector<int> perm(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
    do {
      DecodeOrder o = make_order(perm);
      for (int N = 1; N <= 3; ++N) {
        RelativeOrderMasks m = build_masks(o, N);
        MaskMatrix om = oracle::main_mask(perm);
        REQUIRE(m.main.v == om.v);
        auto oq = oracle::query_masks(perm, N);
        REQUIRE(m.query.size() == oq.size());
        for (std::size_t n = 0; n < oq.size(); ++n) REQUIRE(m.query[n].v == oq[n].v);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("order: structural mask invariants") {
  RngStream rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 1 + static_cast<int>(rng.below(9));
    const int N = 1 + static_cast<int>(rng.below(3));
    DecodeOrder o = sample_order(OrderKind::kURP, T, 0.5, rng);
    auto inv = step_index(o);
    RelativeOrderMasks m = build_masks(o, N);

    // Start row sees only itself; every other main row sees the start slot
    // plus one position per elapsed step, itself included.
    CHECK(popcount_row(m.main, 0) == 1);
    CHECK(m.main.at(0, 0) == 1);
    for (int p = 1; p <= T; ++p) {
      CHECK(m.main.at(p, 0) == 1);
      CHECK(m.main.at(p, p) == 1);  // own slot always visible to itself
      CHECK(popcount_row(m.main, p) == inv[static_cast<std::size_t>(p - 1)] + 1);
    }

    for (int n = 1; n <= N; ++n) {
      const MaskMatrix& q = m.query[static_cast<std::size_t>(n - 1)];
      for (int t = 1; t <= T; ++t) {
        CHECK(q.at(t - 1, 0) == 1);
        CHECK(q.at(t - 1, T + t) == 1);
        // placeholder columns other than its own are never visible
        for (int j = 1; j <= T; ++j)
          if (j != t) CHECK(q.at(t - 1, T + j) == 0);
        // no main position from a step later than t-n leaks in
        for (int p = 1; p <= T; ++p)
          if (q.at(t - 1, p)) CHECK(inv[static_cast<std::size_t>(p - 1)] <= t - n);
        CHECK(popcount_row(q, t - 1) == std::max(0, t - n) + 2);
      }
      // deeper streams see strictly no more context than shallower ones
      if (n >= 2) {
        const MaskMatrix& prev = m.query[static_cast<std::size_t>(n - 2)];
        for (int t = 1; t <= T; ++t)
          for (int p = 1; p <= T; ++p)
            if (q.at(t - 1, p)) CHECK(prev.at(t - 1, p) == 1);
      }
    }
  }
}

TEST_CASE("order: build_masks validates inputs") {
  DecodeOrder o = make_order({1, 2});
  CHECK_THROWS_AS(build_masks(o, 0), ConsistencyError);
  DecodeOrder bad;
  bad.positions = {1, 1};
  CHECK_THROWS_AS(build_masks(bad, 1), ConsistencyError);
}

TEST_CASE("order: dump/parse round trip is byte-identical") {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = 1 + static_cast<int>(rng.below(8));
    const int N = 1 + static_cast<int>(rng.below(3));
    DecodeOrder o = sample_order(OrderKind::kURP, T, 0.5, rng);
    std::string text = dump_masks(o, build_masks(o, N));
    ParsedMasks p = parse_masks(text);
    CHECK(p.order.positions == o.positions);
    CHECK(dump_masks(p.order, p.masks) == text);
  }
}

TEST_CASE("order: parser rejects malformed dumps") {
  DecodeOrder o = make_order({2, 1});
  std::string good = dump_masks(o, build_masks(o, 1));
  CHECK_THROWS_AS(parse_masks(good.substr(0, good.size() - 1)), DataError);  // no newline
  CHECK_THROWS_AS(parse_masks("2\n" + good.substr(4)), DataError);          // bad header
  CHECK_THROWS_AS(parse_masks(good + "\n1\n"), DataError);                  // trailing block
  std::string flipped = good;
  flipped[flipped.find("10010")] = '2';  // non-binary digit in a stream row
  CHECK_THROWS_AS(parse_masks(flipped), DataError);
  // truncate one digit from the final stream row
  std::string short_row = good;
  short_row.erase(short_row.size() - 2, 1);
  CHECK_THROWS_AS(parse_masks(short_row), DataError);
}

TEST_CASE("order: sampling branches, determinism, and validity") {
  RngStream a(50), b(50);
  for (int i = 0; i < 40; ++i) {
    DecodeOrder oa = sample_order(OrderKind::kAlpha, 5, 0.5, a);
    DecodeOrder ob = sample_order(OrderKind::kAlpha, 5, 0.5, b);
    CHECK(oa.positions == ob.positions);
    CHECK(oa.branch == ob.branch);
    oa.validate();
    if (oa.branch == OrderBranch::kL2R) CHECK(oa.is_identity());
  }
  RngStream c(51);
  DecodeOrder l2r = sample_order(OrderKind::kL2R, 4, 0.5, c);
  CHECK(l2r.is_identity());
  CHECK(l2r.branch == OrderBranch::kL2R);
  // alpha=1 always takes the left-to-right branch; alpha=0 never does
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_order(OrderKind::kAlpha, 4, 1.0, c).branch == OrderBranch::kL2R);
    CHECK(sample_order(OrderKind::kAlpha, 4, 0.0, c).branch == OrderBranch::kURP);
  }
  CHECK_THROWS_AS(sample_order(OrderKind::kAlpha, 4, 1.5, c), ConfigError);
  CHECK_THROWS_AS(sample_order(OrderKind::kURP, 0, 0.5, c), ConsistencyError);
}

TEST_CASE("order: uniform sampling is uniform (chi-square, T=3)") {
  RngStream rng(1234);
  std::map<std::vector<int>, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i)
    counts[sample_order(OrderKind::kURP, 3, 0.5, rng).positions]++;
  REQUIRE(counts.size() == 6);
  const double expected = draws / 6.0;
  double chi2 = 0.0;
  for (const auto& [perm, c] : counts) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  // df = 5, critical value at significance 0.001
  CHECK(chi2 < 20.515);
}

TEST_CASE("order: mixture identity frequency matches alpha + (1-alpha)/T!") {
  RngStream rng(4321);
  const int draws = 60000;
  int identity = 0;
  for (int i = 0; i < draws; ++i)
    if (sample_order(OrderKind::kAlpha, 3, 0.5, rng).is_identity()) ++identity;
  const double freq = static_cast<double>(identity) / draws;
  // expected 0.58333...; five binomial standard deviations is ~0.01 here
  CHECK(std::abs(freq - (0.5 + 0.5 / 6.0)) < 0.01);
}

TEST_CASE("order: log prior values") {
  DecodeOrder id3 = DecodeOrder::identity(3);
  DecodeOrder other = make_order({2, 1, 3});
  CHECK(log_prior(OrderKind::kL2R, 0.5, id3) == 0.0);
  CHECK(std::isinf(log_prior(OrderKind::kL2R, 0.5, other)));
  CHECK(log_prior(OrderKind::kURP, 0.5, other) == doctest::Approx(-std::log(6.0)));
  CHECK(log_prior(OrderKind::kURP, 0.5, id3) == doctest::Approx(-std::log(6.0)));
  CHECK(log_prior(OrderKind::kAlpha, 0.5, id3) == doctest::Approx(std::log(0.5 + 0.5 / 6.0)));
  CHECK(log_prior(OrderKind::kAlpha, 0.5, other) == doctest::Approx(std::log(0.5 / 6.0)));
  CHECK(log_prior(OrderKind::kAlpha, 1.0, other) == -std::numeric_limits<double>::infinity());
}
