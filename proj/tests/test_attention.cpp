#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "p3lm/attention.hpp"
#include "p3lm/oracles.hpp"

using namespace p3lm;

namespace {

template <typename T>
ArrayT<T> random_array(std::vector<std::int64_t> shape, RngStream& rng, double scl = 1.0) {
  ArrayT<T> a(std::move(shape));
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] = static_cast<T>(rng.next_normal() * scl);
  return a;
}

MaskMatrix random_mask(std::int64_t rows, std::int64_t cols, RngStream& rng) {
  MaskMatrix m({rows, cols});
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) m.at(r, c) = rng.next_double() < 0.5 ? 1 : 0;
    // guarantee at least one visible key per row
    m.at(r, static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(cols)))) = 1;
  }
  return m;
}

std::vector<std::vector<int>> allowed_from_mask(const MaskMatrix& m) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(m.rows()));
  for (std::int64_t r = 0; r < m.rows(); ++r)
    for (std::int64_t c = 0; c < m.cols(); ++c)
      if (m.at(r, c)) out[static_cast<std::size_t>(r)].push_back(static_cast<int>(c));
  return out;
}

}  // namespace

TEST_CASE("attention: matches the structural loop oracle under arbitrary masks") {
  RngStream rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t Rq = 1 + static_cast<std::int64_t>(rng.below(6));
    const std::int64_t Rk = 1 + static_cast<std::int64_t>(rng.below(7));
    const int heads = 1 + static_cast<int>(rng.below(2));
    const std::int64_t D = 4 * heads;
    auto q = random_array<double>({Rq, D}, rng);
    auto kv = random_array<double>({Rk, D}, rng);
    auto wq = random_array<double>({D, D}, rng, 0.3);
    auto wk = random_array<double>({D, D}, rng, 0.3);
    auto wv = random_array<double>({D, D}, rng, 0.3);
    auto wo = random_array<double>({D, D}, rng, 0.3);
    MaskMatrix mask = random_mask(Rq, Rk, rng);

    TapeT<double> tape;
    AttnWeights<double> w{tape.leaf(wq), tape.leaf(wk), tape.leaf(wv), tape.leaf(wo)};
    VarT<double> out = attention(tape.leaf(q), tape.leaf(kv), mask, w, heads, {});

    ArrayT<double> ref =
        oracle::detail::attend_rows(q, kv, allowed_from_mask(mask), wq, wk, wv, wo, heads);
    REQUIRE(out.val().size() == ref.size());
    for (std::int64_t i = 0; i < ref.size(); ++i)
      CHECK(out.val()[i] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("attention: finite-difference gradients through the full block") {
  RngStream rng(12);
  ParamStoreT<double> ps;
  const std::int64_t D = 8;
  ps.add("q", random_array<double>({3, D}, rng));
  ps.add("kv", random_array<double>({5, D}, rng));
  ps.add("wq", random_array<double>({D, D}, rng, 0.3));
  ps.add("wk", random_array<double>({D, D}, rng, 0.3));
  ps.add("wv", random_array<double>({D, D}, rng, 0.3));
  ps.add("wo", random_array<double>({D, D}, rng, 0.3));
  MaskMatrix mask = random_mask(3, 5, rng);
  auto rep = grad_check(
      ps,
      [&](TapeT<double>& t) {
        AttnWeights<double> w{t.param("wq"), t.param("wk"), t.param("wv"), t.param("wo")};
        VarT<double> out = attention(t.param("q"), t.param("kv"), mask, w, 2, {});
        // fold into a scalar through a fixed weighting to exercise all coords
        ArrayT<double> mixv({D, 1});
        for (std::int64_t i = 0; i < D; ++i) mixv[i] = 0.1 * static_cast<double>(i + 1);
        return sum_all(matmul(gelu(out), t.leaf(mixv)));
      },
      1e-5, 96, rng);
  INFO(rep.worst_coord);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("attention: excluded keys receive exactly zero weight end to end") {
  // Bitwise check: perturbing a masked key/value row leaves the output floats
  // identical, not merely close.
  RngStream rng(13);
  const std::int64_t D = 8, Rq = 4, Rk = 6;
  auto q = random_array<float>({Rq, D}, rng);
  auto kv = random_array<float>({Rk, D}, rng);
  auto wq = random_array<float>({D, D}, rng, 0.3);
  auto wk = random_array<float>({D, D}, rng, 0.3);
  auto wv = random_array<float>({D, D}, rng, 0.3);
  auto wo = random_array<float>({D, D}, rng, 0.3);
  MaskMatrix mask({Rq, Rk});
  for (std::int64_t r = 0; r < Rq; ++r)
    for (std::int64_t c = 0; c < Rk; ++c) mask.at(r, c) = c < 3 ? 1 : 0;  // rows 3..5 excluded

  auto run = [&](const ArrayT<float>& kv_in) {
    TapeT<float> tape;
    AttnWeights<float> w{tape.leaf(wq), tape.leaf(wk), tape.leaf(wv), tape.leaf(wo)};
    return attention(tape.leaf(q), tape.leaf(kv_in), mask, w, 2, {}).val();
  };
  ArrayT<float> base = run(kv);
  ArrayT<float> perturbed_kv = kv;
  for (std::int64_t c = 0; c < D; ++c) {
    perturbed_kv.at(3, c) += 17.0f;
    perturbed_kv.at(5, c) = -perturbed_kv.at(5, c);
  }
  ArrayT<float> out = run(perturbed_kv);
  CHECK(std::memcmp(base.v.data(), out.v.data(), sizeof(float) * base.v.size()) == 0);

  // sanity: perturbing an included key row does change the output
  ArrayT<float> visible_kv = kv;
  visible_kv.at(1, 0) += 1.0f;
  ArrayT<float> out2 = run(visible_kv);
  CHECK(std::memcmp(base.v.data(), out2.v.data(), sizeof(float) * base.v.size()) != 0);
}

TEST_CASE("attention: cross-attention ignores padded source slots bit-exactly") {
  RngStream rng(14);
  const std::int64_t D = 8, S = 5, Rq = 3;
  auto q = random_array<float>({Rq, D}, rng);
  auto enc = random_array<float>({S, D}, rng);
  auto wq = random_array<float>({D, D}, rng, 0.3);
  auto wk = random_array<float>({D, D}, rng, 0.3);
  auto wv = random_array<float>({D, D}, rng, 0.3);
  auto wo = random_array<float>({D, D}, rng, 0.3);
  std::vector<std::uint8_t> valid = {1, 1, 1, 0, 0};

  auto run = [&](const ArrayT<float>& enc_in) {
    TapeT<float> tape;
    AttnWeights<float> w{tape.leaf(wq), tape.leaf(wk), tape.leaf(wv), tape.leaf(wo)};
    return cross_attention(tape.leaf(q), tape.leaf(enc_in), valid, w, 2, {}).val();
  };
  ArrayT<float> base = run(enc);
  ArrayT<float> enc2 = enc;
  for (std::int64_t c = 0; c < D; ++c) {
    enc2.at(3, c) = 3.25f;
    enc2.at(4, c) = -9.5f;
  }
  ArrayT<float> out = run(enc2);
  CHECK(std::memcmp(base.v.data(), out.v.data(), sizeof(float) * base.v.size()) == 0);
}

TEST_CASE("attention: validation errors") {
  TapeT<float> tape;
  RngStream rng(15);
  auto q = tape.leaf(random_array<float>({2, 8}, rng));
  auto kv = tape.leaf(random_array<float>({3, 8}, rng));
  auto w8 = [&] { return tape.leaf(random_array<float>({8, 8}, rng)); };
  AttnWeights<float> w{w8(), w8(), w8(), w8()};

  MaskMatrix wrong({2, 2});
  CHECK_THROWS_AS(attention(q, kv, wrong, w, 2, {}), ShapeError);
  MaskMatrix ok({2, 3});
  std::fill(ok.v.begin(), ok.v.end(), std::uint8_t(1));
  CHECK_THROWS_AS(attention(q, kv, ok, w, 3, {}), ShapeError);  // 3 does not divide 8
  ForwardOptions bad;
  bad.train = true;
  bad.attn_dropout = 0.5;
  CHECK_THROWS_AS(attention(q, kv, ok, w, 2, bad), ConfigError);  // dropout without rng

  MaskMatrix empty_row({2, 3});
  empty_row.at(0, 0) = 1;  // row 1 sees nothing
  CHECK_THROWS_AS(attention(q, kv, empty_row, w, 2, {}), MaskError);
}

TEST_CASE("attention: dropout is reproducible and only active in training") {
  RngStream rng(16);
  const std::int64_t D = 8;
  auto q = random_array<float>({3, D}, rng);
  auto kv = random_array<float>({4, D}, rng);
  auto wmat = [&] { return random_array<float>({D, D}, rng, 0.3); };
  auto wq = wmat(), wk = wmat(), wv = wmat(), wo = wmat();
  MaskMatrix mask({3, 4});
  std::fill(mask.v.begin(), mask.v.end(), std::uint8_t(1));

  auto run = [&](ForwardOptions opts) {
    TapeT<float> tape;
    AttnWeights<float> w{tape.leaf(wq), tape.leaf(wk), tape.leaf(wv), tape.leaf(wo)};
    return attention(tape.leaf(q), tape.leaf(kv), mask, w, 2, opts).val();
  };

  RngStream d1(99), d2(99), d3(100);
  ForwardOptions o1{true, 0.3, &d1}, o2{true, 0.3, &d2}, o3{true, 0.3, &d3};
  auto a = run(o1), b = run(o2), c = run(o3);
  CHECK(a.v == b.v);
  CHECK(a.v != c.v);

  // eval mode ignores the dropout setting entirely
  ForwardOptions eval{false, 0.3, &d1};
  auto e1 = run(eval), e2 = run({});
  CHECK(e1.v == e2.v);
}
