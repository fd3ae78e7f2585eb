#include "p3lm/order.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "p3lm/errors.hpp"

namespace p3lm {

OrderKind order_kind_from_string(const std::string& s) {
  if (s == "l2r") return OrderKind::kL2R;
  if (s == "urp") return OrderKind::kURP;
  if (s == "alpha") return OrderKind::kAlpha;
  throw ConfigError("unknown order distribution '" + s + "' (want l2r, urp, or alpha)");
}

std::string to_string(OrderKind k) {
  switch (k) {
    case OrderKind::kL2R: return "l2r";
    case OrderKind::kURP: return "urp";
    case OrderKind::kAlpha: return "alpha";
  }
  return "?";
}

std::string to_string(OrderBranch b) {
  return b == OrderBranch::kL2R ? "l2r" : "urp";
}

bool DecodeOrder::is_identity() const {
  for (int t = 0; t < length(); ++t)
    if (positions[static_cast<std::size_t>(t)] != t + 1) return false;
  return true;
}

void DecodeOrder::validate() const {
  const int T = length();
  if (T < 1) throw ConsistencyError("DecodeOrder: empty order");
  std::vector<char> seen(static_cast<std::size_t>(T), 0);
  for (int p : positions) {
    if (p < 1 || p > T)
      throw ConsistencyError("DecodeOrder: position " + std::to_string(p) +
                             " outside 1.." + std::to_string(T));
    if (seen[static_cast<std::size_t>(p - 1)])
      throw ConsistencyError("DecodeOrder: duplicate position " + std::to_string(p));
    seen[static_cast<std::size_t>(p - 1)] = 1;
  }
}

DecodeOrder DecodeOrder::identity(int target_len) {
  if (target_len < 1) throw ConsistencyError("DecodeOrder: target length must be >= 1");
  DecodeOrder o;
  o.positions.resize(static_cast<std::size_t>(target_len));
  for (int t = 0; t < target_len; ++t) o.positions[static_cast<std::size_t>(t)] = t + 1;
  o.branch = OrderBranch::kL2R;
  return o;
}

namespace {
DecodeOrder uniform_order(int target_len, RngStream& rng) {
  DecodeOrder o;
  std::vector<int> p = rng.permutation(target_len);
  o.positions.resize(static_cast<std::size_t>(target_len));
  for (int t = 0; t < target_len; ++t)
    o.positions[static_cast<std::size_t>(t)] = p[static_cast<std::size_t>(t)] + 1;
  o.branch = OrderBranch::kURP;
  return o;
}
}  // namespace

DecodeOrder sample_order(OrderKind kind, int target_len, double alpha, RngStream& rng) {
  if (target_len < 1) throw ConsistencyError("sample_order: target length must be >= 1");
  switch (kind) {
    case OrderKind::kL2R:
      return DecodeOrder::identity(target_len);
    case OrderKind::kURP:
      return uniform_order(target_len, rng);
    case OrderKind::kAlpha: {
      if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("sample_order: alpha must be in [0, 1]");
      // One branch draw, then (for the uniform branch) the permutation draws.
      if (rng.next_double() < alpha) return DecodeOrder::identity(target_len);
      return uniform_order(target_len, rng);
    }
  }
  throw ConfigError("sample_order: bad kind");
}

std::vector<int> step_index(const DecodeOrder& order) {
  order.validate();
  const int T = order.length();
  std::vector<int> inv(static_cast<std::size_t>(T), 0);
  for (int t = 1; t <= T; ++t)
    inv[static_cast<std::size_t>(order.positions[static_cast<std::size_t>(t - 1)] - 1)] = t;
  return inv;
}

double log_prior(OrderKind kind, double alpha, const DecodeOrder& order) {
  order.validate();
  const int T = order.length();
  const double log_nperm = std::lgamma(static_cast<double>(T) + 1.0);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  switch (kind) {
    case OrderKind::kL2R:
      return order.is_identity() ? 0.0 : neg_inf;
    case OrderKind::kURP:
      return -log_nperm;
    case OrderKind::kAlpha: {
      if (alpha < 0.0 || alpha > 1.0) throw ConfigError("log_prior: alpha must be in [0, 1]");
      const double p_urp = (1.0 - alpha) * std::exp(-log_nperm);
      const double p = order.is_identity() ? alpha + p_urp : p_urp;
      return p > 0.0 ? std::log(p) : neg_inf;
    }
  }
  throw ConfigError("log_prior: bad kind");
}

RelativeOrderMasks build_masks(const DecodeOrder& order, int streams) {
  order.validate();
  if (streams < 1) throw ConsistencyError("build_masks: need at least one prediction stream");
  const int T = order.length();
  const std::vector<int> step_of = step_index(order);  // step_of[p-1] = step of position p

  RelativeOrderMasks m;
  m.target_len = T;
  m.streams = streams;

  // Main stream over slots 0..T; slot 0 is the start token, decoded "before"
  // every step. Row p may see column q when q's content is available no later
  // than p's.
  m.main = MaskMatrix({T + 1, T + 1});
  m.main.at(0, 0) = 1;
  for (int p = 1; p <= T; ++p) {
    m.main.at(p, 0) = 1;
    for (int q = 1; q <= T; ++q)
      m.main.at(p, q) =
          step_of[static_cast<std::size_t>(q - 1)] <= step_of[static_cast<std::size_t>(p - 1)]
              ? 1
              : 0;
  }

  // Stream n at decode step t: start slot, main slots decoded at steps
  // <= t - n, and its own placeholder column (T + t). The gap of n steps is
  // what makes stream n predict n tokens ahead of its visible context.
  m.query.reserve(static_cast<std::size_t>(streams));
  for (int n = 1; n <= streams; ++n) {
    MaskMatrix q({T, 2 * T + 1});
    for (int t = 1; t <= T; ++t) {
      q.at(t - 1, 0) = 1;
      for (int pos = 1; pos <= T; ++pos)
        if (step_of[static_cast<std::size_t>(pos - 1)] <= t - n) q.at(t - 1, pos) = 1;
      q.at(t - 1, T + t) = 1;
    }
    m.query.push_back(std::move(q));
  }
  return m;
}

std::string dump_masks(const DecodeOrder& order, const RelativeOrderMasks& masks) {
  order.validate();
  const int T = masks.target_len;
  if (order.length() != T)
    throw ConsistencyError("dump_masks: order length " + std::to_string(order.length()) +
                           " vs masks for " + std::to_string(T));
  std::ostringstream os;
  os << T << " " << masks.streams << "\n";
  for (int t = 0; t < T; ++t)
    os << (t ? " " : "") << order.positions[static_cast<std::size_t>(t)];
  os << "\n";
  for (std::int64_t r = 0; r < masks.main.rows(); ++r) {
    for (std::int64_t c = 0; c < masks.main.cols(); ++c)
      os << (c ? " " : "") << static_cast<int>(masks.main.at(r, c));
    os << "\n";
  }
  for (const MaskMatrix& q : masks.query) {
    os << "\n";
    for (std::int64_t r = 0; r < q.rows(); ++r) {
      for (std::int64_t c = 0; c < q.cols(); ++c) os << static_cast<int>(q.at(r, c));
      os << "\n";
    }
  }
  return os.str();
}

namespace {
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) throw DataError("mask dump: missing trailing newline");
  return lines;
}
}  // namespace

ParsedMasks parse_masks(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  std::size_t li = 0;
  auto need_line = [&](const char* what) -> const std::string& {
    if (li >= lines.size())
      throw DataError(std::string("mask dump: unexpected end of input, wanted ") + what);
    return lines[li++];
  };

  int T = 0, N = 0;
  {
    std::istringstream is(need_line("header"));
    std::string extra;
    if (!(is >> T >> N) || (is >> extra))
      throw DataError("mask dump: malformed header line");
    if (T < 1 || N < 1) throw DataError("mask dump: header values must be >= 1");
  }

  ParsedMasks out;
  {
    std::istringstream is(need_line("order"));
    out.order.positions.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
      if (!(is >> out.order.positions[static_cast<std::size_t>(t)]))
        throw DataError("mask dump: order line needs " + std::to_string(T) + " entries");
    std::string extra;
    if (is >> extra) throw DataError("mask dump: trailing junk on order line");
    out.order.validate();
  }

  out.masks.target_len = T;
  out.masks.streams = N;
  out.masks.main = MaskMatrix({T + 1, T + 1});
  for (int r = 0; r <= T; ++r) {
    std::istringstream is(need_line("main mask row"));
    for (int c = 0; c <= T; ++c) {
      int b = -1;
      if (!(is >> b) || (b != 0 && b != 1))
        throw DataError("mask dump: main mask row " + std::to_string(r) + " malformed");
      out.masks.main.at(r, c) = static_cast<std::uint8_t>(b);
    }
    std::string extra;
    if (is >> extra) throw DataError("mask dump: trailing junk on main mask row");
  }

  for (int n = 0; n < N; ++n) {
    const std::string& blank = need_line("blank separator");
    if (!blank.empty()) throw DataError("mask dump: expected blank line between blocks");
    MaskMatrix q({T, 2 * T + 1});
    for (int r = 0; r < T; ++r) {
      const std::string& row = need_line("stream mask row");
      if (static_cast<int>(row.size()) != 2 * T + 1)
        throw DataError("mask dump: stream mask row has " + std::to_string(row.size()) +
                        " digits, want " + std::to_string(2 * T + 1));
      for (int c = 0; c < 2 * T + 1; ++c) {
        const char ch = row[static_cast<std::size_t>(c)];
        if (ch != '0' && ch != '1')
          throw DataError("mask dump: stream mask row contains non-binary digit");
        q.at(r, c) = static_cast<std::uint8_t>(ch - '0');
      }
    }
    out.masks.query.push_back(std::move(q));
  }
  if (li != lines.size()) throw DataError("mask dump: trailing lines after last block");

  // Reject dumps whose mask content disagrees with its own shape metadata.
  if (static_cast<int>(out.masks.query.size()) != N)
    throw DataError("mask dump: stream block count mismatch");
  return out;
}

}  // namespace p3lm
