#include "p3lm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "p3lm/errors.hpp"

namespace p3lm {

namespace {

const char* kSpecialNames[tokens::kNumSpecials] = {"<s>", "</s>", "[M]", "<pad>", "<unk>"};

}  // namespace

Vocabulary Vocabulary::from_regular(std::vector<std::string> regular) {
  Vocabulary v;
  v.items_.reserve(regular.size() + tokens::kNumSpecials);
  for (const char* s : kSpecialNames) v.items_.push_back(s);
  for (auto& tok : regular) {
    if (tok.empty()) throw DataError("vocabulary: empty token");
    for (const char* s : kSpecialNames) {
      if (tok == s) throw DataError("vocabulary: token collides with special: " + tok);
    }
    v.items_.push_back(std::move(tok));
  }
  v.build_index();
  return v;
}

Vocabulary Vocabulary::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("vocabulary: cannot open " + path);
  std::vector<std::string> regular;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError("vocabulary: blank line in " + path);
    regular.push_back(line);
  }
  if (regular.empty()) throw DataError("vocabulary: no tokens in " + path);
  return from_regular(std::move(regular));
}

Vocabulary Vocabulary::synthetic(int regular_count) {
  if (regular_count < 1) throw ConfigError("vocabulary: regular_count must be >= 1");
  std::vector<std::string> regular;
  regular.reserve(static_cast<std::size_t>(regular_count));
  for (int i = 0; i < regular_count; ++i) regular.push_back("tok_" + std::to_string(i));
  return from_regular(std::move(regular));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("vocabulary: cannot write " + path);
  for (int i = tokens::kNumSpecials; i < size(); ++i) out << items_[static_cast<std::size_t>(i)] << '\n';
  if (!out) throw DataError("vocabulary: write failed for " + path);
}

void Vocabulary::build_index() {
  for (std::size_t i = tokens::kNumSpecials; i < items_.size(); ++i) {
    for (std::size_t j = i + 1; j < items_.size(); ++j) {
      if (items_[i] == items_[j]) throw DataError("vocabulary: duplicate token: " + items_[i]);
    }
  }
  sorted_ids_.resize(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) sorted_ids_[i] = static_cast<int>(i);
  std::sort(sorted_ids_.begin(), sorted_ids_.end(),
            [this](int a, int b) { return items_[static_cast<std::size_t>(a)] < items_[static_cast<std::size_t>(b)]; });
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary: id out of range: " + std::to_string(id));
  return items_[static_cast<std::size_t>(id)];
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), token,
                             [this](int a, const std::string& t) { return items_[static_cast<std::size_t>(a)] < t; });
  if (it != sorted_ids_.end() && items_[static_cast<std::size_t>(*it)] == token) return *it;
  return tokens::kUnk;
}

std::vector<int> Vocabulary::encode_line(const std::string& line) const {
  std::vector<int> ids;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) ids.push_back(id_or_unk(tok));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids, bool strip_specials) const {
  std::string out;
  for (int id : ids) {
    // structural specials are stripped; [M] and <unk> carry content positions
    if (strip_specials && (id == tokens::kBos || id == tokens::kEos || id == tokens::kPad)) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

void SpanMaskSpec::validate() const {
  if (window < 1) throw ConfigError("span mask: window must be >= 1");
  if (!(mask_frac > 0.0) || mask_frac > 1.0)
    throw ConfigError("span mask: mask_frac must be in (0, 1]");
  int expect = static_cast<int>(std::lround(mask_frac * window));
  if (expect < 1)
    throw ConfigError("span mask: mask_frac * window rounds to zero; nothing would be masked");
  if (span_len != expect)
    throw ConfigError("span mask: span_len " + std::to_string(span_len) + " != round(mask_frac*window) " +
                      std::to_string(expect));
  if (window < span_len) throw ConfigError("span mask: window shorter than span");
  if (replace_mask < 0 || replace_random < 0 || keep < 0)
    throw ConfigError("span mask: replacement fractions must be >= 0");
  double sum = replace_mask + replace_random + keep;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("span mask: replacement fractions must sum to 1");
}

SpanMaskResult apply_span_mask(const std::vector<int>& input_tokens, const SpanMaskSpec& spec,
                               int vocab_size, RngStream& rng) {
  spec.validate();
  if (vocab_size <= tokens::kNumSpecials)
    throw ConfigError("span mask: vocabulary has no regular tokens");
  int n = static_cast<int>(input_tokens.size());
  if (n < spec.window)
    throw DataError("span mask: input shorter than one window (" + std::to_string(n) + " < " +
                    std::to_string(spec.window) + ")");
  int regular = vocab_size - tokens::kNumSpecials;

  SpanMaskResult out;
  out.source = input_tokens;
  int full_windows = n / spec.window;
  for (int w = 0; w < full_windows; ++w) {
    int base = w * spec.window;
    // span start offset within the window, 1-based over valid placements
    std::uint64_t u = 1 + rng.below(static_cast<std::uint64_t>(spec.window - spec.span_len + 1));
    int start = base + static_cast<int>(u) - 1;
    out.spans.emplace_back(start, spec.span_len);
    for (int i = start; i < start + spec.span_len; ++i) {
      out.target.push_back(input_tokens[static_cast<std::size_t>(i)]);
      double d = rng.next_double();
      if (d < spec.replace_mask) {
        out.source[static_cast<std::size_t>(i)] = tokens::kMask;
      } else if (d < spec.replace_mask + spec.replace_random) {
        out.source[static_cast<std::size_t>(i)] =
            tokens::kNumSpecials + static_cast<int>(rng.below(static_cast<std::uint64_t>(regular)));
      }
      // else keep the original token
    }
  }
  return out;
}

SynthTask synth_task_from_string(const std::string& s) {
  if (s == "copy") return SynthTask::kCopy;
  if (s == "reverse") return SynthTask::kReverse;
  if (s == "infill") return SynthTask::kInfill;
  throw ConfigError("unknown task: " + s + " (expected copy|reverse|infill)");
}

std::string to_string(SynthTask t) {
  switch (t) {
    case SynthTask::kCopy: return "copy";
    case SynthTask::kReverse: return "reverse";
    case SynthTask::kInfill: return "infill";
  }
  throw ConfigError("invalid task value");
}

Dataset gen_synthetic(SynthTask task, int regular_vocab, int len_min, int len_max, int count,
                      RngStream& rng) {
  if (regular_vocab < 8) throw ConfigError("synthetic data: need at least 8 regular tokens");
  if (len_min < 1 || len_max < len_min) throw ConfigError("synthetic data: bad length range");
  if (count < 1) throw ConfigError("synthetic data: count must be >= 1");

  Dataset data;
  data.instances.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int len = len_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(len_max - len_min + 1)));
    std::vector<int> seq(static_cast<std::size_t>(len));
    for (auto& t : seq)
      t = tokens::kNumSpecials + static_cast<int>(rng.below(static_cast<std::uint64_t>(regular_vocab)));
    Instance inst;
    switch (task) {
      case SynthTask::kCopy:
        inst.source = seq;
        inst.target = seq;
        break;
      case SynthTask::kReverse:
        inst.source = seq;
        inst.target.assign(seq.rbegin(), seq.rend());
        break;
      case SynthTask::kInfill: {
        int max_gap = std::max(1, len / 2);
        int gap = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_gap)));
        int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(len - gap + 1)));
        inst.source.assign(seq.begin(), seq.begin() + start);
        inst.source.push_back(tokens::kMask);
        inst.source.insert(inst.source.end(), seq.begin() + start + gap, seq.end());
        inst.target.assign(seq.begin() + start, seq.begin() + start + gap);
        break;
      }
    }
    data.instances.push_back(std::move(inst));
  }
  return data;
}

void write_dataset_manifest(const std::string& path, SynthTask task, std::uint64_t seed,
                            int count, int regular_vocab, int len_min, int len_max) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("dataset manifest: cannot write " + path);
  out << "format_version=1\n";
  out << "task=" << to_string(task) << '\n';
  out << "seed=" << seed << '\n';
  out << "count=" << count << '\n';
  out << "regular_vocab=" << regular_vocab << '\n';
  out << "len_min=" << len_min << '\n';
  out << "len_max=" << len_max << '\n';
  if (!out) throw DataError("dataset manifest: write failed for " + path);
}

std::vector<int> Batch::source_of(int i) const {
  if (i < 0 || i >= size) throw ShapeError("batch: instance index out of range");
  std::vector<int> out;
  for (int c = 0; c < max_source; ++c) {
    if (!source_valid[static_cast<std::size_t>(i * max_source + c)]) break;
    out.push_back(source_ids[static_cast<std::size_t>(i * max_source + c)]);
  }
  return out;
}

std::vector<int> Batch::target_of(int i) const {
  if (i < 0 || i >= size) throw ShapeError("batch: instance index out of range");
  int len = target_len[static_cast<std::size_t>(i)];
  std::vector<int> out(static_cast<std::size_t>(len));
  for (int c = 0; c < len; ++c) out[static_cast<std::size_t>(c)] = target_ids[static_cast<std::size_t>(i * max_target + c)];
  return out;
}

void Batch::validate() const {
  if (size < 1) throw ShapeError("batch: empty");
  if (static_cast<int>(source_ids.size()) != size * max_source ||
      source_ids.size() != source_valid.size())
    throw ShapeError("batch: source buffer shape mismatch");
  if (static_cast<int>(target_ids.size()) != size * max_target)
    throw ShapeError("batch: target buffer shape mismatch");
  if (static_cast<int>(target_len.size()) != size || static_cast<int>(orders.size()) != size)
    throw ShapeError("batch: per-instance field count mismatch");
  for (int i = 0; i < size; ++i) {
    bool seen_pad = false;
    bool any_valid = false;
    for (int c = 0; c < max_source; ++c) {
      bool valid = source_valid[static_cast<std::size_t>(i * max_source + c)] != 0;
      int id = source_ids[static_cast<std::size_t>(i * max_source + c)];
      if (valid && seen_pad) throw ShapeError("batch: interior padding in source row");
      if (!valid && id != tokens::kPad) throw ShapeError("batch: pad slot holds non-pad id");
      seen_pad = seen_pad || !valid;
      any_valid = any_valid || valid;
    }
    if (!any_valid) throw ShapeError("batch: source row fully padded");
    int tl = target_len[static_cast<std::size_t>(i)];
    if (tl < 0 || tl > max_target) throw ShapeError("batch: target length out of range");
    for (int c = tl; c < max_target; ++c) {
      if (target_ids[static_cast<std::size_t>(i * max_target + c)] != tokens::kPad)
        throw ShapeError("batch: target pad slot holds non-pad id");
    }
    for (const auto& ord : orders[static_cast<std::size_t>(i)]) {
      if (static_cast<int>(ord.positions.size()) != tl)
        throw ShapeError("batch: order length does not match target length");
    }
  }
}

std::vector<Batch> make_batches(const Dataset& data, int batch_size, OrderKind dist, double alpha,
                                int orders_per_instance, RngStream& rng) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
  if (orders_per_instance < 1) throw ConfigError("make_batches: orders_per_instance must be >= 1");
  std::vector<Batch> out;
  std::size_t n = data.instances.size();
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
    Batch b;
    b.size = static_cast<int>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const Instance& inst = data.instances[i];
      if (inst.source.empty()) throw DataError("make_batches: instance " + std::to_string(i) + " has empty source");
      b.max_source = std::max(b.max_source, static_cast<int>(inst.source.size()) + 1);
      if (!inst.target.empty())
        b.max_target = std::max(b.max_target, static_cast<int>(inst.target.size()) + 1);
    }
    b.source_ids.assign(static_cast<std::size_t>(b.size * b.max_source), tokens::kPad);
    b.source_valid.assign(static_cast<std::size_t>(b.size * b.max_source), 0);
    b.target_ids.assign(static_cast<std::size_t>(b.size * b.max_target), tokens::kPad);
    b.target_len.resize(static_cast<std::size_t>(b.size));
    b.orders.resize(static_cast<std::size_t>(b.size));
    for (std::size_t i = begin; i < end; ++i) {
      const Instance& inst = data.instances[i];
      int row = static_cast<int>(i - begin);
      std::vector<int> src = inst.source;
      src.push_back(tokens::kEos);
      for (std::size_t c = 0; c < src.size(); ++c) {
        b.source_ids[static_cast<std::size_t>(row * b.max_source) + c] = src[c];
        b.source_valid[static_cast<std::size_t>(row * b.max_source) + c] = 1;
      }
      std::vector<int> tgt = inst.target;
      if (!inst.target.empty()) tgt.push_back(tokens::kEos);
      b.target_len[static_cast<std::size_t>(row)] = static_cast<int>(tgt.size());
      for (std::size_t c = 0; c < tgt.size(); ++c)
        b.target_ids[static_cast<std::size_t>(row * b.max_target) + c] = tgt[c];
      if (!tgt.empty()) {
        auto& ords = b.orders[static_cast<std::size_t>(row)];
        ords.reserve(static_cast<std::size_t>(orders_per_instance));
        for (int r = 0; r < orders_per_instance; ++r)
          ords.push_back(sample_order(dist, static_cast<int>(tgt.size()), alpha, rng));
      }
    }
    b.validate();
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace p3lm
