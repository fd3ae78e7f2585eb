#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "p3lm/order.hpp"
#include "p3lm/rng.hpp"
#include "p3lm/tokens.hpp"

namespace p3lm {

// Token table with the five specials at fixed low indices followed by the
// regular tokens in rank order. Vocabulary files list only the regular
// tokens, one per line; the specials are implicit.
class Vocabulary {
 public:
  static Vocabulary from_regular(std::vector<std::string> regular);
  static Vocabulary from_file(const std::string& path);
  // tok_0 .. tok_{n-1}, for synthetic tasks.
  static Vocabulary synthetic(int regular_count);

  void save(const std::string& path) const;

  int size() const { return static_cast<int>(items_.size()); }
  int regular_count() const { return size() - tokens::kNumSpecials; }
  const std::string& token(int id) const;
  int id_or_unk(const std::string& token) const;

  // Encodes a whitespace-tokenized line; unknown tokens map to <unk>.
  std::vector<int> encode_line(const std::string& line) const;
  std::string decode(const std::vector<int>& ids, bool strip_specials = true) const;

 private:
  std::vector<std::string> items_;
  // linear table is fine at desk scale; id lookup uses a sorted index
  std::vector<int> sorted_ids_;
  void build_index();
};

// Span-corruption parameters. span_len is tied to round(mask_frac * window);
// the replacement fractions partition the masked tokens. The default fraction
// is exactly 9/64 so that the canonical 64-token window masks 9 tokens.
struct SpanMaskSpec {
  int window = 64;
  double mask_frac = 9.0 / 64.0;
  int span_len = 9;
  double replace_mask = 0.8;
  double replace_random = 0.1;
  double keep = 0.1;

  void validate() const;
};

struct SpanMaskResult {
  std::vector<int> source;  // corrupted; same length as the input
  std::vector<int> target;  // original masked spans, concatenated in source order
  // absolute (offset, length) of each masked span, one per full window
  std::vector<std::pair<int, int>> spans;
};

// Masks one contiguous span per full window. The input must contain at least
// one full window; a trailing partial window passes through untouched.
SpanMaskResult apply_span_mask(const std::vector<int>& input_tokens, const SpanMaskSpec& spec,
                               int vocab_size, RngStream& rng);

struct Instance {
  std::vector<int> source;
  std::vector<int> target;
};

struct Dataset {
  std::vector<Instance> instances;
};

enum class SynthTask { kCopy, kReverse, kInfill };
SynthTask synth_task_from_string(const std::string& s);
std::string to_string(SynthTask t);

// Random sequences over the regular token range with task-defined targets.
// copy: target = source; reverse: target = reversed source; infill: the
// source carries one [M]-marked gap and the target is the hidden gap content.
Dataset gen_synthetic(SynthTask task, int regular_vocab, int len_min, int len_max, int count,
                      RngStream& rng);

// Key=value manifest describing a generated dataset.
void write_dataset_manifest(const std::string& path, SynthTask task, std::uint64_t seed,
                            int count, int regular_vocab, int len_min, int len_max);

// One padded batch. Instances keep their true lengths; pad slots (id <pad>,
// validity 0) appear only at row tails. Both sequences carry a trailing </s>.
struct Batch {
  int size = 0;
  int max_source = 0;
  int max_target = 0;
  std::vector<int> source_ids;             // size x max_source
  std::vector<std::uint8_t> source_valid;  // size x max_source
  std::vector<int> target_ids;             // size x max_target (may be 0 wide)
  std::vector<int> target_len;
  std::vector<std::vector<DecodeOrder>> orders;  // R per instance; empty target -> none

  std::vector<int> source_of(int i) const;
  std::vector<int> target_of(int i) const;
  void validate() const;
};

// Splits the dataset into consecutive batches (final one may be short),
// appends </s> to both sides, and attaches R freshly sampled orders per
// instance. Deterministic for a given rng state.
std::vector<Batch> make_batches(const Dataset& data, int batch_size, OrderKind dist, double alpha,
                                int orders_per_instance, RngStream& rng);

}  // namespace p3lm
