#pragma once

namespace p3lm::tokens {

// Special token ids, fixed at the front of every vocabulary.
inline constexpr int kBos = 0;   // <s>   sequence start / decoder slot 0
inline constexpr int kEos = 1;   // </s>  sequence end
inline constexpr int kMask = 2;  // [M]   span-corruption mask
inline constexpr int kPad = 3;   // <pad> batch filler, never attended
inline constexpr int kUnk = 4;   // <unk> out-of-vocabulary
inline constexpr int kNumSpecials = 5;

}  // namespace p3lm::tokens
