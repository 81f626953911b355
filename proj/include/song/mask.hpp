#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "song/tokens.hpp"

namespace song {

struct MaskSpan {
    int sentence = 0;
    int lo = 0, hi = 0;  // inclusive flat-sequence positions, never a [SEP]
};

// One masked pre-training sample built from a whole song: the encoder sees
// the song with one contiguous span per sentence replaced by [MASK]; the
// decoder reconstructs the masked tokens in sentence order.
struct MaskedPair {
    std::vector<std::string> encoder_tokens;
    std::vector<int> encoder_sentence_ids;
    std::vector<std::string> target_tokens;   // originals of all masked spans
    std::vector<int> target_positions;        // flat position of each target token
    std::vector<int> target_sentence_ids;
    std::vector<MaskSpan> spans;              // one per sentence
};

// For every sentence, masks a contiguous span of round(ratio * len) tokens
// (at least one) starting at a seeded-uniform offset. [SEP] is never masked.
// Throws on an empty sentence or a ratio outside (0, 1].
MaskedPair mask_song(const TokenSeq& seq, double ratio, uint64_t seed);

}  // namespace song
