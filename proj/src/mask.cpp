#include "song/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "song/rng.hpp"

namespace song {

MaskedPair mask_song(const TokenSeq& seq, double ratio, uint64_t seed) {
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw std::invalid_argument("mask_song: ratio must be in (0, 1]");
    if (seq.empty() || seq.tokens.back() != tok::kSep)
        throw std::invalid_argument("mask_song: sequence must end with [SEP]");

    Rng rng(seed);
    MaskedPair out;
    out.encoder_tokens = seq.tokens;
    out.encoder_sentence_ids = seq.sentence_ids;

    const int sentences = seq.sentence_count();
    for (int s = 0; s < sentences; ++s) {
        auto [lo, hi] = seq.sentence_content_span(s);
        if (lo < 0)
            throw std::invalid_argument("mask_song: sentence " + std::to_string(s) + " has no tokens");
        int len = hi - lo + 1;
        int span_len = std::clamp(static_cast<int>(std::llround(ratio * len)), 1, len);
        int start = lo + static_cast<int>(rng.uniform_int(0, len - span_len));

        MaskSpan span{s, start, start + span_len - 1};
        for (int i = span.lo; i <= span.hi; ++i) {
            out.target_tokens.push_back(seq.tokens[i]);
            out.target_positions.push_back(i);
            out.target_sentence_ids.push_back(s);
            out.encoder_tokens[i] = tok::kMask;
        }
        out.spans.push_back(span);
    }
    return out;
}

}  // namespace song
