#pragma once

#include <vector>

#include "song/mat.hpp"

namespace song {

// One strict alignment unit: a source token span matched to a target token
// span, 1-based inclusive on both sides. At least one side has length 1
// (one-to-many or many-to-one).
struct SpanPair {
    int src_lo = 0, src_hi = 0;
    int tgt_lo = 0, tgt_hi = 0;

    bool operator==(const SpanPair&) const = default;
    int src_len() const { return src_hi - src_lo + 1; }
    int tgt_len() const { return tgt_hi - tgt_lo + 1; }
};

// Ordered pairs tiling [1..N] x [1..M] monotonically with no crossings.
struct Alignment {
    std::vector<SpanPair> pairs;
    bool operator==(const Alignment&) const = default;
};

struct DpAlignResult {
    Alignment alignment;
    double score = 0.0;
};

// Score of one pair under the DP objective: a one-target pair contributes the
// attention summed over its source span; a one-source pair contributes the
// column averaged over its target span.
double pair_score(const Mat& attention, const SpanPair& pair);
double alignment_score(const Mat& attention, const Alignment& alignment);

// Exact alignment by dynamic programming over all monotone one-to-many /
// many-to-one tilings of the attention matrix (targets in rows, sources in
// columns). Ties take the later-evaluated candidate: within a case the
// largest split point, and the many-to-one case over the one-to-many case.
DpAlignResult dp_align(const Mat& attention);

// Single left-to-right pass baseline: at each step either grows the open
// pair by one source/target token or starts a fresh pair, whichever has the
// locally larger gain; once one side runs out, the leftover tokens of the
// other side attach to its final token.
Alignment greedy_align(const Mat& attention);

// Fraction of source tokens whose aligned-target count matches the
// reference, over all songs.
double alignment_accuracy(const std::vector<Alignment>& predicted,
                          const std::vector<Alignment>& reference);

// Validation helper: true iff pairs tile both sequences in order and every
// pair is one-to-many or many-to-one.
bool is_valid_tiling(const Alignment& alignment, int source_len, int target_len);

}  // namespace song
