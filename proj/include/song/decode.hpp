#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "song/mat.hpp"
#include "song/model.hpp"
#include "song/tokens.hpp"
#include "song/vocab.hpp"

namespace song {

struct GenerateOptions {
    enum class Strategy { Greedy, TopK };
    Strategy strategy = Strategy::Greedy;
    int top_k = 5;
    uint64_t seed = 0;
    // Per-sentence content cap = factor * source sentence content length;
    // reaching it forces a [SEP] at the next token boundary.
    int per_sentence_factor = 2;
    int step_budget = 0;  // 0: derived from the caps
};

struct GenerateResult {
    TokenSeq output;
    // Head-averaged last-layer cross attention, every generated token (rows)
    // against every source token (columns).
    Mat full_attention;
    // Per sentence: content target rows x content source columns, ready for
    // alignment extraction.
    std::vector<Mat> sentence_attention;
};

class GenerationTruncated : public std::runtime_error {
public:
    GenerationTruncated(const std::string& what, TokenSeq partial)
        : std::runtime_error(what), partial_output(std::move(partial)) {}
    TokenSeq partial_output;
};

// Autoregressive generation with the sentence switch driven by [SEP]: the
// decoder attends only to the current source sentence and moves to the next
// one when it emits [SEP], so the output always carries exactly as many
// sentences as the source. Melody outputs additionally obey a pitch/duration
// alternation mask, which keeps them detokenizable.
GenerateResult generate(const Seq2SeqModel& model, const TokenSeq& source, Mode direction,
                        const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                        const GenerateOptions& options = {});

}  // namespace song
