#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "fixtures.hpp"
#include "song/mask.hpp"

using namespace song;

namespace {

TokenSeq seq_of(std::vector<std::string> tokens) { return TokenSeq::from_tokens(std::move(tokens)); }

}  // namespace

TEST_CASE("mask_song masks one span per sentence at the configured ratio") {
    TokenSeq seq = seq_of({"a", "b", "c", "d", "e", "f", "g", "h", "[SEP]"});
    MaskedPair mp = mask_song(seq, 0.5, 42);

    REQUIRE(mp.spans.size() == 1);
    const MaskSpan& span = mp.spans[0];
    CHECK(span.hi - span.lo + 1 == 4);  // round(0.5 * 8)
    CHECK(span.lo >= 0);
    CHECK(span.hi <= 7);
    CHECK(mp.target_tokens.size() == 4);
    for (int i = span.lo; i <= span.hi; ++i) {
        CHECK(mp.encoder_tokens[i] == tok::kMask);
        CHECK(mp.target_tokens[i - span.lo] == seq.tokens[i]);
        CHECK(mp.target_positions[i - span.lo] == i);
    }
    CHECK(mp.encoder_tokens.back() == tok::kSep);
}

TEST_CASE("a one-token sentence is masked entirely") {
    TokenSeq seq = seq_of({"solo", "[SEP]"});
    MaskedPair mp = mask_song(seq, 0.5, 7);
    REQUIRE(mp.target_tokens.size() == 1);
    CHECK(mp.target_tokens[0] == "solo");
    CHECK(mp.encoder_tokens[0] == tok::kMask);
}

TEST_CASE("identical seeds give identical masks, different seeds eventually differ") {
    TokenSeq seq = seq_of({"a", "b", "c", "d", "e", "f", "[SEP]", "g", "h", "i", "j", "[SEP]"});
    MaskedPair a = mask_song(seq, 0.5, 99);
    MaskedPair b = mask_song(seq, 0.5, 99);
    CHECK(a.encoder_tokens == b.encoder_tokens);
    CHECK(a.target_tokens == b.target_tokens);
    REQUIRE(a.spans.size() == b.spans.size());
    for (size_t i = 0; i < a.spans.size(); ++i) {
        CHECK(a.spans[i].lo == b.spans[i].lo);
        CHECK(a.spans[i].hi == b.spans[i].hi);
    }

    bool any_difference = false;
    for (uint64_t seed = 0; seed < 32 && !any_difference; ++seed)
        any_difference = mask_song(seq, 0.5, seed).spans[0].lo != a.spans[0].lo;
    CHECK(any_difference);
}

TEST_CASE("mask invariants over random songs") {
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        // random song: 1-4 sentences of 1-9 tokens
        std::vector<std::string> tokens;
        int sentences = 1 + static_cast<int>(rng.uniform_int(0, 3));
        for (int s = 0; s < sentences; ++s) {
            int len = 1 + static_cast<int>(rng.uniform_int(0, 8));
            for (int i = 0; i < len; ++i) tokens.push_back("w" + std::to_string(i));
            tokens.push_back(tok::kSep);
        }
        TokenSeq seq = seq_of(tokens);
        double ratio = 0.1 + rng.uniform() * 0.9;
        MaskedPair mp = mask_song(seq, ratio, rng.next_u64());

        REQUIRE(static_cast<int>(mp.spans.size()) == sentences);
        size_t target_total = 0;
        for (int s = 0; s < sentences; ++s) {
            auto [lo, hi] = seq.sentence_content_span(s);
            int len = hi - lo + 1;
            int expect = std::clamp(static_cast<int>(std::llround(ratio * len)), 1, len);
            const MaskSpan& span = mp.spans[s];
            CHECK(span.hi - span.lo + 1 == expect);
            CHECK(span.lo >= lo);
            CHECK(span.hi <= hi);
            target_total += static_cast<size_t>(expect);
        }
        CHECK(mp.target_tokens.size() == target_total);

        // [SEP] positions unchanged; unmasked tokens + decoder targets rebuild the song
        std::vector<std::string> rebuilt = mp.encoder_tokens;
        for (size_t t = 0; t < mp.target_tokens.size(); ++t)
            rebuilt[mp.target_positions[t]] = mp.target_tokens[t];
        CHECK(rebuilt == seq.tokens);
        for (size_t i = 0; i < seq.tokens.size(); ++i) {
            if (seq.tokens[i] == tok::kSep) CHECK(mp.encoder_tokens[i] == tok::kSep);
            if (mp.encoder_tokens[i] == tok::kMask) CHECK(seq.tokens[i] != tok::kSep);
        }
    }
}

TEST_CASE("mask_song rejects bad input") {
    TokenSeq ok = seq_of({"a", "[SEP]"});
    CHECK_THROWS_AS(mask_song(ok, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(mask_song(ok, 1.5, 1), std::invalid_argument);

    TokenSeq empty_sentence = seq_of({"a", "[SEP]", "[SEP]"});
    CHECK_THROWS_AS(mask_song(empty_sentence, 0.5, 1), std::invalid_argument);

    TokenSeq no_sep = seq_of({"a", "b"});
    CHECK_THROWS_AS(mask_song(no_sep, 0.5, 1), std::invalid_argument);
}
