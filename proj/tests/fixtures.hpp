#pragma once

#include <string>
#include <vector>

#include "song/align.hpp"
#include "song/note.hpp"
#include "song/rng.hpp"
#include "song/tokens.hpp"
#include "song/train.hpp"
#include "song/vocab.hpp"

namespace song::fixtures {

struct FixtureSong {
    TokenSeq lyric;
    MelodySong melody;        // normalized, phrase boundaries set
    TokenSeq melody_tokens;
    Alignment alignment;      // lyric content tokens (src) <-> melody content tokens (tgt)
};

struct FixtureCorpus {
    std::vector<FixtureSong> paired;
    std::vector<TokenSeq> unpaired_lyrics;
    std::vector<MelodySong> unpaired_melodies;  // phrased
    Vocabulary lyric_vocab, melody_vocab;

    Corpora corpora() const;
};

// Deterministic miniature corpus. Paired melodies are word-driven (each word
// maps to fixed notes) so a small model can actually learn the mapping; the
// first unpaired melody opens with a 7-sixteenth rest, G3 and E4 so its token
// line starts "R 7/16 G3 1/16 E4 1/8".
FixtureCorpus make_fixture_corpus(uint64_t seed = 7, int paired_songs = 10, int unpaired_songs = 20);

// The distinctive opening melody described above, as raw notes.
MelodySong figure_opening_melody();

// Raw-input layout for cmd_preprocess: unpaired_midi/, unpaired_lyrics.txt,
// paired_midi/, paired_lyrics.txt, paired_phrases.txt, paired_align.txt.
void write_raw_fixture(const std::string& dir, const FixtureCorpus& corpus);

// Random gap-free normalized melody (durations 1..32, valid phrases) for
// round-trip property tests.
MelodySong random_melody(Rng& rng, bool allow_rests = true, int max_notes = 24);

// Random attention-like matrix with strictly positive entries, rows summing
// to one.
Mat random_attention(Rng& rng, int rows, int cols);

// Random valid monotone one-to-many/many-to-one tiling of an M x N grid.
Alignment random_tiling(Rng& rng, int source_len, int target_len);

}  // namespace song::fixtures
