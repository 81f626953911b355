#pragma once

#include <string>
#include <vector>

#include "song/note.hpp"
#include "song/tokens.hpp"

namespace song {

// --- token vocabulary for melodies -----------------------------------------
//
// Pitch tokens are note names "C-1".."G9" (sharps spelled C#, D#, ...), plus
// "R" for a rest. Duration tokens are sixteenth counts 1..32 rendered as
// reduced fractions of a whole note: 1 -> "1/16", 2 -> "1/8", 7 -> "7/16",
// 16 -> "1/1", 32 -> "2/1". Longer durations are split into tied notes of at
// most 32 sixteenths when tokenizing.

std::string pitch_token(int pitch);
std::string duration_token(int sixteenths);
int parse_pitch_token(const std::string& token);      // kRest for "R"
int parse_duration_token(const std::string& token);
bool is_pitch_token(const std::string& token);
bool is_duration_token(const std::string& token);

constexpr int kMaxDurationSixteenths = 32;

// --- normalization ----------------------------------------------------------

// Rounds raw second-based events to the nearest sixteenth at the given tempo.
// Durations that round to zero are clamped to one sixteenth.
std::vector<Note> quantize(const std::vector<RawNote>& raw, double bpm);

struct KeyEstimate {
    int tonic = 0;        // pitch class 0..11
    bool minor = false;
    double correlation = 0.0;
    int shift = 0;        // semitone offset that moves the song to C major / A minor
};

// Krumhansl-Schmuckler key-profile correlation over the duration-weighted
// pitch-class histogram. Ties go to the smallest |shift|, then major over
// minor, then the lower tonic.
KeyEstimate estimate_key(const MelodySong& song);

// Shifts every non-rest pitch by the estimated key's offset so the song sits
// in C major (or A minor). Throws if the song has no pitched notes.
MelodySong transpose_to_c(const MelodySong& song);

// Octave shift 12*m maximizing the number of pitches inside the one-lined
// octave [60, 71]; ties prefer smaller |m|, then negative m.
int octave_center_shift(const MelodySong& song);
MelodySong octave_center(const MelodySong& song);

// --- tokenization -----------------------------------------------------------

// Alternating pitch/duration tokens with [SEP] at each phrase boundary.
TokenSeq tokenize_melody(const MelodySong& song);

// Inverse of tokenize_melody for well-formed sequences. Requires alternating
// pitch/duration order and a [SEP]-terminated final phrase; onsets are rebuilt
// by accumulating durations from zero.
MelodySong detokenize_melody(const TokenSeq& seq);

// Phrase boundaries every mean_phrase_len notes; a short final phrase stays.
MelodySong split_phrases_unpaired(const MelodySong& song, int mean_phrase_len);

// Rounded mean notes-per-phrase over a paired corpus (>= 1).
int average_phrase_length(const std::vector<MelodySong>& songs);

}  // namespace song
