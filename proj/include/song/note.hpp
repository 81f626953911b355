#pragma once

#include <vector>

namespace song {

// Sentinel pitch for an explicit rest event.
constexpr int kRest = -1;

// One melody event on the sixteenth-note grid. A normalized song is a
// gap-free, monophonic run of these: onsets sorted, no overlaps, silences
// carried as explicit rest notes.
struct Note {
    int pitch = kRest;       // MIDI 0..127, or kRest
    long long onset = 0;     // sixteenths from song start, >= 0
    int duration = 1;        // sixteenths, >= 1

    bool is_rest() const { return pitch == kRest; }
    bool operator==(const Note&) const = default;
};

struct MelodySong {
    std::vector<Note> notes;
    // Indices into notes marking phrase ends, strictly increasing; when
    // non-empty the last boundary equals notes.size().
    std::vector<int> phrase_boundaries;
    double bpm = 120.0;

    bool operator==(const MelodySong&) const = default;
};

// A note event before grid quantization, in absolute seconds.
struct RawNote {
    int pitch = 0;
    double onset_sec = 0.0;
    double duration_sec = 0.0;
};

}  // namespace song
