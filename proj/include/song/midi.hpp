#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "song/note.hpp"

namespace song {

class MidiParseError : public std::runtime_error {
public:
    MidiParseError(const std::string& what, size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

// Reads one track of a format 0/1 Standard MIDI File into a monophonic,
// sixteenth-quantized note list. Tempo comes from the first tempo meta event
// in the file (120 BPM when absent); overlapping notes are truncated at the
// next onset, same-onset chords keep the highest pitch, and silences become
// explicit rest notes (including a leading rest when the track starts late).
// Phrase boundaries are left empty.
MelodySong parse_midi_melody(const std::vector<uint8_t>& bytes, int track_index);

// Serializes a song as a single-track format 0 file at 480 ticks per quarter.
// Rest notes become silence.
std::vector<uint8_t> write_midi(const MelodySong& song);

MelodySong parse_midi_file(const std::string& path, int track_index);
void write_midi_file(const std::string& path, const MelodySong& song);

}  // namespace song
