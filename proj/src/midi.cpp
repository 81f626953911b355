#include "song/midi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "song/score.hpp"

namespace song {

namespace {

class ByteReader {
public:
    ByteReader(const std::vector<uint8_t>& bytes, size_t pos) : bytes_(bytes), pos_(pos) {}

    size_t pos() const { return pos_; }
    void seek(size_t pos) { pos_ = pos; }
    bool at_end(size_t limit) const { return pos_ >= limit; }

    uint8_t u8() {
        if (pos_ >= bytes_.size()) throw MidiParseError("unexpected end of file", pos_);
        return bytes_[pos_++];
    }
    uint8_t peek() const {
        if (pos_ >= bytes_.size()) throw MidiParseError("unexpected end of file", pos_);
        return bytes_[pos_];
    }
    uint16_t u16() { return static_cast<uint16_t>(u8() << 8 | u8()); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | u8();
        return v;
    }
    uint32_t vlq() {
        uint32_t value = 0;
        for (int i = 0; i < 4; ++i) {
            uint8_t b = u8();
            value = value << 7 | (b & 0x7f);
            if (!(b & 0x80)) return value;
        }
        throw MidiParseError("variable-length quantity longer than 4 bytes", pos_);
    }
    void skip(size_t n) {
        if (pos_ + n > bytes_.size()) throw MidiParseError("unexpected end of file", pos_);
        pos_ += n;
    }
    void expect(const char* tag) {
        for (int i = 0; i < 4; ++i) {
            if (u8() != static_cast<uint8_t>(tag[i]))
                throw MidiParseError(std::string("expected chunk '") + tag + "'", pos_ - 1);
        }
    }

private:
    const std::vector<uint8_t>& bytes_;
    size_t pos_;
};

struct TickNote {
    int pitch;
    long long on_tick;
    long long off_tick;
};

struct TrackScan {
    std::vector<TickNote> notes;
    bool has_tempo = false;
    uint32_t tempo_us = 0;  // first tempo event in this track
};

TrackScan scan_track(ByteReader& r, size_t track_end) {
    TrackScan scan;
    std::map<int, std::vector<long long>> open;  // pitch -> onset ticks (stacked)
    long long tick = 0;
    uint8_t running_status = 0;

    auto close_note = [&](int pitch, long long off_tick) {
        auto it = open.find(pitch);
        if (it == open.end() || it->second.empty()) return;  // stray note-off, ignore
        long long on_tick = it->second.back();
        it->second.pop_back();
        scan.notes.push_back(TickNote{pitch, on_tick, off_tick});
    };

    while (!r.at_end(track_end)) {
        tick += r.vlq();
        uint8_t status = r.peek();
        if (status & 0x80) {
            r.u8();
            if (status < 0xf0) running_status = status;
        } else {
            if (!(running_status & 0x80)) throw MidiParseError("data byte without running status", r.pos());
            status = running_status;
        }

        if (status == 0xff) {  // meta cancels running status
            running_status = 0;
            uint8_t type = r.u8();
            uint32_t len = r.vlq();
            if (type == 0x51 && len == 3) {
                uint32_t us = r.u8();
                us = us << 8 | r.u8();
                us = us << 8 | r.u8();
                if (!scan.has_tempo) {
                    scan.has_tempo = true;
                    scan.tempo_us = us;
                }
            } else if (type == 0x2f) {
                r.skip(len);
                break;
            } else {
                r.skip(len);
            }
        } else if (status == 0xf0 || status == 0xf7) {  // sysex cancels running status
            running_status = 0;
            r.skip(r.vlq());
        } else {
            uint8_t kind = status & 0xf0;
            uint8_t d1 = r.u8();
            if (kind == 0xc0 || kind == 0xd0) continue;  // one data byte
            uint8_t d2 = r.u8();
            if (kind == 0x90 && d2 > 0) {
                open[d1].push_back(tick);
            } else if (kind == 0x80 || (kind == 0x90 && d2 == 0)) {
                close_note(d1, tick);
            }
        }
    }
    // notes left hanging at end of track close at the final tick
    for (auto& [pitch, onsets] : open)
        for (long long on : onsets) scan.notes.push_back(TickNote{pitch, on, tick});
    return scan;
}

}  // namespace

MelodySong parse_midi_melody(const std::vector<uint8_t>& bytes, int track_index) {
    ByteReader r(bytes, 0);
    r.expect("MThd");
    uint32_t header_len = r.u32();
    if (header_len < 6) throw MidiParseError("header chunk too short", r.pos());
    uint16_t format = r.u16();
    uint16_t ntrks = r.u16();
    uint16_t division = r.u16();
    r.skip(header_len - 6);
    if (format > 1) throw MidiParseError("unsupported SMF format " + std::to_string(format), r.pos());
    if (division & 0x8000) throw MidiParseError("SMPTE time division is unsupported", r.pos());
    if (division == 0) throw MidiParseError("zero ticks per quarter", r.pos());
    if (track_index < 0 || track_index >= ntrks)
        throw std::invalid_argument("parse_midi_melody: track index " + std::to_string(track_index) +
                                    " out of range (file has " + std::to_string(ntrks) + " tracks)");

    std::vector<TickNote> melody;
    bool have_tempo = false;
    uint32_t tempo_us = 500000;  // 120 BPM default
    for (int t = 0; t < ntrks; ++t) {
        r.expect("MTrk");
        uint32_t len = r.u32();
        size_t track_end = r.pos() + len;
        if (track_end > bytes.size()) throw MidiParseError("track length exceeds file size", r.pos());
        TrackScan scan = scan_track(r, track_end);
        r.seek(track_end);
        if (scan.has_tempo && !have_tempo) {
            have_tempo = true;
            tempo_us = scan.tempo_us;
        }
        if (t == track_index) melody = std::move(scan.notes);
    }
    if (melody.empty())
        throw std::runtime_error("parse_midi_melody: track " + std::to_string(track_index) + " has no note events");

    const double sec_per_tick = tempo_us / 1e6 / division;
    const double bpm = 60e6 / tempo_us;
    std::vector<RawNote> raw;
    raw.reserve(melody.size());
    for (const TickNote& n : melody)
        raw.push_back(RawNote{n.pitch, n.on_tick * sec_per_tick, (n.off_tick - n.on_tick) * sec_per_tick});

    std::vector<Note> notes = quantize(raw, bpm);

    // Monophonic normalization on the grid: highest pitch wins a chord, the
    // earlier of two overlapping notes is truncated, gaps become rests.
    std::sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
        if (a.onset != b.onset) return a.onset < b.onset;
        return a.pitch > b.pitch;
    });
    std::vector<Note> mono;
    for (const Note& n : notes) {
        if (!mono.empty() && mono.back().onset == n.onset) continue;  // chord: keep top note
        if (!mono.empty()) {
            Note& prev = mono.back();
            if (prev.onset + prev.duration > n.onset) {
                prev.duration = static_cast<int>(n.onset - prev.onset);
                if (prev.duration <= 0) mono.pop_back();
            }
        }
        mono.push_back(n);
    }

    MelodySong song;
    song.bpm = bpm;
    long long cursor = 0;
    for (const Note& n : mono) {
        if (n.onset > cursor)
            song.notes.push_back(Note{kRest, cursor, static_cast<int>(n.onset - cursor)});
        song.notes.push_back(n);
        cursor = n.onset + n.duration;
    }
    return song;
}

std::vector<uint8_t> write_midi(const MelodySong& song) {
    constexpr int kTicksPerQuarter = 480;
    constexpr int kTicksPerSixteenth = kTicksPerQuarter / 4;

    std::vector<uint8_t> track;
    auto vlq = [&](long long value) {
        uint8_t buf[4];
        int n = 0;
        do {
            buf[n++] = static_cast<uint8_t>(value & 0x7f);
            value >>= 7;
        } while (value > 0);
        for (int i = n - 1; i >= 0; --i) track.push_back(i == 0 ? buf[i] : (buf[i] | 0x80));
    };

    uint32_t tempo_us = static_cast<uint32_t>(std::llround(60e6 / (song.bpm > 0 ? song.bpm : 120.0)));
    vlq(0);
    track.insert(track.end(), {0xff, 0x51, 0x03});
    track.push_back(static_cast<uint8_t>(tempo_us >> 16));
    track.push_back(static_cast<uint8_t>(tempo_us >> 8));
    track.push_back(static_cast<uint8_t>(tempo_us));

    long long cursor_tick = 0;
    for (const Note& n : song.notes) {
        if (n.is_rest()) continue;
        if (n.pitch < 0 || n.pitch > 127)
            throw std::invalid_argument("write_midi: pitch out of MIDI range: " + std::to_string(n.pitch));
        long long on_tick = n.onset * kTicksPerSixteenth;
        long long off_tick = (n.onset + n.duration) * kTicksPerSixteenth;
        vlq(on_tick - cursor_tick);
        track.insert(track.end(), {0x90, static_cast<uint8_t>(n.pitch), 80});
        vlq(off_tick - on_tick);
        track.insert(track.end(), {0x80, static_cast<uint8_t>(n.pitch), 0});
        cursor_tick = off_tick;
    }
    vlq(0);
    track.insert(track.end(), {0xff, 0x2f, 0x00});

    std::vector<uint8_t> out;
    auto u16 = [&](uint16_t v) {
        out.push_back(static_cast<uint8_t>(v >> 8));
        out.push_back(static_cast<uint8_t>(v));
    };
    auto u32 = [&](uint32_t v) {
        for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    };
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    u32(6);
    u16(0);  // format 0
    u16(1);  // one track
    u16(kTicksPerQuarter);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    u32(static_cast<uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

MelodySong parse_midi_file(const std::string& path, int track_index) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open MIDI file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_midi_melody(bytes, track_index);
}

void write_midi_file(const std::string& path, const MelodySong& song) {
    std::vector<uint8_t> bytes = write_midi(song);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write MIDI file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace song
