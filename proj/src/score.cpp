#include "song/score.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace song {

namespace {

const std::array<std::string, 12> kPitchNames = {
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

int gcd_int(int a, int b) { return b == 0 ? a : gcd_int(b, a % b); }

}  // namespace

std::string pitch_token(int pitch) {
    if (pitch == kRest) return "R";
    if (pitch < 0 || pitch > 127) throw std::invalid_argument("pitch out of MIDI range: " + std::to_string(pitch));
    return kPitchNames[pitch % 12] + std::to_string(pitch / 12 - 1);
}

std::string duration_token(int sixteenths) {
    if (sixteenths < 1 || sixteenths > kMaxDurationSixteenths)
        throw std::invalid_argument("duration out of token range: " + std::to_string(sixteenths));
    int g = gcd_int(sixteenths, 16);
    return std::to_string(sixteenths / g) + "/" + std::to_string(16 / g);
}

int parse_pitch_token(const std::string& token) {
    if (token == "R") return kRest;
    size_t name_len = (token.size() > 1 && token[1] == '#') ? 2 : 1;
    if (token.size() <= name_len) throw std::invalid_argument("bad pitch token: " + token);
    std::string name = token.substr(0, name_len);
    auto it = std::find(kPitchNames.begin(), kPitchNames.end(), name);
    if (it == kPitchNames.end()) throw std::invalid_argument("bad pitch token: " + token);
    int pc = static_cast<int>(it - kPitchNames.begin());
    int octave;
    try {
        size_t used = 0;
        octave = std::stoi(token.substr(name_len), &used);
        if (used != token.size() - name_len) throw std::invalid_argument(token);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad pitch token: " + token);
    }
    int pitch = (octave + 1) * 12 + pc;
    if (pitch < 0 || pitch > 127) throw std::invalid_argument("pitch token out of MIDI range: " + token);
    return pitch;
}

int parse_duration_token(const std::string& token) {
    size_t slash = token.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 >= token.size())
        throw std::invalid_argument("bad duration token: " + token);
    long p, q;
    try {
        size_t up = 0, uq = 0;
        p = std::stol(token.substr(0, slash), &up);
        q = std::stol(token.substr(slash + 1), &uq);
        if (up != slash || uq != token.size() - slash - 1) throw std::invalid_argument(token);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad duration token: " + token);
    }
    if (p <= 0 || q <= 0 || (p * 16) % q != 0) throw std::invalid_argument("bad duration token: " + token);
    long n = p * 16 / q;
    if (n < 1 || n > kMaxDurationSixteenths) throw std::invalid_argument("duration token out of range: " + token);
    return static_cast<int>(n);
}

bool is_pitch_token(const std::string& token) {
    if (tok::is_special(token)) return false;
    try {
        parse_pitch_token(token);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

bool is_duration_token(const std::string& token) {
    if (tok::is_special(token)) return false;
    try {
        parse_duration_token(token);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<Note> quantize(const std::vector<RawNote>& raw, double bpm) {
    if (bpm <= 0.0) throw std::invalid_argument("quantize: bpm must be positive");
    const double sixteenth_sec = 60.0 / bpm / 4.0;
    std::vector<Note> notes;
    notes.reserve(raw.size());
    for (const RawNote& r : raw) {
        Note n;
        n.pitch = r.pitch;
        n.onset = std::llround(r.onset_sec / sixteenth_sec);
        n.duration = static_cast<int>(std::max<long long>(1, std::llround(r.duration_sec / sixteenth_sec)));
        if (n.onset < 0) n.onset = 0;
        notes.push_back(n);
    }
    return notes;
}

namespace {

// Krumhansl-Kessler probe-tone profiles.
const std::array<double, 12> kMajorProfile = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                              2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
const std::array<double, 12> kMinorProfile = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                              2.54, 4.75, 3.98, 2.69, 3.34, 3.17};

double pearson(const std::array<double, 12>& x, const std::array<double, 12>& y) {
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / 12.0;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / 12.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < 12; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

int wrap_shift(int delta) {
    int k = ((delta % 12) + 12) % 12;
    return k <= 6 ? k : k - 12;
}

}  // namespace

KeyEstimate estimate_key(const MelodySong& song) {
    std::array<double, 12> hist{};
    bool any = false;
    for (const Note& n : song.notes) {
        if (n.is_rest()) continue;
        hist[((n.pitch % 12) + 12) % 12] += n.duration;
        any = true;
    }
    if (!any) throw std::runtime_error("estimate_key: song has no pitched notes");

    KeyEstimate best;
    bool have = false;
    for (int minor = 0; minor <= 1; ++minor) {
        const auto& profile = minor ? kMinorProfile : kMajorProfile;
        for (int tonic = 0; tonic < 12; ++tonic) {
            std::array<double, 12> rotated;
            for (int pc = 0; pc < 12; ++pc) rotated[pc] = profile[((pc - tonic) % 12 + 12) % 12];
            KeyEstimate cand;
            cand.tonic = tonic;
            cand.minor = minor != 0;
            cand.correlation = pearson(hist, rotated);
            cand.shift = wrap_shift(minor ? 9 - tonic : -tonic);
            if (!have) {
                best = cand;
                have = true;
                continue;
            }
            constexpr double kTieEps = 1e-12;
            double d = cand.correlation - best.correlation;
            bool better = d > kTieEps;
            if (!better && d > -kTieEps) {
                // correlation tie: smallest |shift|, then major, then low tonic
                if (std::abs(cand.shift) != std::abs(best.shift))
                    better = std::abs(cand.shift) < std::abs(best.shift);
                else if (cand.minor != best.minor)
                    better = !cand.minor;
                else
                    better = cand.tonic < best.tonic;
            }
            if (better) best = cand;
        }
    }
    return best;
}

MelodySong transpose_to_c(const MelodySong& song) {
    KeyEstimate key = estimate_key(song);  // throws on all-rest input
    MelodySong out = song;
    for (Note& n : out.notes)
        if (!n.is_rest()) n.pitch += key.shift;
    return out;
}

int octave_center_shift(const MelodySong& song) {
    bool any = false;
    for (const Note& n : song.notes)
        if (!n.is_rest()) any = true;
    if (!any) throw std::runtime_error("octave_center: song has no pitched notes");

    auto in_range_count = [&](int m) {
        int count = 0;
        for (const Note& n : song.notes) {
            if (n.is_rest()) continue;
            int p = n.pitch + 12 * m;
            if (p >= 60 && p <= 71) ++count;
        }
        return count;
    };

    // Visit shifts in order 0, -1, 1, -2, 2, ... and require a strict
    // improvement, which realizes the smaller-|m|-then-negative tie-break.
    int best_m = 0;
    int best_count = in_range_count(0);
    for (int mag = 1; mag <= 10; ++mag) {
        for (int m : {-mag, mag}) {
            int c = in_range_count(m);
            if (c > best_count) {
                best_count = c;
                best_m = m;
            }
        }
    }
    return best_m;
}

MelodySong octave_center(const MelodySong& song) {
    int m = octave_center_shift(song);
    MelodySong out = song;
    for (Note& n : out.notes)
        if (!n.is_rest()) n.pitch += 12 * m;
    return out;
}

TokenSeq tokenize_melody(const MelodySong& song) {
    if (!song.phrase_boundaries.empty()) {
        int prev = 0;
        for (int b : song.phrase_boundaries) {
            if (b <= prev)
                throw std::invalid_argument("tokenize_melody: phrase boundaries not strictly increasing");
            prev = b;
        }
        if (song.phrase_boundaries.back() != static_cast<int>(song.notes.size()))
            throw std::invalid_argument("tokenize_melody: last phrase boundary must equal note count");
    }

    std::vector<std::string> tokens;
    size_t next_boundary = 0;
    for (size_t i = 0; i <= song.notes.size(); ++i) {
        if (next_boundary < song.phrase_boundaries.size() &&
            song.phrase_boundaries[next_boundary] == static_cast<int>(i)) {
            tokens.push_back(tok::kSep);
            ++next_boundary;
        }
        if (i == song.notes.size()) break;
        const Note& n = song.notes[i];
        int remaining = n.duration;
        while (remaining > 0) {
            int chunk = std::min(remaining, kMaxDurationSixteenths);
            tokens.push_back(pitch_token(n.pitch));
            tokens.push_back(duration_token(chunk));
            remaining -= chunk;
        }
    }
    return TokenSeq::from_tokens(std::move(tokens));
}

MelodySong detokenize_melody(const TokenSeq& seq) {
    MelodySong song;
    long long onset = 0;
    int notes_in_phrase = 0;
    bool expect_pitch = true;
    int pending_pitch = 0;

    for (size_t i = 0; i < seq.tokens.size(); ++i) {
        const std::string& t = seq.tokens[i];
        if (t == tok::kSep) {
            if (!expect_pitch)
                throw std::invalid_argument("detokenize_melody: [SEP] splits a pitch-duration pair");
            if (notes_in_phrase == 0)
                throw std::invalid_argument("detokenize_melody: empty phrase");
            song.phrase_boundaries.push_back(static_cast<int>(song.notes.size()));
            notes_in_phrase = 0;
            continue;
        }
        if (expect_pitch) {
            if (!is_pitch_token(t))
                throw std::invalid_argument("detokenize_melody: expected pitch token, got '" + t + "'");
            pending_pitch = parse_pitch_token(t);
            expect_pitch = false;
        } else {
            if (!is_duration_token(t))
                throw std::invalid_argument("detokenize_melody: expected duration token, got '" + t + "'");
            int dur = parse_duration_token(t);
            song.notes.push_back(Note{pending_pitch, onset, dur});
            onset += dur;
            ++notes_in_phrase;
            expect_pitch = true;
        }
    }
    if (!expect_pitch)
        throw std::invalid_argument("detokenize_melody: trailing pitch token without duration");
    if (notes_in_phrase != 0 || song.notes.empty() || song.phrase_boundaries.empty())
        throw std::invalid_argument("detokenize_melody: sequence must end with a [SEP]-closed phrase");
    return song;
}

MelodySong split_phrases_unpaired(const MelodySong& song, int mean_phrase_len) {
    if (mean_phrase_len < 1) throw std::invalid_argument("split_phrases_unpaired: mean phrase length must be >= 1");
    MelodySong out = song;
    out.phrase_boundaries.clear();
    int n = static_cast<int>(song.notes.size());
    for (int b = mean_phrase_len; b < n; b += mean_phrase_len) out.phrase_boundaries.push_back(b);
    if (n > 0) out.phrase_boundaries.push_back(n);
    return out;
}

int average_phrase_length(const std::vector<MelodySong>& songs) {
    long long notes = 0, phrases = 0;
    for (const MelodySong& s : songs) {
        notes += static_cast<long long>(s.notes.size());
        phrases += static_cast<long long>(s.phrase_boundaries.size());
    }
    if (phrases == 0) throw std::invalid_argument("average_phrase_length: no phrases in corpus");
    return std::max(1, static_cast<int>(std::llround(static_cast<double>(notes) / static_cast<double>(phrases))));
}

}  // namespace song
