#include "fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "song/midi.hpp"
#include "song/pipeline.hpp"
#include "song/score.hpp"

namespace fs = std::filesystem;

namespace song::fixtures {

namespace {

const std::vector<std::string> kWords = {
    "another", "day",   "has",   "gone",  "still", "all",   "alone",  "night",
    "light",   "dream", "heart", "home",  "river", "gold",  "summer", "rain",
    "shadow",  "fire",  "cold",  "moon",  "story", "road",  "wind",   "time"};

// C major pool kept inside the one-lined octave
const std::vector<int> kPitchPool = {60, 62, 64, 65, 67, 69, 71};
const std::vector<int> kDurationPool = {1, 2, 2, 4};

uint64_t word_hash(const std::string& w) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : w) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return h;
}

// Every word deterministically owns one or two notes; a learnable mapping.
std::vector<Note> notes_for_word(const std::string& w, long long& onset) {
    uint64_t h = word_hash(w);
    int count = 1 + static_cast<int>(h % 2);
    std::vector<Note> notes;
    for (int k = 0; k < count; ++k) {
        uint64_t hk = h >> (8 * k + 1);
        int pitch = kPitchPool[hk % kPitchPool.size()];
        int dur = kDurationPool[(hk >> 7) % kDurationPool.size()];
        notes.push_back(Note{pitch, onset, dur});
        onset += dur;
    }
    return notes;
}

}  // namespace

MelodySong figure_opening_melody() {
    MelodySong m;
    m.bpm = 120.0;
    long long onset = 0;
    auto push = [&](int pitch, int dur) {
        m.notes.push_back(Note{pitch, onset, dur});
        onset += dur;
    };
    push(kRest, 7);
    push(55, 1);  // G3
    push(64, 2);  // E4
    push(60, 4);
    push(64, 2);
    push(67, 2);
    push(64, 2);
    push(62, 2);
    push(60, 6);
    push(69, 2);
    push(67, 2);
    push(64, 2);
    push(60, 4);
    m.phrase_boundaries = {5, 9, 13};
    return m;
}

FixtureCorpus make_fixture_corpus(uint64_t seed, int paired_songs, int unpaired_songs) {
    FixtureCorpus corpus;
    Rng rng(seed);

    // paired songs: 2-3 sentences of 3-5 words, melody derived from the words
    for (int s = 0; s < paired_songs; ++s) {
        Rng srng = rng.fork(1000 + s);
        FixtureSong song;
        int sentences = 2 + static_cast<int>(srng.uniform_int(0, 1));

        std::vector<std::string> lyric_tokens;
        song.melody.bpm = 120.0;
        long long onset = 0;
        int lyric_content = 0, melody_content = 0;
        for (int sent = 0; sent < sentences; ++sent) {
            int words = 3 + static_cast<int>(srng.uniform_int(0, 2));
            for (int w = 0; w < words; ++w) {
                const std::string& word = kWords[srng.uniform_int(0, static_cast<int>(kWords.size()) - 1)];
                lyric_tokens.push_back(word);
                ++lyric_content;
                std::vector<Note> notes = notes_for_word(word, onset);
                int tokens_per_note = 2;
                SpanPair pair;
                pair.src_lo = pair.src_hi = lyric_content;
                pair.tgt_lo = melody_content + 1;
                pair.tgt_hi = melody_content + static_cast<int>(notes.size()) * tokens_per_note;
                melody_content = pair.tgt_hi;
                song.alignment.pairs.push_back(pair);
                for (const Note& n : notes) song.melody.notes.push_back(n);
            }
            lyric_tokens.push_back(tok::kSep);
            song.melody.phrase_boundaries.push_back(static_cast<int>(song.melody.notes.size()));
        }
        song.lyric = TokenSeq::from_tokens(lyric_tokens);
        // store the normalized form so preprocessing reproduces it exactly
        song.melody = octave_center(transpose_to_c(song.melody));
        song.melody_tokens = tokenize_melody(song.melody);
        corpus.paired.push_back(std::move(song));
    }

    // unpaired lyrics
    for (int s = 0; s < unpaired_songs; ++s) {
        Rng srng = rng.fork(2000 + s);
        std::vector<std::string> tokens;
        int sentences = 2 + static_cast<int>(srng.uniform_int(0, 2));
        for (int sent = 0; sent < sentences; ++sent) {
            int words = 3 + static_cast<int>(srng.uniform_int(0, 3));
            for (int w = 0; w < words; ++w)
                tokens.push_back(kWords[srng.uniform_int(0, static_cast<int>(kWords.size()) - 1)]);
            tokens.push_back(tok::kSep);
        }
        corpus.unpaired_lyrics.push_back(TokenSeq::from_tokens(tokens));
    }

    // unpaired melodies; the first one is the distinctive opener
    corpus.unpaired_melodies.push_back(figure_opening_melody());
    for (int s = 1; s < unpaired_songs; ++s) {
        Rng srng = rng.fork(3000 + s);
        MelodySong m;
        m.bpm = 120.0;
        long long onset = 0;
        int notes = 8 + static_cast<int>(srng.uniform_int(0, 8));
        for (int n = 0; n < notes; ++n) {
            int pitch = srng.uniform() < 0.1
                            ? kRest
                            : kPitchPool[srng.uniform_int(0, static_cast<int>(kPitchPool.size()) - 1)];
            int dur = kDurationPool[srng.uniform_int(0, static_cast<int>(kDurationPool.size()) - 1)];
            if (m.notes.empty() && pitch == kRest) pitch = 60;
            if (pitch == kRest && m.notes.back().is_rest()) pitch = 64;  // no double rests
            m.notes.push_back(Note{pitch, onset, dur});
            onset += dur;
        }
        int phrase = 4;
        for (int b = phrase; b < static_cast<int>(m.notes.size()); b += phrase)
            m.phrase_boundaries.push_back(b);
        m.phrase_boundaries.push_back(static_cast<int>(m.notes.size()));
        corpus.unpaired_melodies.push_back(std::move(m));
    }

    // vocabularies over everything
    std::vector<TokenSeq> lyric_corpus = corpus.unpaired_lyrics;
    std::vector<TokenSeq> melody_corpus;
    for (const MelodySong& m : corpus.unpaired_melodies) melody_corpus.push_back(tokenize_melody(m));
    for (const FixtureSong& p : corpus.paired) {
        lyric_corpus.push_back(p.lyric);
        melody_corpus.push_back(p.melody_tokens);
    }
    corpus.lyric_vocab = Vocabulary::build(lyric_corpus, 1);
    corpus.melody_vocab = Vocabulary::build(melody_corpus, 1);
    return corpus;
}

Corpora FixtureCorpus::corpora() const {
    Corpora c;
    c.lyric_vocab = lyric_vocab;
    c.melody_vocab = melody_vocab;
    c.unpaired_lyrics = unpaired_lyrics;
    for (const MelodySong& m : unpaired_melodies) c.unpaired_melodies.push_back(tokenize_melody(m));
    for (const FixtureSong& p : paired) {
        PairedSong ps;
        ps.lyric = p.lyric;
        ps.melody = p.melody_tokens;
        ps.alignment = p.alignment;
        ps.has_alignment = true;
        c.paired.push_back(std::move(ps));
    }
    return c;
}

void write_raw_fixture(const std::string& dir, const FixtureCorpus& corpus) {
    fs::create_directories(fs::path(dir) / "unpaired_midi");
    fs::create_directories(fs::path(dir) / "paired_midi");

    auto write_lyrics = [](const std::string& path, const std::vector<TokenSeq>& songs) {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        for (const TokenSeq& s : songs) {
            int sentences = s.sentence_count();
            for (int sent = 0; sent < sentences; ++sent) {
                auto [lo, hi] = s.sentence_content_span(sent);
                for (int i = lo; i <= hi; ++i) {
                    if (i > lo) out << ' ';
                    out << s.tokens[i];
                }
                out << '\n';
            }
            out << '\n';
        }
    };

    write_lyrics(dir + "/unpaired_lyrics.txt", corpus.unpaired_lyrics);
    for (size_t i = 0; i < corpus.unpaired_melodies.size(); ++i) {
        char name[512];
        std::snprintf(name, sizeof name, "%s/unpaired_midi/%04zu.mid", dir.c_str(), i);
        write_midi_file(name, corpus.unpaired_melodies[i]);
    }

    std::vector<TokenSeq> paired_lyrics;
    std::ofstream phrases(dir + "/paired_phrases.txt");
    std::vector<Alignment> aligns;
    for (size_t i = 0; i < corpus.paired.size(); ++i) {
        const FixtureSong& p = corpus.paired[i];
        paired_lyrics.push_back(p.lyric);
        char name[512];
        std::snprintf(name, sizeof name, "%s/paired_midi/%04zu.mid", dir.c_str(), i);
        write_midi_file(name, p.melody);
        int prev = 0;
        for (size_t b = 0; b < p.melody.phrase_boundaries.size(); ++b) {
            if (b) phrases << ' ';
            phrases << p.melody.phrase_boundaries[b] - prev;
            prev = p.melody.phrase_boundaries[b];
        }
        phrases << '\n';
        aligns.push_back(p.alignment);
    }
    write_lyrics(dir + "/paired_lyrics.txt", paired_lyrics);
    write_alignment_file(dir + "/paired_align.txt", aligns);
}

MelodySong random_melody(Rng& rng, bool allow_rests, int max_notes) {
    MelodySong m;
    m.bpm = 120.0;
    int notes = 2 + static_cast<int>(rng.uniform_int(0, max_notes - 2));
    long long onset = 0;
    for (int i = 0; i < notes; ++i) {
        int pitch;
        if (allow_rests && rng.uniform() < 0.15 && !(i > 0 && m.notes.back().is_rest()))
            pitch = kRest;
        else
            pitch = static_cast<int>(rng.uniform_int(0, 127));
        int dur = static_cast<int>(rng.uniform_int(1, kMaxDurationSixteenths));
        m.notes.push_back(Note{pitch, onset, dur});
        onset += dur;
    }
    int pos = 0;
    while (pos < notes) {
        pos += static_cast<int>(rng.uniform_int(1, 5));
        pos = std::min(pos, notes);
        m.phrase_boundaries.push_back(pos);
    }
    return m;
}

Mat random_attention(Rng& rng, int rows, int cols) {
    Mat a(rows, cols);
    for (int i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            a(i, j) = 0.05 + rng.uniform();
            sum += a(i, j);
        }
        for (int j = 0; j < cols; ++j) a(i, j) /= sum;
    }
    return a;
}

Alignment random_tiling(Rng& rng, int source_len, int target_len) {
    Alignment a;
    int i = 0, j = 0;  // consumed targets / sources
    while (i < target_len && j < source_len) {
        int rem_t = target_len - i, rem_s = source_len - j;
        if (rem_t == 1 || (rem_s > 1 && rng.uniform() < 0.5)) {
            // one target to 1..k sources, leaving enough sources for the rest
            int spare = rem_s - (rem_t - 1);
            int max_take = std::max(1, std::min(spare, 3));
            int take = 1 + static_cast<int>(rng.uniform_int(0, max_take - 1));
            a.pairs.push_back(SpanPair{j + 1, j + take, i + 1, i + 1});
            i += 1;
            j += take;
        } else {
            int spare = rem_t - (rem_s - 1);
            int max_take = std::max(1, std::min(spare, 3));
            int take = 1 + static_cast<int>(rng.uniform_int(0, max_take - 1));
            a.pairs.push_back(SpanPair{j + 1, j + 1, i + 1, i + take});
            i += take;
            j += 1;
        }
    }
    // absorb any leftover along one axis into a final pair on the last token
    if (i < target_len) {
        SpanPair& last = a.pairs.back();
        if (last.src_len() == 1 && last.src_hi == source_len)
            last.tgt_hi = target_len;
        else
            a.pairs.push_back(SpanPair{source_len, source_len, i + 1, target_len});
    } else if (j < source_len) {
        SpanPair& last = a.pairs.back();
        if (last.tgt_len() == 1 && last.tgt_hi == target_len)
            last.src_hi = source_len;
        else
            a.pairs.push_back(SpanPair{j + 1, source_len, target_len, target_len});
    }
    return a;
}

}  // namespace song::fixtures
