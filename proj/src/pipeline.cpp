#include "song/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "song/lyrics.hpp"
#include "song/metrics.hpp"
#include "song/midi.hpp"
#include "song/score.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace song {

namespace {

// Index-parallel loop; each body call owns slot i, results land in order.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || n < 4) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<size_t>(threads, n); ++t)
        pool.emplace_back([&] {
            for (size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        });
    for (std::thread& th : pool) th.join();
}

std::vector<std::string> list_midi_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".mid" || ext == ".midi") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

SpanPair parse_span_pair(const std::string& item) {
    // "a-b:c-d"
    auto bad = [&] { return std::invalid_argument("bad alignment pair '" + item + "'"); };
    size_t colon = item.find(':');
    if (colon == std::string::npos) throw bad();
    auto parse_range = [&](const std::string& s, int& lo, int& hi) {
        size_t dash = s.find('-');
        if (dash == std::string::npos || dash == 0 || dash + 1 >= s.size()) throw bad();
        lo = std::stoi(s.substr(0, dash));
        hi = std::stoi(s.substr(dash + 1));
        if (lo < 1 || hi < lo) throw bad();
    };
    SpanPair p;
    parse_range(item.substr(0, colon), p.src_lo, p.src_hi);
    parse_range(item.substr(colon + 1), p.tgt_lo, p.tgt_hi);
    return p;
}

}  // namespace

std::vector<Alignment> read_alignment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open alignment file: " + path);
    std::vector<Alignment> out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream iss(line);
        Alignment a;
        std::string item;
        while (iss >> item) a.pairs.push_back(parse_span_pair(item));
        if (!a.pairs.empty()) out.push_back(std::move(a));
    }
    return out;
}

void write_alignment_file(const std::string& path, const std::vector<Alignment>& alignments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write alignment file: " + path);
    for (const Alignment& a : alignments) {
        for (size_t i = 0; i < a.pairs.size(); ++i) {
            const SpanPair& p = a.pairs[i];
            if (i) out << ' ';
            out << p.src_lo << '-' << p.src_hi << ':' << p.tgt_lo << '-' << p.tgt_hi;
        }
        out << '\n';
    }
}

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) throw std::runtime_error("attention JSON: bad matrix");
    Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.rows; ++i) {
        if (static_cast<int>(rows[i].size()) != m.cols)
            throw std::runtime_error("attention JSON: ragged matrix");
        for (int j = 0; j < m.cols; ++j) m(i, j) = rows[i][j].get<double>();
    }
    return m;
}

}  // namespace

void write_attention_json(const std::string& path, const std::vector<SongAttention>& songs) {
    json j;
    j["version"] = 1;
    json jsongs = json::array();
    for (const SongAttention& song : songs) {
        json jsents = json::array();
        for (const SentenceAttention& s : song.sentences) {
            jsents.push_back({{"source_tokens", s.source_tokens},
                              {"target_tokens", s.target_tokens},
                              {"weights", mat_to_json(s.weights)}});
        }
        jsongs.push_back({{"sentences", std::move(jsents)}});
    }
    j["songs"] = std::move(jsongs);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write attention JSON: " + path);
    out << j.dump() << '\n';
}

std::vector<SongAttention> read_attention_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open attention JSON: " + path);
    json j;
    in >> j;
    std::vector<SongAttention> songs;
    for (const json& jsong : j.at("songs")) {
        SongAttention song;
        for (const json& jsent : jsong.at("sentences")) {
            SentenceAttention s;
            s.source_tokens = jsent.at("source_tokens").get<std::vector<std::string>>();
            s.target_tokens = jsent.at("target_tokens").get<std::vector<std::string>>();
            s.weights = mat_from_json(jsent.at("weights"));
            song.sentences.push_back(std::move(s));
        }
        songs.push_back(std::move(song));
    }
    return songs;
}

// --- preprocess --------------------------------------------------------------------

namespace {

struct MelodyResult {
    MelodySong song;
    bool ok = false;
    std::string error;
};

std::vector<MelodyResult> parse_and_normalize(const std::vector<std::string>& files, int track) {
    std::vector<MelodyResult> results(files.size());
    parallel_for(files.size(), [&](size_t i) {
        try {
            MelodySong s = parse_midi_file(files[i], track);
            s = transpose_to_c(s);
            s = octave_center(s);
            results[i].song = std::move(s);
            results[i].ok = true;
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    });
    return results;
}

std::vector<std::vector<int>> read_phrase_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open phrase file: " + path);
    std::vector<std::vector<int>> out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream iss(line);
        std::vector<int> counts;
        int c;
        while (iss >> c) counts.push_back(c);
        if (!counts.empty()) out.push_back(std::move(counts));
    }
    return out;
}

bool apply_phrase_counts(MelodySong& song, const std::vector<int>& counts) {
    song.phrase_boundaries.clear();
    int cum = 0;
    for (int c : counts) {
        if (c < 1) return false;
        cum += c;
        song.phrase_boundaries.push_back(cum);
    }
    return cum == static_cast<int>(song.notes.size());
}

}  // namespace

PreprocessReport cmd_preprocess(const PreprocessOptions& options) {
    if (options.out_dir.empty()) throw std::invalid_argument("preprocess: out_dir is required");
    fs::create_directories(options.out_dir);
    PreprocessReport report;
    auto warn = [&](const std::string& w) { report.warnings.push_back(w); };

    // paired side first: it defines the mean phrase length
    std::vector<TokenSeq> paired_lyrics, paired_melodies;
    std::vector<Alignment> paired_aligns;
    std::vector<MelodySong> paired_songs;
    if (!options.paired_midi_dir.empty() || !options.paired_lyrics_file.empty()) {
        if (options.paired_midi_dir.empty() || options.paired_lyrics_file.empty() ||
            options.paired_phrases_file.empty())
            throw std::invalid_argument(
                "preprocess: paired data needs paired_midi_dir, paired_lyrics_file and paired_phrases_file");

        std::vector<TokenSeq> lyrics = parse_lyrics_file(options.paired_lyrics_file);
        std::vector<std::string> midi_files = list_midi_files(options.paired_midi_dir);
        std::vector<std::vector<int>> phrases = read_phrase_file(options.paired_phrases_file);
        std::vector<Alignment> aligns;
        bool have_align = !options.paired_align_file.empty();
        if (have_align) aligns = read_alignment_file(options.paired_align_file);

        if (lyrics.size() != midi_files.size() || lyrics.size() != phrases.size() ||
            (have_align && aligns.size() != lyrics.size()))
            throw std::invalid_argument("preprocess: paired lyric/midi/phrase/alignment counts disagree");

        std::vector<MelodyResult> melodies = parse_and_normalize(midi_files, options.midi_track);
        for (size_t i = 0; i < melodies.size(); ++i) {
            if (!melodies[i].ok) {
                warn("paired song " + std::to_string(i) + " skipped: " + melodies[i].error);
                continue;
            }
            MelodySong m = std::move(melodies[i].song);
            if (!apply_phrase_counts(m, phrases[i])) {
                warn("paired song " + std::to_string(i) + " skipped: phrase counts do not sum to " +
                     std::to_string(m.notes.size()) + " notes");
                continue;
            }
            if (static_cast<int>(phrases[i].size()) != lyrics[i].sentence_count()) {
                warn("paired song " + std::to_string(i) + " skipped: phrase count differs from sentence count");
                continue;
            }
            paired_lyrics.push_back(lyrics[i]);
            paired_melodies.push_back(tokenize_melody(m));
            paired_songs.push_back(std::move(m));
            if (have_align) paired_aligns.push_back(aligns[i]);
        }
    }
    report.paired_songs = static_cast<int>(paired_lyrics.size());

    int mean_len = options.fallback_phrase_len;
    if (!paired_songs.empty())
        mean_len = average_phrase_length(paired_songs);
    else if (!options.unpaired_midi_dir.empty())
        warn("no paired data; unpaired melodies use fallback phrase length " + std::to_string(mean_len));
    report.mean_phrase_len = mean_len;

    // unpaired melodies
    std::vector<TokenSeq> unpaired_melodies;
    if (!options.unpaired_midi_dir.empty()) {
        std::vector<std::string> files = list_midi_files(options.unpaired_midi_dir);
        std::vector<MelodyResult> melodies = parse_and_normalize(files, options.midi_track);
        for (size_t i = 0; i < melodies.size(); ++i) {
            if (!melodies[i].ok) {
                warn(fs::path(files[i]).filename().string() + " skipped: " + melodies[i].error);
                continue;
            }
            MelodySong m = split_phrases_unpaired(melodies[i].song, mean_len);
            unpaired_melodies.push_back(tokenize_melody(m));
        }
    }
    report.unpaired_melody_songs = static_cast<int>(unpaired_melodies.size());

    // unpaired lyrics
    std::vector<TokenSeq> unpaired_lyrics;
    if (!options.unpaired_lyrics_file.empty())
        unpaired_lyrics = parse_lyrics_file(options.unpaired_lyrics_file);
    report.unpaired_lyric_songs = static_cast<int>(unpaired_lyrics.size());

    // vocabularies over everything seen per modality
    std::vector<TokenSeq> lyric_corpus = unpaired_lyrics;
    lyric_corpus.insert(lyric_corpus.end(), paired_lyrics.begin(), paired_lyrics.end());
    std::vector<TokenSeq> melody_corpus = unpaired_melodies;
    melody_corpus.insert(melody_corpus.end(), paired_melodies.begin(), paired_melodies.end());
    Vocabulary lyric_vocab = Vocabulary::build(lyric_corpus, options.min_count);
    Vocabulary melody_vocab = Vocabulary::build(melody_corpus, options.min_count);
    report.lyric_vocab_size = lyric_vocab.size();
    report.melody_vocab_size = melody_vocab.size();

    const fs::path out(options.out_dir);
    lyric_vocab.save((out / "lyric.vocab").string());
    melody_vocab.save((out / "melody.vocab").string());
    write_token_file((out / "unpaired.lyric.tok").string(), unpaired_lyrics);
    write_token_file((out / "unpaired.melody.tok").string(), unpaired_melodies);
    write_token_file((out / "paired.lyric.tok").string(), paired_lyrics);
    write_token_file((out / "paired.melody.tok").string(), paired_melodies);
    if (!paired_aligns.empty())
        write_alignment_file((out / "paired.align.txt").string(), paired_aligns);

    json j = {{"unpaired_lyric_songs", report.unpaired_lyric_songs},
              {"unpaired_melody_songs", report.unpaired_melody_songs},
              {"paired_songs", report.paired_songs},
              {"lyric_vocab_size", report.lyric_vocab_size},
              {"melody_vocab_size", report.melody_vocab_size},
              {"mean_phrase_len", report.mean_phrase_len},
              {"warnings", report.warnings}};
    std::ofstream rep(out / "preprocess.json");
    rep << j.dump(2) << '\n';
    return report;
}

Corpora load_corpora(const std::string& data_dir) {
    const fs::path dir(data_dir);
    Corpora c;
    c.lyric_vocab = Vocabulary::load((dir / "lyric.vocab").string());
    c.melody_vocab = Vocabulary::load((dir / "melody.vocab").string());
    c.unpaired_lyrics = read_token_file((dir / "unpaired.lyric.tok").string());
    c.unpaired_melodies = read_token_file((dir / "unpaired.melody.tok").string());

    std::vector<TokenSeq> pl = read_token_file((dir / "paired.lyric.tok").string());
    std::vector<TokenSeq> pm = read_token_file((dir / "paired.melody.tok").string());
    if (pl.size() != pm.size()) throw std::runtime_error("load_corpora: paired token files disagree");
    std::vector<Alignment> aligns;
    bool have_align = fs::exists(dir / "paired.align.txt");
    if (have_align) {
        aligns = read_alignment_file((dir / "paired.align.txt").string());
        if (aligns.size() != pl.size()) throw std::runtime_error("load_corpora: alignment count mismatch");
    }
    for (size_t i = 0; i < pl.size(); ++i) {
        PairedSong p;
        p.lyric = pl[i];
        p.melody = pm[i];
        if (have_align) {
            p.alignment = aligns[i];
            p.has_alignment = true;
        }
        c.paired.push_back(std::move(p));
    }
    return c;
}

// --- train -----------------------------------------------------------------------

TrainReport cmd_train(const TrainCmdOptions& options) {
    Corpora corpora = load_corpora(options.data_dir);

    Seq2SeqModel model = [&] {
        if (!options.init_checkpoint.empty()) {
            Seq2SeqModel m = Seq2SeqModel::load_checkpoint(options.init_checkpoint);
            if (m.config().lyric_vocab != corpora.lyric_vocab.size() ||
                m.config().melody_vocab != corpora.melody_vocab.size())
                throw std::runtime_error("train: checkpoint vocabulary sizes do not match the data dir");
            return m;
        }
        ModelConfig cfg;
        cfg.layers = options.layers;
        cfg.hidden = options.hidden;
        cfg.heads = options.heads;
        cfg.ffn = options.ffn;
        cfg.max_len = options.max_len;
        cfg.lyric_vocab = corpora.lyric_vocab.size();
        cfg.melody_vocab = corpora.melody_vocab.size();
        return Seq2SeqModel(cfg, options.seed);
    }();
    model.set_alpha(options.alpha);
    model.set_dropout(options.dropout);
    model.set_squared_att_penalty(options.squared_att_penalty);

    TrainOptions topt;
    topt.mode = options.mode;
    topt.finetune_direction = options.direction;
    topt.max_steps = options.max_steps;
    topt.batch_size = options.batch_size;
    topt.lr = options.lr;
    topt.warmup_steps = options.warmup_steps;
    topt.mask_ratio = options.mask_ratio;
    topt.seed = options.seed;
    if (!options.checkpoint_out.empty()) topt.abort_checkpoint = options.checkpoint_out + ".abort";

    std::ofstream log_out;
    if (!options.log_out.empty()) {
        log_out.open(options.log_out);
        if (!log_out) throw std::runtime_error("cannot write train log: " + options.log_out);
    }

    Trainer trainer(model, std::move(corpora), topt);
    trainer.run([&](const StepLog& entry) {
        if (!log_out.is_open()) return;
        json j = {{"step", entry.step},     {"term", mode_name(entry.term)},
                  {"loss", entry.loss},     {"nll", entry.nll},
                  {"l_att", entry.att_penalty}, {"lr", entry.lr}};
        log_out << j.dump() << '\n';
    });

    if (!options.checkpoint_out.empty()) model.save_checkpoint(options.checkpoint_out);

    TrainReport report;
    report.steps = trainer.steps_done();
    if (!trainer.log().empty()) {
        report.final_loss = trainer.log().back().loss;
        report.final_nll = trainer.log().back().nll;
    }
    return report;
}

// --- generate ---------------------------------------------------------------------

GenerateReport cmd_generate(const GenerateCmdOptions& options) {
    if (options.direction != Mode::LyricToMelody && options.direction != Mode::MelodyToLyric)
        throw std::invalid_argument("generate: direction must be l2m or m2l");
    const fs::path dir(options.data_dir);
    Vocabulary lyric_vocab = Vocabulary::load((dir / "lyric.vocab").string());
    Vocabulary melody_vocab = Vocabulary::load((dir / "melody.vocab").string());
    Seq2SeqModel model = Seq2SeqModel::load_checkpoint(options.checkpoint);
    if (model.config().lyric_vocab != lyric_vocab.size() ||
        model.config().melody_vocab != melody_vocab.size())
        throw std::runtime_error("generate: checkpoint vocabulary sizes do not match the data dir");

    const bool l2m = options.direction == Mode::LyricToMelody;
    const Vocabulary& src_vocab = l2m ? lyric_vocab : melody_vocab;
    const Vocabulary& tgt_vocab = l2m ? melody_vocab : lyric_vocab;

    std::vector<TokenSeq> sources = read_token_file(options.input_tokens);
    std::vector<TokenSeq> outputs;
    std::vector<SongAttention> attention;
    GenerateOptions gopt;
    gopt.strategy = options.strategy;
    gopt.top_k = options.top_k;

    for (size_t i = 0; i < sources.size(); ++i) {
        gopt.seed = options.seed * 0x9e3779b97f4a7c15ULL + i;
        GenerateResult r = generate(model, sources[i], options.direction, src_vocab, tgt_vocab, gopt);
        SongAttention sa;
        for (int snt = 0; snt < sources[i].sentence_count(); ++snt) {
            SentenceAttention sent;
            auto [slo, shi] = sources[i].sentence_content_span(snt);
            auto [tlo, thi] = r.output.sentence_content_span(snt);
            for (int k = slo; k <= shi && slo >= 0; ++k) sent.source_tokens.push_back(sources[i].tokens[k]);
            for (int k = tlo; k <= thi && tlo >= 0; ++k) sent.target_tokens.push_back(r.output.tokens[k]);
            sent.weights = r.sentence_attention[snt];
            sa.sentences.push_back(std::move(sent));
        }
        attention.push_back(std::move(sa));
        outputs.push_back(std::move(r.output));
    }

    write_token_file(options.output_tokens, outputs);
    if (!options.attention_out.empty()) write_attention_json(options.attention_out, attention);
    if (!options.midi_out_dir.empty() && l2m) {
        fs::create_directories(options.midi_out_dir);
        for (size_t i = 0; i < outputs.size(); ++i) {
            char name[16];
            std::snprintf(name, sizeof name, "%04zu.mid", i);
            write_midi_file((fs::path(options.midi_out_dir) / name).string(),
                            detokenize_melody(outputs[i]));
        }
    }
    return GenerateReport{static_cast<int>(outputs.size())};
}

// --- align ------------------------------------------------------------------------

AlignReport cmd_align(const AlignCmdOptions& options) {
    std::vector<SongAttention> songs = read_attention_json(options.attention_json);

    json out_songs = json::array();
    AlignReport report;
    for (const SongAttention& song : songs) {
        json jsents = json::array();
        json song_pairs = json::array();
        int src_off = 0, tgt_off = 0;
        for (const SentenceAttention& sent : song.sentences) {
            Alignment alignment;
            double score = 0.0;
            if (!sent.weights.empty()) {
                if (options.use_dp) {
                    DpAlignResult r = dp_align(sent.weights);
                    alignment = std::move(r.alignment);
                    score = r.score;
                } else {
                    alignment = greedy_align(sent.weights);
                    score = alignment_score(sent.weights, alignment);
                }
            }
            json jpairs = json::array();
            for (const SpanPair& p : alignment.pairs) {
                jpairs.push_back({{"source", {p.src_lo, p.src_hi}}, {"target", {p.tgt_lo, p.tgt_hi}}});
                song_pairs.push_back({{"source", {p.src_lo + src_off, p.src_hi + src_off}},
                                      {"target", {p.tgt_lo + tgt_off, p.tgt_hi + tgt_off}}});
            }
            jsents.push_back({{"score", score}, {"pairs", std::move(jpairs)}});
            report.total_score += score;
            src_off += static_cast<int>(sent.source_tokens.size());
            tgt_off += static_cast<int>(sent.target_tokens.size());
        }
        out_songs.push_back({{"sentences", std::move(jsents)}, {"song_pairs", std::move(song_pairs)}});
        ++report.songs;
    }

    json j = {{"version", 1}, {"method", options.use_dp ? "dp" : "greedy"}, {"songs", std::move(out_songs)}};
    std::ofstream out(options.output_json);
    if (!out) throw std::runtime_error("cannot write alignment JSON: " + options.output_json);
    out << j.dump() << '\n';
    return report;
}

std::vector<Alignment> read_alignment_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open alignment JSON: " + path);
    json j;
    in >> j;
    std::vector<Alignment> out;
    for (const json& jsong : j.at("songs")) {
        Alignment a;
        for (const json& jp : jsong.at("song_pairs")) {
            SpanPair p;
            p.src_lo = jp.at("source")[0].get<int>();
            p.src_hi = jp.at("source")[1].get<int>();
            p.tgt_lo = jp.at("target")[0].get<int>();
            p.tgt_hi = jp.at("target")[1].get<int>();
            a.pairs.push_back(p);
        }
        out.push_back(std::move(a));
    }
    return out;
}

// --- eval -------------------------------------------------------------------------

EvalReport cmd_eval(const EvalCmdOptions& options) {
    EvalReport report;
    auto warn = [&](const std::string& w) { report.warnings.push_back(w); };

    if (!options.generated_tokens.empty() && !options.reference_tokens.empty()) {
        if (options.direction == Mode::LyricToMelody) {
            std::vector<TokenSeq> gen_tok = read_token_file(options.generated_tokens);
            std::vector<TokenSeq> ref_tok = read_token_file(options.reference_tokens);
            if (gen_tok.size() != ref_tok.size())
                throw std::invalid_argument("eval: generated and reference song counts differ");
            std::vector<MelodySong> gen, ref;
            for (size_t i = 0; i < gen_tok.size(); ++i) {
                try {
                    MelodySong g = detokenize_melody(gen_tok[i]);
                    MelodySong r = detokenize_melody(ref_tok[i]);
                    gen.push_back(std::move(g));
                    ref.push_back(std::move(r));
                } catch (const std::exception& e) {
                    warn("song " + std::to_string(i) + " skipped: " + e.what());
                }
            }
            if (!gen.empty()) {
                auto on_warn = [&](const std::string& w) { warn(w); };
                report.pitch_similarity =
                    distribution_similarity(gen, ref, HistogramKind::Pitch, on_warn);
                report.duration_similarity =
                    distribution_similarity(gen, ref, HistogramKind::Duration, on_warn);
                std::vector<double> md(gen.size());
                std::vector<std::string> md_err(gen.size());
                parallel_for(gen.size(), [&](size_t i) {
                    try {
                        md[i] = melody_distance(gen[i], ref[i]);
                    } catch (const std::exception& e) {
                        md[i] = -1.0;
                        md_err[i] = e.what();
                    }
                });
                double sum = 0.0;
                long long used = 0;
                for (size_t i = 0; i < md.size(); ++i) {
                    if (md[i] < 0.0) {
                        warn("song " + std::to_string(i) + " melody distance skipped: " + md_err[i]);
                        continue;
                    }
                    sum += md[i];
                    ++used;
                }
                if (used > 0) report.melody_distance = sum / static_cast<double>(used);
            }
        } else {
            warn("pitch/duration/melody-distance metrics apply to melody outputs only");
        }
    }

    if (!options.predicted_align_json.empty() && !options.reference_align_file.empty()) {
        std::vector<Alignment> pred = read_alignment_json(options.predicted_align_json);
        std::vector<Alignment> ref = read_alignment_file(options.reference_align_file);
        if (options.direction == Mode::MelodyToLyric) {
            // reference files store lyric as source; flip for melody-source runs
            for (Alignment& a : ref)
                for (SpanPair& p : a.pairs)
                    p = SpanPair{p.tgt_lo, p.tgt_hi, p.src_lo, p.src_hi};
        }
        report.alignment_accuracy = alignment_accuracy(pred, ref);
    }

    if (!options.checkpoint.empty() && !options.ppl_lyrics.empty() && !options.ppl_melodies.empty()) {
        const fs::path dir(options.data_dir);
        Vocabulary lyric_vocab = Vocabulary::load((dir / "lyric.vocab").string());
        Vocabulary melody_vocab = Vocabulary::load((dir / "melody.vocab").string());
        Seq2SeqModel model = Seq2SeqModel::load_checkpoint(options.checkpoint);
        std::vector<TokenSeq> lyr = read_token_file(options.ppl_lyrics);
        std::vector<TokenSeq> mel = read_token_file(options.ppl_melodies);
        if (lyr.size() != mel.size()) throw std::invalid_argument("eval: ppl token files disagree");
        std::vector<PairedSong> paired(lyr.size());
        for (size_t i = 0; i < lyr.size(); ++i) {
            paired[i].lyric = lyr[i];
            paired[i].melody = mel[i];
        }
        std::vector<Sample> samples =
            supervised_samples(paired, options.direction, lyric_vocab, melody_vocab, false);
        report.perplexity = model.corpus_perplexity(samples, options.direction);
    }

    if (!options.report_out.empty()) {
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        json j = {{"pd", opt(report.pitch_similarity)},
                  {"dd", opt(report.duration_similarity)},
                  {"md", opt(report.melody_distance)},
                  {"ppl", opt(report.perplexity)},
                  {"alignment_accuracy", opt(report.alignment_accuracy)},
                  {"warnings", report.warnings}};
        std::ofstream out(options.report_out);
        if (!out) throw std::runtime_error("cannot write eval report: " + options.report_out);
        out << j.dump(2) << '\n';
    }
    return report;
}

}  // namespace song
