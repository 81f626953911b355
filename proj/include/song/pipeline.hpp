#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "song/align.hpp"
#include "song/decode.hpp"
#include "song/model.hpp"
#include "song/train.hpp"

namespace song {

// --- shared file formats ------------------------------------------------------

// One song per line; each pair "a-b:c-d" maps lyric content tokens [a, b] to
// melody content tokens [c, d], 1-based inclusive.
std::vector<Alignment> read_alignment_file(const std::string& path);
void write_alignment_file(const std::string& path, const std::vector<Alignment>& alignments);

// Attention export: per song, per sentence, token strings plus the row-major
// weight matrix (targets in rows).
struct SentenceAttention {
    std::vector<std::string> source_tokens;
    std::vector<std::string> target_tokens;
    Mat weights;
};
struct SongAttention {
    std::vector<SentenceAttention> sentences;
};
void write_attention_json(const std::string& path, const std::vector<SongAttention>& songs);
std::vector<SongAttention> read_attention_json(const std::string& path);

// --- preprocess -----------------------------------------------------------------

struct PreprocessOptions {
    std::string unpaired_midi_dir;     // optional
    std::string unpaired_lyrics_file;  // optional
    std::string paired_midi_dir;       // optional, needs paired_lyrics_file
    std::string paired_lyrics_file;
    std::string paired_phrases_file;   // note counts per phrase, one song per line
    std::string paired_align_file;     // content-token alignments, optional
    std::string out_dir;
    int midi_track = 0;
    int min_count = 1;
    int fallback_phrase_len = 4;  // used when no paired data is present
    uint64_t seed = 1;
};

struct PreprocessReport {
    int unpaired_lyric_songs = 0;
    int unpaired_melody_songs = 0;
    int paired_songs = 0;
    int lyric_vocab_size = 0;
    int melody_vocab_size = 0;
    int mean_phrase_len = 0;
    std::vector<std::string> warnings;
};

// Emits into out_dir: lyric.vocab, melody.vocab, unpaired.lyric.tok,
// unpaired.melody.tok, paired.lyric.tok, paired.melody.tok, paired.align.txt
// and preprocess.json. Unreadable or corrupt MIDI files are skipped with a
// warning.
PreprocessReport cmd_preprocess(const PreprocessOptions& options);

// Loads what cmd_preprocess wrote.
Corpora load_corpora(const std::string& data_dir);

// --- train ------------------------------------------------------------------------

struct TrainCmdOptions {
    std::string data_dir;
    std::string checkpoint_out;
    std::string init_checkpoint;  // optional warm start
    std::string log_out;          // JSON lines, one StepLog per step
    TrainMode mode = TrainMode::Pretrain;
    Mode direction = Mode::LyricToMelody;  // finetune only
    int layers = 2;
    int hidden = 32;
    int heads = 2;
    int ffn = 64;
    int max_len = 1024;
    double dropout = 0.1;
    double alpha = 0.5;
    bool squared_att_penalty = false;
    double mask_ratio = 0.5;
    int max_steps = 200;
    int batch_size = 4;
    double lr = 5e-4;
    int warmup_steps = 100;
    uint64_t seed = 1;
};

struct TrainReport {
    int steps = 0;
    double final_loss = 0.0;
    double final_nll = 0.0;
};

TrainReport cmd_train(const TrainCmdOptions& options);

// --- generate ---------------------------------------------------------------------

struct GenerateCmdOptions {
    std::string data_dir;       // for the vocabularies
    std::string checkpoint;
    std::string input_tokens;   // source songs, token file
    std::string output_tokens;
    std::string attention_out;  // optional JSON export
    std::string midi_out_dir;   // optional, melody outputs only
    Mode direction = Mode::LyricToMelody;
    GenerateOptions::Strategy strategy = GenerateOptions::Strategy::Greedy;
    int top_k = 5;
    uint64_t seed = 0;
};

struct GenerateReport {
    int songs = 0;
};

GenerateReport cmd_generate(const GenerateCmdOptions& options);

// --- align ------------------------------------------------------------------------

struct AlignCmdOptions {
    std::string attention_json;
    std::string output_json;
    bool use_dp = true;  // false: greedy baseline
};

struct AlignReport {
    int songs = 0;
    double total_score = 0.0;
};

// Runs the aligner per sentence and also assembles whole-song content-token
// alignments (sentence offsets applied) for accuracy scoring.
AlignReport cmd_align(const AlignCmdOptions& options);

// Reads back the song-level alignments from cmd_align output.
std::vector<Alignment> read_alignment_json(const std::string& path);

// --- eval -------------------------------------------------------------------------

struct EvalCmdOptions {
    std::string report_out;
    // melody token files for PD/DD/MD (paired by line)
    std::string generated_tokens;
    std::string reference_tokens;
    // alignments for accuracy: predicted from cmd_align JSON, reference text
    std::string predicted_align_json;
    std::string reference_align_file;
    // teacher-forcing perplexity
    std::string checkpoint;
    std::string data_dir;
    std::string ppl_lyrics;   // token file
    std::string ppl_melodies; // token file
    Mode direction = Mode::LyricToMelody;
};

struct EvalReport {
    std::optional<double> pitch_similarity;
    std::optional<double> duration_similarity;
    std::optional<double> melody_distance;
    std::optional<double> perplexity;
    std::optional<double> alignment_accuracy;
    std::vector<std::string> warnings;
};

EvalReport cmd_eval(const EvalCmdOptions& options);

}  // namespace song
