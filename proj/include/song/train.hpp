#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "song/align.hpp"
#include "song/model.hpp"
#include "song/rng.hpp"
#include "song/tokens.hpp"
#include "song/vocab.hpp"

namespace song {

struct PairedSong {
    TokenSeq lyric, melody;
    // Content-token alignment, lyric side as source spans and melody side as
    // target spans; empty when the pair has no annotation.
    Alignment alignment;
    bool has_alignment = false;
};

struct Corpora {
    Vocabulary lyric_vocab, melody_vocab;
    std::vector<TokenSeq> unpaired_lyrics;
    std::vector<TokenSeq> unpaired_melodies;
    std::vector<PairedSong> paired;
};

enum class TrainMode { Pretrain, Finetune };

struct TrainOptions {
    TrainMode mode = TrainMode::Pretrain;
    Mode finetune_direction = Mode::LyricToMelody;
    int max_steps = 1000;
    int batch_size = 4;
    double lr = 5e-4;
    int warmup_steps = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double mask_ratio = 0.5;
    uint64_t seed = 1;
    std::string abort_checkpoint;  // dumped if the loss goes non-finite
};

struct StepLog {
    int step = 0;
    Mode term = Mode::LyricToLyric;
    double loss = 0.0;
    double nll = 0.0;
    double att_penalty = 0.0;
    double lr = 0.0;
};

// Builds supervised translation samples for one direction; alignments ride
// along as attention targets unless with_alignment is false.
std::vector<Sample> supervised_samples(const std::vector<PairedSong>& paired, Mode direction,
                                       const Vocabulary& lyric_vocab, const Vocabulary& melody_vocab,
                                       bool with_alignment = true);

// Adam with linear warmup driving the four-term pre-training objective
// (masked lyric, masked melody, and the two supervised directions in
// round-robin) or a single supervised term when fine-tuning. Each step
// updates only the parameters its term routes through.
class Trainer {
public:
    Trainer(Seq2SeqModel& model, Corpora corpora, TrainOptions options);

    StepLog step();
    void run(const std::function<void(const StepLog&)>& on_step = {});

    const std::vector<StepLog>& log() const { return log_; }
    int steps_done() const { return step_; }
    const Corpora& corpora() const { return corpora_; }

private:
    struct Cursor {
        std::vector<size_t> order;
        size_t next = 0;
        Rng rng{0};
    };

    std::vector<size_t> draw(Cursor& cursor, size_t corpus_size, int count);
    std::vector<Sample> assemble(Mode term);
    void adam_update(Mode term, double lr_now);

    Seq2SeqModel& model_;
    Corpora corpora_;
    TrainOptions options_;
    std::vector<Mode> terms_;
    int step_ = 0;
    Cursor lyric_cursor_, melody_cursor_, paired_cursor_;
    Rng mask_rng_{0};
    std::vector<StepLog> log_;
    std::vector<long long> update_counts_;  // per param, for Adam bias correction
};

}  // namespace song
