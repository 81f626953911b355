#include "song/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace song {

namespace {

Alignment swap_sides(const Alignment& a) {
    Alignment out;
    out.pairs.reserve(a.pairs.size());
    for (const SpanPair& p : a.pairs)
        out.pairs.push_back(SpanPair{p.tgt_lo, p.tgt_hi, p.src_lo, p.src_hi});
    return out;
}

}  // namespace

std::vector<Sample> supervised_samples(const std::vector<PairedSong>& paired, Mode direction,
                                       const Vocabulary& lyric_vocab, const Vocabulary& melody_vocab,
                                       bool with_alignment) {
    if (direction != Mode::LyricToMelody && direction != Mode::MelodyToLyric)
        throw std::invalid_argument("supervised_samples: direction must be lyric2melody or melody2lyric");
    std::vector<Sample> out;
    out.reserve(paired.size());
    for (const PairedSong& p : paired) {
        bool use_align = with_alignment && p.has_alignment;
        if (direction == Mode::LyricToMelody) {
            out.push_back(make_supervised_sample(p.lyric, p.melody, lyric_vocab, melody_vocab,
                                                 use_align ? &p.alignment : nullptr));
        } else {
            Alignment swapped = use_align ? swap_sides(p.alignment) : Alignment{};
            out.push_back(make_supervised_sample(p.melody, p.lyric, melody_vocab, lyric_vocab,
                                                 use_align ? &swapped : nullptr));
        }
    }
    return out;
}

Trainer::Trainer(Seq2SeqModel& model, Corpora corpora, TrainOptions options)
    : model_(model), corpora_(std::move(corpora)), options_(options), mask_rng_(options.seed) {
    if (options_.mode == TrainMode::Pretrain) {
        terms_ = {Mode::LyricToLyric, Mode::MelodyToMelody, Mode::LyricToMelody, Mode::MelodyToLyric};
        if (corpora_.unpaired_lyrics.empty() || corpora_.unpaired_melodies.empty() || corpora_.paired.empty())
            throw std::invalid_argument("pretrain needs unpaired lyrics, unpaired melodies and paired songs");
    } else {
        terms_ = {options_.finetune_direction};
        if (corpora_.paired.empty())
            throw std::invalid_argument("finetune needs paired songs");
    }
    if (options_.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (options_.max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");

    Rng seeder(options_.seed);
    lyric_cursor_.rng = seeder.fork(1);
    melody_cursor_.rng = seeder.fork(2);
    paired_cursor_.rng = seeder.fork(3);
    mask_rng_ = seeder.fork(4);
    update_counts_.assign(model_.all_params().size(), 0);
}

std::vector<size_t> Trainer::draw(Cursor& cursor, size_t corpus_size, int count) {
    std::vector<size_t> picked;
    picked.reserve(count);
    for (int i = 0; i < count; ++i) {
        if (cursor.next >= cursor.order.size()) {
            cursor.order.resize(corpus_size);
            for (size_t k = 0; k < corpus_size; ++k) cursor.order[k] = k;
            cursor.rng.shuffle(cursor.order);
            cursor.next = 0;
        }
        picked.push_back(cursor.order[cursor.next++]);
    }
    return picked;
}

std::vector<Sample> Trainer::assemble(Mode term) {
    std::vector<Sample> batch;
    const int b = options_.batch_size;
    switch (term) {
        case Mode::LyricToLyric:
            for (size_t idx : draw(lyric_cursor_, corpora_.unpaired_lyrics.size(), b))
                batch.push_back(make_mass_sample(corpora_.unpaired_lyrics[idx], corpora_.lyric_vocab,
                                                 options_.mask_ratio, mask_rng_.next_u64()));
            break;
        case Mode::MelodyToMelody:
            for (size_t idx : draw(melody_cursor_, corpora_.unpaired_melodies.size(), b))
                batch.push_back(make_mass_sample(corpora_.unpaired_melodies[idx], corpora_.melody_vocab,
                                                 options_.mask_ratio, mask_rng_.next_u64()));
            break;
        case Mode::LyricToMelody:
        case Mode::MelodyToLyric: {
            std::vector<PairedSong> chosen;
            for (size_t idx : draw(paired_cursor_, corpora_.paired.size(), b))
                chosen.push_back(corpora_.paired[idx]);
            batch = supervised_samples(chosen, term, corpora_.lyric_vocab, corpora_.melody_vocab);
            break;
        }
    }
    return batch;
}

void Trainer::adam_update(Mode term, double lr_now) {
    std::vector<Param*> all = model_.all_params();
    std::vector<Param*> routed = model_.params_for(term);

    for (Param* p : routed) {
        // locate the registry slot for the per-param step count
        size_t slot = 0;
        for (; slot < all.size(); ++slot)
            if (all[slot] == p) break;
        long long t = ++update_counts_[slot];

        if (p->adam_m.empty()) {
            p->adam_m = Mat(p->w.rows, p->w.cols);
            p->adam_v = Mat(p->w.rows, p->w.cols);
        }
        const double b1 = options_.adam_beta1, b2 = options_.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (size_t i = 0; i < p->w.a.size(); ++i) {
            double g = p->g.a[i];
            p->adam_m.a[i] = b1 * p->adam_m.a[i] + (1.0 - b1) * g;
            p->adam_v.a[i] = b2 * p->adam_v.a[i] + (1.0 - b2) * g * g;
            double mhat = p->adam_m.a[i] / bc1;
            double vhat = p->adam_v.a[i] / bc2;
            p->w.a[i] -= lr_now * mhat / (std::sqrt(vhat) + options_.adam_eps);
        }
    }
}

StepLog Trainer::step() {
    Mode term = terms_[step_ % terms_.size()];
    std::vector<Sample> batch = assemble(term);

    for (Param* p : model_.params_for(term)) p->g.zero();

    ForwardStats stats;
    try {
        stats = model_.forward_backward(batch, term, true, options_.seed * 0x9e3779b9ULL + step_);
    } catch (const std::runtime_error&) {
        if (!options_.abort_checkpoint.empty()) model_.save_checkpoint(options_.abort_checkpoint);
        throw;
    }

    double lr_now = options_.lr;
    if (options_.warmup_steps > 0 && step_ < options_.warmup_steps)
        lr_now = options_.lr * static_cast<double>(step_ + 1) / options_.warmup_steps;
    adam_update(term, lr_now);

    StepLog entry{step_, term, stats.loss, stats.nll, stats.att_penalty, lr_now};
    log_.push_back(entry);
    ++step_;
    return entry;
}

void Trainer::run(const std::function<void(const StepLog&)>& on_step) {
    while (step_ < options_.max_steps) {
        StepLog entry = step();
        if (on_step) on_step(entry);
    }
}

}  // namespace song
