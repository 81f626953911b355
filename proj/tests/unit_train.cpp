#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "doctest.h"
#include "fixtures.hpp"
#include "song/train.hpp"

using namespace song;

namespace {

ModelConfig fixture_config(const fixtures::FixtureCorpus& corpus) {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 32;
    cfg.heads = 2;
    cfg.ffn = 64;
    cfg.lyric_vocab = corpus.lyric_vocab.size();
    cfg.melody_vocab = corpus.melody_vocab.size();
    cfg.dropout = 0.0;
    cfg.alpha = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("pretraining cycles the four loss terms round-robin") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 6, 8);
    Seq2SeqModel model(fixture_config(corpus), 1);
    TrainOptions opts;
    opts.mode = TrainMode::Pretrain;
    opts.max_steps = 8;
    opts.batch_size = 2;
    opts.seed = 5;
    Trainer trainer(model, corpus.corpora(), opts);
    trainer.run();
    const std::vector<StepLog>& log = trainer.log();
    REQUIRE(log.size() == 8);
    CHECK(log[0].term == Mode::LyricToLyric);
    CHECK(log[1].term == Mode::MelodyToMelody);
    CHECK(log[2].term == Mode::LyricToMelody);
    CHECK(log[3].term == Mode::MelodyToLyric);
    CHECK(log[4].term == Mode::LyricToLyric);
    // supervised terms carry an attention penalty, masked terms do not
    CHECK(log[0].att_penalty == 0.0);
    CHECK(log[2].att_penalty > 0.0);
}

TEST_CASE("learning rate warms up linearly then stays flat") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 4, 6);
    Seq2SeqModel model(fixture_config(corpus), 2);
    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    opts.finetune_direction = Mode::LyricToMelody;
    opts.max_steps = 12;
    opts.batch_size = 2;
    opts.warmup_steps = 8;
    opts.lr = 4e-4;
    opts.seed = 3;
    Trainer trainer(model, corpus.corpora(), opts);
    trainer.run();
    for (int t = 0; t < 8; ++t)
        CHECK(trainer.log()[t].lr == doctest::Approx(4e-4 * (t + 1) / 8.0));
    CHECK(trainer.log()[10].lr == doctest::Approx(4e-4));
}

TEST_CASE("training is deterministic for a fixed seed") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 6, 8);
    auto run = [&]() {
        Seq2SeqModel model(fixture_config(corpus), 9);
        TrainOptions opts;
        opts.mode = TrainMode::Pretrain;
        opts.max_steps = 10;
        opts.batch_size = 2;
        opts.seed = 21;
        Trainer trainer(model, corpus.corpora(), opts);
        trainer.run();
        std::vector<double> losses;
        for (const StepLog& e : trainer.log()) losses.push_back(e.loss);
        return losses;
    };
    std::vector<double> first = run();
    std::vector<double> second = run();
    REQUIRE(first.size() == second.size());
    for (size_t i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
}

TEST_CASE("full-batch fine-tuning decreases the loss monotonically after warmup") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 10, 4);
    Seq2SeqModel model(fixture_config(corpus), 7);
    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    opts.finetune_direction = Mode::LyricToMelody;
    opts.max_steps = 70;
    opts.batch_size = 10;  // the whole fixture every step: loss is the true objective
    opts.warmup_steps = 20;
    opts.seed = 11;
    Trainer trainer(model, corpus.corpora(), opts);
    trainer.run();
    const std::vector<StepLog>& log = trainer.log();
    for (size_t t = 20; t + 1 < log.size(); ++t)
        CHECK(log[t + 1].loss < log[t].loss);
}

TEST_CASE("fine-tuning reduces perplexity on the training pairs") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 8, 4);
    Seq2SeqModel model(fixture_config(corpus), 13);
    Corpora data = corpus.corpora();
    std::vector<Sample> eval =
        supervised_samples(data.paired, Mode::LyricToMelody, data.lyric_vocab, data.melody_vocab, false);
    double before = model.corpus_perplexity(eval, Mode::LyricToMelody);
    CHECK(before >= 1.0);

    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    opts.finetune_direction = Mode::LyricToMelody;
    opts.max_steps = 150;
    opts.batch_size = 8;
    opts.warmup_steps = 30;
    opts.seed = 17;
    Trainer trainer(model, std::move(data), opts);
    trainer.run();

    double after = model.corpus_perplexity(eval, Mode::LyricToMelody);
    CHECK(after >= 1.0);  // perplexity can never drop below one
    CHECK(after < before * 0.5);
}

TEST_CASE("mode routing in finetune: only the routed stacks move") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 4, 4);
    Seq2SeqModel model(fixture_config(corpus), 19);

    // snapshot the parameters that must stay frozen under l2m fine-tuning
    std::vector<double> melody_enc_before = model.melody_encoder().embedding.w.a;
    std::vector<double> lyric_dec_before = model.lyric_decoder().out_proj.weight.w.a;

    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    opts.finetune_direction = Mode::LyricToMelody;
    opts.max_steps = 5;
    opts.batch_size = 2;
    opts.seed = 23;
    Trainer trainer(model, corpus.corpora(), opts);
    trainer.run();

    CHECK(model.melody_encoder().embedding.w.a == melody_enc_before);
    CHECK(model.lyric_decoder().out_proj.weight.w.a == lyric_dec_before);
}

TEST_CASE("a diverging run aborts and leaves a checkpoint") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 4, 4);
    Seq2SeqModel model(fixture_config(corpus), 29);
    for (double& v : model.lyric_encoder().embedding.w.a) v = 1e308;

    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    opts.finetune_direction = Mode::LyricToMelody;
    opts.max_steps = 3;
    opts.batch_size = 2;
    opts.seed = 31;
    opts.abort_checkpoint = "abort_ckpt.tmp.json";
    Trainer trainer(model, corpus.corpora(), opts);
    CHECK_THROWS_AS(trainer.run(), std::runtime_error);
    CHECK(std::filesystem::exists(opts.abort_checkpoint));
    std::remove(opts.abort_checkpoint.c_str());
}

TEST_CASE("trainer validates its corpora") {
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus(7, 4, 4);
    Seq2SeqModel model(fixture_config(corpus), 37);
    Corpora no_paired = corpus.corpora();
    no_paired.paired.clear();
    TrainOptions opts;
    opts.mode = TrainMode::Finetune;
    CHECK_THROWS_AS(Trainer(model, no_paired, opts), std::invalid_argument);
    opts.mode = TrainMode::Pretrain;
    CHECK_THROWS_AS(Trainer(model, no_paired, opts), std::invalid_argument);
}
