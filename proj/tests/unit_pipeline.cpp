#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "fixtures.hpp"
#include "song/pipeline.hpp"

using namespace song;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("songlab_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

PreprocessOptions fixture_preprocess_options(const std::string& raw, const std::string& out) {
    PreprocessOptions o;
    o.unpaired_midi_dir = raw + "/unpaired_midi";
    o.unpaired_lyrics_file = raw + "/unpaired_lyrics.txt";
    o.paired_midi_dir = raw + "/paired_midi";
    o.paired_lyrics_file = raw + "/paired_lyrics.txt";
    o.paired_phrases_file = raw + "/paired_phrases.txt";
    o.paired_align_file = raw + "/paired_align.txt";
    o.out_dir = out;
    o.seed = 1;
    return o;
}

}  // namespace

TEST_CASE("preprocess emits tokens whose first melody line starts with the rest fragment") {
    TempDir tmp("pre");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);

    PreprocessReport report = cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out")));
    CHECK(report.unpaired_melody_songs == 20);
    CHECK(report.unpaired_lyric_songs == 20);
    CHECK(report.paired_songs == 10);
    CHECK(report.warnings.empty());

    std::string first_line;
    std::ifstream tok(tmp.str("out") + "/unpaired.melody.tok");
    REQUIRE(std::getline(tok, first_line));
    CHECK(first_line.substr(0, 20) == "R 7/16 G3 1/16 E4 1/");
}

TEST_CASE("preprocess is byte-identical across reruns with the same seed") {
    TempDir tmp("det");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);

    cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out1")));
    cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out2")));
    for (const char* name : {"lyric.vocab", "melody.vocab", "unpaired.lyric.tok", "unpaired.melody.tok",
                             "paired.lyric.tok", "paired.melody.tok", "paired.align.txt",
                             "preprocess.json"}) {
        CHECK(read_file(tmp.str("out1") + "/" + name) == read_file(tmp.str("out2") + "/" + name));
    }
}

TEST_CASE("corrupt MIDI files are skipped with a warning, not an error") {
    TempDir tmp("corrupt");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);
    std::ofstream bad(tmp.str("raw") + "/unpaired_midi/0000a_broken.mid", std::ios::binary);
    bad << "this is not midi";
    bad.close();

    PreprocessReport report = cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out")));
    CHECK(report.unpaired_melody_songs == 20);  // the broken file dropped, the rest kept
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("broken") != std::string::npos);
}

TEST_CASE("load_corpora round-trips what preprocess wrote") {
    TempDir tmp("load");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);
    cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out")));

    Corpora c = load_corpora(tmp.str("out"));
    CHECK(c.unpaired_lyrics.size() == 20);
    CHECK(c.unpaired_melodies.size() == 20);
    REQUIRE(c.paired.size() == 10);
    CHECK(c.paired[0].has_alignment);
    // paired token sequences reproduce the fixture's own tokenization
    for (size_t i = 0; i < c.paired.size(); ++i) {
        CHECK(c.paired[i].melody.tokens == corpus.paired[i].melody_tokens.tokens);
        CHECK(c.paired[i].lyric.tokens == corpus.paired[i].lyric.tokens);
        CHECK(c.paired[i].alignment == corpus.paired[i].alignment);
    }
}

TEST_CASE("attention and alignment JSON files round-trip") {
    TempDir tmp("json");
    Rng rng(3);
    std::vector<SongAttention> songs(2);
    for (SongAttention& song : songs) {
        for (int s = 0; s < 2; ++s) {
            SentenceAttention sent;
            sent.source_tokens = {"a", "b", "c"};
            sent.target_tokens = {"x", "y"};
            sent.weights = fixtures::random_attention(rng, 2, 3);
            song.sentences.push_back(std::move(sent));
        }
    }
    write_attention_json(tmp.str("att.json"), songs);
    std::vector<SongAttention> back = read_attention_json(tmp.str("att.json"));
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].sentences.size() == 2);
        for (size_t s = 0; s < 2; ++s) {
            CHECK(back[i].sentences[s].source_tokens == songs[i].sentences[s].source_tokens);
            CHECK(back[i].sentences[s].weights.a == songs[i].sentences[s].weights.a);
        }
    }

    AlignCmdOptions al;
    al.attention_json = tmp.str("att.json");
    al.output_json = tmp.str("pairs.json");
    al.use_dp = true;
    AlignReport ar = cmd_align(al);
    CHECK(ar.songs == 2);
    std::vector<Alignment> song_level = read_alignment_json(tmp.str("pairs.json"));
    REQUIRE(song_level.size() == 2);
    // two sentences of 3 source and 2 target tokens each: spans cover 6 x 4
    CHECK(is_valid_tiling(song_level[0], 6, 4));
}

TEST_CASE("eval on ground truth as generated gives the identity metrics") {
    TempDir tmp("eval");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    std::vector<TokenSeq> melodies;
    for (const auto& p : corpus.paired) melodies.push_back(p.melody_tokens);
    write_token_file(tmp.str("ref.tok"), melodies);

    EvalCmdOptions ev;
    ev.direction = Mode::LyricToMelody;
    ev.generated_tokens = tmp.str("ref.tok");
    ev.reference_tokens = tmp.str("ref.tok");
    ev.report_out = tmp.str("report.json");
    EvalReport report = cmd_eval(ev);
    REQUIRE(report.pitch_similarity.has_value());
    REQUIRE(report.duration_similarity.has_value());
    REQUIRE(report.melody_distance.has_value());
    CHECK(*report.pitch_similarity == doctest::Approx(1.0));
    CHECK(*report.duration_similarity == doctest::Approx(1.0));
    CHECK(*report.melody_distance == doctest::Approx(0.0));
    CHECK(!report.perplexity.has_value());
    CHECK(fs::exists(tmp.str("report.json")));
}

TEST_CASE("alpha 0 and alpha 0.5 training runs log different attention penalties") {
    TempDir tmp("alpha");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);
    cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out")));

    auto train_with_alpha = [&](double alpha, const std::string& tag) {
        TrainCmdOptions t;
        t.data_dir = tmp.str("out");
        t.checkpoint_out = tmp.str("ck_" + tag + ".json");
        t.log_out = tmp.str("log_" + tag + ".jsonl");
        t.mode = TrainMode::Finetune;
        t.direction = Mode::LyricToMelody;
        t.alpha = alpha;
        t.max_steps = 6;
        t.batch_size = 4;
        t.seed = 5;
        t.dropout = 0.0;
        cmd_train(t);
        return read_file(t.log_out);
    };
    std::string log_a = train_with_alpha(0.0, "a0");
    std::string log_b = train_with_alpha(0.5, "a5");
    CHECK(log_a != log_b);
    CHECK(log_a.find("l_att") != std::string::npos);
}

TEST_CASE("generate writes tokens, attention, and MIDI that parse back") {
    TempDir tmp("gen");
    fixtures::FixtureCorpus corpus = fixtures::make_fixture_corpus();
    fixtures::write_raw_fixture(tmp.str("raw"), corpus);
    cmd_preprocess(fixture_preprocess_options(tmp.str("raw"), tmp.str("out")));

    TrainCmdOptions t;
    t.data_dir = tmp.str("out");
    t.checkpoint_out = tmp.str("ck.json");
    t.mode = TrainMode::Finetune;
    t.direction = Mode::LyricToMelody;
    t.max_steps = 4;
    t.batch_size = 4;
    t.seed = 9;
    cmd_train(t);

    GenerateCmdOptions g;
    g.data_dir = tmp.str("out");
    g.checkpoint = tmp.str("ck.json");
    g.input_tokens = tmp.str("out") + "/paired.lyric.tok";
    g.output_tokens = tmp.str("gen.tok");
    g.attention_out = tmp.str("att.json");
    g.midi_out_dir = tmp.str("midi");
    g.direction = Mode::LyricToMelody;
    GenerateReport gr = cmd_generate(g);
    CHECK(gr.songs == 10);

    std::vector<TokenSeq> outputs = read_token_file(tmp.str("gen.tok"));
    std::vector<TokenSeq> sources = read_token_file(tmp.str("out") + "/paired.lyric.tok");
    REQUIRE(outputs.size() == sources.size());
    for (size_t i = 0; i < outputs.size(); ++i)
        CHECK(outputs[i].sentence_count() == sources[i].sentence_count());
    CHECK(fs::exists(tmp.str("midi") + "/0000.mid"));
    CHECK(read_attention_json(tmp.str("att.json")).size() == 10);
}
