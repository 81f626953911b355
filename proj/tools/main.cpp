#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "song/pipeline.hpp"

namespace {

using song::Mode;

Mode parse_direction(const std::string& d) {
    if (d == "l2m") return Mode::LyricToMelody;
    if (d == "m2l") return Mode::MelodyToLyric;
    throw CLI::ValidationError("--direction must be l2m or m2l");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"songlab: lyric<->melody sequence modeling pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file with one [subcommand] section per command; "
                   "command-line flags override it");

    // --- preprocess ---
    song::PreprocessOptions pre;
    CLI::App* cpre = app.add_subcommand("preprocess", "tokenize MIDI and lyric corpora, build vocabularies");
    cpre->add_option("--midi-dir", pre.unpaired_midi_dir, "directory of unpaired melody MIDI files");
    cpre->add_option("--lyrics", pre.unpaired_lyrics_file, "unpaired lyrics file (blank line between songs)");
    cpre->add_option("--paired-midi-dir", pre.paired_midi_dir, "directory of paired melody MIDI files");
    cpre->add_option("--paired-lyrics", pre.paired_lyrics_file, "paired lyrics file");
    cpre->add_option("--paired-phrases", pre.paired_phrases_file, "notes-per-phrase counts, one song per line");
    cpre->add_option("--paired-align", pre.paired_align_file, "content-token alignments, one song per line");
    cpre->add_option("--out-dir", pre.out_dir, "output directory")->required();
    cpre->add_option("--track", pre.midi_track, "melody track index in the MIDI files");
    cpre->add_option("--min-count", pre.min_count, "minimum token frequency kept in the vocabulary");
    cpre->add_option("--fallback-phrase-len", pre.fallback_phrase_len,
                     "phrase length when no paired data is present");
    cpre->add_option("--seed", pre.seed, "run seed recorded for reproducibility")->required();

    // --- train ---
    song::TrainCmdOptions tr;
    std::string tr_mode = "pretrain", tr_dir = "l2m";
    CLI::App* ctr = app.add_subcommand("train", "pre-train or fine-tune the model");
    ctr->add_option("--data-dir", tr.data_dir, "preprocess output directory")->required();
    ctr->add_option("--checkpoint", tr.checkpoint_out, "checkpoint file to write")->required();
    ctr->add_option("--init-checkpoint", tr.init_checkpoint, "checkpoint to warm-start from");
    ctr->add_option("--log", tr.log_out, "JSON-lines step log");
    ctr->add_option("--mode", tr_mode, "pretrain|finetune")->check(CLI::IsMember({"pretrain", "finetune"}));
    ctr->add_option("--direction", tr_dir, "l2m|m2l (finetune objective)");
    ctr->add_option("--layers", tr.layers, "encoder/decoder layers");
    ctr->add_option("--hidden", tr.hidden, "model width");
    ctr->add_option("--heads", tr.heads, "attention heads");
    ctr->add_option("--ffn", tr.ffn, "feed-forward width");
    ctr->add_option("--max-len", tr.max_len, "maximum sequence length");
    ctr->add_option("--dropout", tr.dropout, "dropout rate");
    ctr->add_option("--alpha", tr.alpha, "attention regularizer weight");
    ctr->add_flag("--squared-att-penalty", tr.squared_att_penalty,
                  "use squared differences in the attention regularizer");
    ctr->add_option("--mask-ratio", tr.mask_ratio, "fraction of each sentence masked in pre-training");
    ctr->add_option("--max-steps", tr.max_steps, "optimizer steps");
    ctr->add_option("--batch-size", tr.batch_size, "songs per step");
    ctr->add_option("--lr", tr.lr, "Adam learning rate");
    ctr->add_option("--warmup", tr.warmup_steps, "linear warmup steps");
    ctr->add_option("--seed", tr.seed, "training seed")->required();

    // --- generate ---
    song::GenerateCmdOptions gen;
    std::string gen_dir = "l2m", gen_strategy = "greedy";
    CLI::App* cgen = app.add_subcommand("generate", "decode melodies from lyrics or lyrics from melodies");
    cgen->add_option("--data-dir", gen.data_dir, "preprocess output directory (vocabularies)")->required();
    cgen->add_option("--checkpoint", gen.checkpoint, "trained checkpoint")->required();
    cgen->add_option("--input", gen.input_tokens, "source token file")->required();
    cgen->add_option("--out", gen.output_tokens, "generated token file")->required();
    cgen->add_option("--emit-attention", gen.attention_out, "attention matrices JSON");
    cgen->add_option("--emit-midi-dir", gen.midi_out_dir, "write generated melodies as MIDI files");
    cgen->add_option("--direction", gen_dir, "l2m|m2l");
    cgen->add_option("--strategy", gen_strategy, "greedy|topk")->check(CLI::IsMember({"greedy", "topk"}));
    cgen->add_option("--top-k", gen.top_k, "candidates kept when sampling");
    cgen->add_option("--seed", gen.seed, "sampling seed");

    // --- align ---
    song::AlignCmdOptions al;
    std::string al_method = "dp";
    CLI::App* cal = app.add_subcommand("align", "extract strict alignments from attention matrices");
    cal->add_option("--attention", al.attention_json, "attention JSON from generate")->required();
    cal->add_option("--out", al.output_json, "alignment JSON to write")->required();
    cal->add_option("--method", al_method, "dp|greedy")->check(CLI::IsMember({"dp", "greedy"}));

    // --- eval ---
    song::EvalCmdOptions ev;
    std::string ev_dir = "l2m";
    CLI::App* cev = app.add_subcommand("eval", "objective metrics report");
    cev->add_option("--report", ev.report_out, "report JSON to write")->required();
    cev->add_option("--generated", ev.generated_tokens, "generated melody token file");
    cev->add_option("--reference", ev.reference_tokens, "reference melody token file");
    cev->add_option("--pred-align", ev.predicted_align_json, "predicted alignment JSON");
    cev->add_option("--ref-align", ev.reference_align_file, "reference alignment text file");
    cev->add_option("--checkpoint", ev.checkpoint, "checkpoint for perplexity");
    cev->add_option("--data-dir", ev.data_dir, "preprocess output directory (vocabularies)");
    cev->add_option("--ppl-lyrics", ev.ppl_lyrics, "paired lyric token file for perplexity");
    cev->add_option("--ppl-melodies", ev.ppl_melodies, "paired melody token file for perplexity");
    cev->add_option("--direction", ev_dir, "l2m|m2l");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cpre->parsed()) {
            song::PreprocessReport r = song::cmd_preprocess(pre);
            for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << "preprocess: " << r.unpaired_lyric_songs << " unpaired lyric songs, "
                      << r.unpaired_melody_songs << " unpaired melodies, " << r.paired_songs
                      << " paired songs; vocab " << r.lyric_vocab_size << "/" << r.melody_vocab_size
                      << "; mean phrase length " << r.mean_phrase_len << '\n';
        } else if (ctr->parsed()) {
            tr.mode = tr_mode == "pretrain" ? song::TrainMode::Pretrain : song::TrainMode::Finetune;
            tr.direction = parse_direction(tr_dir);
            song::TrainReport r = song::cmd_train(tr);
            std::cout << "train: " << r.steps << " steps, final loss " << r.final_loss << " (nll "
                      << r.final_nll << ")\n";
        } else if (cgen->parsed()) {
            gen.direction = parse_direction(gen_dir);
            gen.strategy = gen_strategy == "greedy" ? song::GenerateOptions::Strategy::Greedy
                                                    : song::GenerateOptions::Strategy::TopK;
            song::GenerateReport r = song::cmd_generate(gen);
            std::cout << "generate: " << r.songs << " songs\n";
        } else if (cal->parsed()) {
            al.use_dp = al_method == "dp";
            song::AlignReport r = song::cmd_align(al);
            std::cout << "align: " << r.songs << " songs, total score " << r.total_score << '\n';
        } else if (cev->parsed()) {
            ev.direction = parse_direction(ev_dir);
            song::EvalReport r = song::cmd_eval(ev);
            for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
            auto show = [](const char* name, const std::optional<double>& v) {
                if (v) std::cout << name << " " << *v << '\n';
            };
            show("PD", r.pitch_similarity);
            show("DD", r.duration_similarity);
            show("MD", r.melody_distance);
            show("PPL", r.perplexity);
            show("alignment_accuracy", r.alignment_accuracy);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
