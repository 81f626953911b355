#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "song/align.hpp"
#include "song/mask.hpp"
#include "song/mat.hpp"
#include "song/tokens.hpp"
#include "song/vocab.hpp"

namespace song {

// Which encoder/decoder pair a batch flows through. Lyric and melody have
// fully separate parameter sets; transfer modes mix one encoder with the
// other modality's decoder.
enum class Mode { LyricToLyric, MelodyToMelody, LyricToMelody, MelodyToLyric };

const char* mode_name(Mode mode);
bool mode_uses_lyric_encoder(Mode mode);
bool mode_uses_lyric_decoder(Mode mode);

struct ModelConfig {
    int layers = 2;
    int hidden = 32;       // d_z
    int heads = 2;
    int ffn = 64;
    int lyric_vocab = 0;
    int melody_vocab = 0;
    int max_len = 1024;
    double dropout = 0.1;
    double alpha = 0.5;              // weight of the attention regularizer
    bool squared_att_penalty = false;

    void validate() const;
};

// One training/eval example, already numericalized. Decoder steps carry
// explicit positions and sentence ids so the same structure serves both
// full-sequence supervision and masked-span reconstruction.
struct Sample {
    std::vector<int> src_tokens;
    std::vector<int> src_sentences;
    std::vector<int> dec_tokens;      // teacher-forcing inputs, [EOS] first
    std::vector<int> dec_positions;
    std::vector<int> dec_sentences;
    std::vector<int> targets;         // predictions, same length as dec_tokens
    Mat attention_target;             // u over targets x src; empty when unsupervised
};

struct ForwardStats {
    double loss = 0.0;         // nll + alpha * att_penalty
    double nll = 0.0;          // mean per-token negative log-likelihood
    double att_penalty = 0.0;  // mean L_att over samples carrying a u map
    long long tokens = 0;
    std::vector<Mat> attention;  // per sample: last-layer head-averaged cross attention
};

// --- attention-constraint primitives ---------------------------------------

// Additive mask: 0 where target and source tokens share a sentence id,
// -infinity elsewhere.
Mat sentence_mask(const std::vector<int>& target_sentences, const std::vector<int>& source_sentences);

// Row-softmax(q k^T / sqrt(d) + mask). q rows are target tokens, k rows are
// source tokens; masked entries come out exactly 0. Throws when a row is
// fully masked.
Mat masked_attention(const Mat& q, const Mat& k, const Mat& mask);

// Expected attention u: each target row of a pair puts 1/T on its T source
// columns, rows outside any pair stay zero. Pairs are 1-based inclusive;
// overlapping target rows are rejected.
Mat target_attention_map(const std::vector<SpanPair>& pairs, int target_len, int source_len);

// Mean per-entry deviation between realized and expected attention:
// (1/(N*M)) * sum |A - u|, or squared differences when squared is set.
double attention_regularizer(const Mat& attention, const Mat& expected, bool squared = false);

// --- parameters --------------------------------------------------------------

struct Param {
    std::string name;
    Mat w, g;
    Mat adam_m, adam_v;  // lazily sized by the optimizer
};

struct LinearParams {
    Param weight, bias;  // y = x * weight + bias
};

struct LayerNormParams {
    Param gamma, beta;
};

struct AttentionParams {
    LinearParams query, key, value, output;
};

struct EncoderLayerParams {
    AttentionParams self_attn;
    LayerNormParams ln_self;
    LinearParams ff_in, ff_out;
    LayerNormParams ln_ff;
};

struct DecoderLayerParams {
    AttentionParams self_attn;
    LayerNormParams ln_self;
    AttentionParams cross_attn;
    LayerNormParams ln_cross;
    LinearParams ff_in, ff_out;
    LayerNormParams ln_ff;
};

struct EncoderParams {
    Param embedding;
    std::vector<EncoderLayerParams> layers;
};

struct DecoderParams {
    Param embedding;
    std::vector<DecoderLayerParams> layers;
    LinearParams out_proj;
};

class Seq2SeqModel {
public:
    Seq2SeqModel(ModelConfig config, uint64_t init_seed);

    const ModelConfig& config() const { return config_; }
    // Training knobs that may differ between runs on the same weights.
    void set_alpha(double alpha);
    void set_dropout(double dropout);
    void set_squared_att_penalty(bool squared) { config_.squared_att_penalty = squared; }

    // Loss and attention only; parameters and gradients untouched.
    ForwardStats forward_loss(const std::vector<Sample>& batch, Mode mode,
                              bool training = false, uint64_t dropout_seed = 0) const;

    // Forward plus exact reverse-mode gradients accumulated into each touched
    // Param::g. Gradients of the stacks the mode does not route through are
    // not written at all.
    ForwardStats forward_backward(const std::vector<Sample>& batch, Mode mode,
                                  bool training = false, uint64_t dropout_seed = 0);

    // exp(mean token NLL) under teacher forcing; the regularizer is ignored.
    double corpus_perplexity(const std::vector<Sample>& dataset, Mode mode) const;

    // Inference: next-token distributions for every decoder step (rows) and
    // the head-averaged last-layer cross attention. targets are ignored.
    std::pair<Mat, Mat> forward_probs(const Sample& sample, Mode mode) const;

    std::vector<Param*> all_params();
    std::vector<const Param*> all_params() const;
    // Parameters of the encoder/decoder pair a mode routes through.
    std::vector<Param*> params_for(Mode mode);
    void zero_grads();

    const EncoderParams& encoder(Mode mode) const;
    const DecoderParams& decoder(Mode mode) const;
    EncoderParams& lyric_encoder() { return lyric_enc_; }
    EncoderParams& melody_encoder() { return melody_enc_; }
    DecoderParams& lyric_decoder() { return lyric_dec_; }
    DecoderParams& melody_decoder() { return melody_dec_; }

    void save_checkpoint(const std::string& path) const;
    static Seq2SeqModel load_checkpoint(const std::string& path);

private:
    ModelConfig config_;
    EncoderParams lyric_enc_, melody_enc_;
    DecoderParams lyric_dec_, melody_dec_;
};

// --- sample builders ----------------------------------------------------------

// Song-level masked reconstruction sample (encoder sees [MASK] spans, decoder
// rebuilds them at their original positions).
Sample make_mass_sample(const TokenSeq& song, const Vocabulary& vocab, double ratio, uint64_t seed);
Sample make_mass_sample(const MaskedPair& masked, const Vocabulary& vocab);

// Paired translation sample. When a content-token alignment is given (1-based
// over non-[SEP] tokens of each side), it is expanded to a full-sequence u
// map with each [SEP] aligned to its counterpart.
Sample make_supervised_sample(const TokenSeq& source, const TokenSeq& target,
                              const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                              const Alignment* content_alignment = nullptr);

}  // namespace song
