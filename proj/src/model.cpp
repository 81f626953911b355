#include "song/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "song/rng.hpp"

namespace song {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLnEps = 1e-5;
}  // namespace

const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::LyricToLyric: return "lyric2lyric";
        case Mode::MelodyToMelody: return "melody2melody";
        case Mode::LyricToMelody: return "lyric2melody";
        case Mode::MelodyToLyric: return "melody2lyric";
    }
    return "?";
}

bool mode_uses_lyric_encoder(Mode mode) {
    return mode == Mode::LyricToLyric || mode == Mode::LyricToMelody;
}

bool mode_uses_lyric_decoder(Mode mode) {
    return mode == Mode::LyricToLyric || mode == Mode::MelodyToLyric;
}

void ModelConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("config: layers must be >= 1");
    if (heads < 1 || hidden % heads != 0)
        throw std::invalid_argument("config: hidden must be divisible by heads");
    if (ffn < 1) throw std::invalid_argument("config: ffn must be >= 1");
    if (lyric_vocab < Vocabulary::kNumSpecials || melody_vocab < Vocabulary::kNumSpecials)
        throw std::invalid_argument("config: vocabulary sizes not set");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("config: dropout must be in [0, 1)");
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
    if (max_len < 2) throw std::invalid_argument("config: max_len too small");
}

// --- attention-constraint primitives -----------------------------------------

Mat sentence_mask(const std::vector<int>& target_sentences, const std::vector<int>& source_sentences) {
    for (size_t i = 1; i < target_sentences.size(); ++i)
        if (target_sentences[i] < target_sentences[i - 1])
            throw std::invalid_argument("sentence_mask: target ids must be non-decreasing");
    for (size_t j = 1; j < source_sentences.size(); ++j)
        if (source_sentences[j] < source_sentences[j - 1])
            throw std::invalid_argument("sentence_mask: source ids must be non-decreasing");

    Mat m(static_cast<int>(target_sentences.size()), static_cast<int>(source_sentences.size()));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
            m(i, j) = target_sentences[i] == source_sentences[j] ? 0.0 : kNegInf;
    return m;
}

namespace {

// Row softmax over scores that may contain -inf; such entries become exact
// zeros. A fully masked row has no distribution to take and is an error.
Mat softmax_rows(const Mat& scores) {
    Mat p(scores.rows, scores.cols);
    for (int i = 0; i < scores.rows; ++i) {
        double mx = kNegInf;
        for (int j = 0; j < scores.cols; ++j) mx = std::max(mx, scores(i, j));
        if (mx == kNegInf)
            throw std::runtime_error("attention: row " + std::to_string(i) + " is fully masked");
        double sum = 0.0;
        for (int j = 0; j < scores.cols; ++j) {
            double e = std::exp(scores(i, j) - mx);
            p(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < scores.cols; ++j) p(i, j) /= sum;
    }
    return p;
}

}  // namespace

Mat masked_attention(const Mat& q, const Mat& k, const Mat& mask) {
    if (q.cols != k.cols) throw std::invalid_argument("masked_attention: query/key widths differ");
    Mat scores = matmul_nt(q, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    for (double& v : scores.a) v *= scale;
    if (!mask.empty()) {
        if (!mask.same_shape(scores)) throw std::invalid_argument("masked_attention: mask shape mismatch");
        for (size_t i = 0; i < scores.a.size(); ++i) scores.a[i] += mask.a[i];
    }
    return softmax_rows(scores);
}

Mat target_attention_map(const std::vector<SpanPair>& pairs, int target_len, int source_len) {
    Mat u(target_len, source_len);
    std::vector<bool> row_taken(target_len, false);
    for (const SpanPair& p : pairs) {
        if (p.src_lo < 1 || p.src_hi > source_len || p.tgt_lo < 1 || p.tgt_hi > target_len ||
            p.src_lo > p.src_hi || p.tgt_lo > p.tgt_hi)
            throw std::invalid_argument("target_attention_map: span out of bounds");
        double share = 1.0 / p.src_len();
        for (int i = p.tgt_lo; i <= p.tgt_hi; ++i) {
            if (row_taken[i - 1])
                throw std::invalid_argument("target_attention_map: overlapping alignment for target " +
                                            std::to_string(i));
            row_taken[i - 1] = true;
            for (int j = p.src_lo; j <= p.src_hi; ++j) u(i - 1, j - 1) = share;
        }
    }
    return u;
}

double attention_regularizer(const Mat& attention, const Mat& expected, bool squared) {
    if (!attention.same_shape(expected))
        throw std::invalid_argument("attention_regularizer: shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < attention.a.size(); ++i) {
        double d = attention.a[i] - expected.a[i];
        sum += squared ? d * d : std::abs(d);
    }
    return sum / static_cast<double>(attention.a.size());
}

// --- parameter plumbing -------------------------------------------------------

namespace {

void init_param(Param& p, const std::string& name, int rows, int cols) {
    p.name = name;
    p.w = Mat(rows, cols);
    p.g = Mat(rows, cols);
}

void init_linear(LinearParams& l, const std::string& name, int in, int out) {
    init_param(l.weight, name + ".weight", in, out);
    init_param(l.bias, name + ".bias", 1, out);
}

void init_layernorm(LayerNormParams& ln, const std::string& name, int d) {
    init_param(ln.gamma, name + ".gamma", 1, d);
    init_param(ln.beta, name + ".beta", 1, d);
    for (double& v : ln.gamma.w.a) v = 1.0;
}

void init_attention(AttentionParams& a, const std::string& name, int d) {
    init_linear(a.query, name + ".query", d, d);
    init_linear(a.key, name + ".key", d, d);
    init_linear(a.value, name + ".value", d, d);
    init_linear(a.output, name + ".output", d, d);
}

void init_encoder(EncoderParams& e, const std::string& name, const ModelConfig& c, int vocab) {
    init_param(e.embedding, name + ".embedding", vocab, c.hidden);
    e.layers.resize(c.layers);
    for (int l = 0; l < c.layers; ++l) {
        std::string ln = name + ".l" + std::to_string(l);
        init_attention(e.layers[l].self_attn, ln + ".self", c.hidden);
        init_layernorm(e.layers[l].ln_self, ln + ".ln_self", c.hidden);
        init_linear(e.layers[l].ff_in, ln + ".ff_in", c.hidden, c.ffn);
        init_linear(e.layers[l].ff_out, ln + ".ff_out", c.ffn, c.hidden);
        init_layernorm(e.layers[l].ln_ff, ln + ".ln_ff", c.hidden);
    }
}

void init_decoder(DecoderParams& d, const std::string& name, const ModelConfig& c, int vocab) {
    init_param(d.embedding, name + ".embedding", vocab, c.hidden);
    d.layers.resize(c.layers);
    for (int l = 0; l < c.layers; ++l) {
        std::string ln = name + ".l" + std::to_string(l);
        init_attention(d.layers[l].self_attn, ln + ".self", c.hidden);
        init_layernorm(d.layers[l].ln_self, ln + ".ln_self", c.hidden);
        init_attention(d.layers[l].cross_attn, ln + ".cross", c.hidden);
        init_layernorm(d.layers[l].ln_cross, ln + ".ln_cross", c.hidden);
        init_linear(d.layers[l].ff_in, ln + ".ff_in", c.hidden, c.ffn);
        init_linear(d.layers[l].ff_out, ln + ".ff_out", c.ffn, c.hidden);
        init_layernorm(d.layers[l].ln_ff, ln + ".ln_ff", c.hidden);
    }
    init_linear(d.out_proj, name + ".out_proj", c.hidden, vocab);
}

void collect_linear(std::vector<Param*>& out, LinearParams& l) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
}

void collect_layernorm(std::vector<Param*>& out, LayerNormParams& ln) {
    out.push_back(&ln.gamma);
    out.push_back(&ln.beta);
}

void collect_attention(std::vector<Param*>& out, AttentionParams& a) {
    collect_linear(out, a.query);
    collect_linear(out, a.key);
    collect_linear(out, a.value);
    collect_linear(out, a.output);
}

void collect_encoder(std::vector<Param*>& out, EncoderParams& e) {
    out.push_back(&e.embedding);
    for (auto& l : e.layers) {
        collect_attention(out, l.self_attn);
        collect_layernorm(out, l.ln_self);
        collect_linear(out, l.ff_in);
        collect_linear(out, l.ff_out);
        collect_layernorm(out, l.ln_ff);
    }
}

void collect_decoder(std::vector<Param*>& out, DecoderParams& d) {
    out.push_back(&d.embedding);
    for (auto& l : d.layers) {
        collect_attention(out, l.self_attn);
        collect_layernorm(out, l.ln_self);
        collect_attention(out, l.cross_attn);
        collect_layernorm(out, l.ln_cross);
        collect_linear(out, l.ff_in);
        collect_linear(out, l.ff_out);
        collect_layernorm(out, l.ln_ff);
    }
    collect_linear(out, d.out_proj);
}

void random_fill(Param& p, Rng& rng) {
    if (p.name.ends_with(".bias") || p.name.ends_with(".beta")) return;  // stay zero
    if (p.name.ends_with(".gamma")) return;                              // stays one
    if (p.name.ends_with(".embedding")) {
        for (double& v : p.w.a) v = 0.1 * rng.normal();
        return;
    }
    double limit = std::sqrt(6.0 / (p.w.rows + p.w.cols));
    for (double& v : p.w.a) v = rng.uniform(-limit, limit);
}

}  // namespace

void Seq2SeqModel::set_alpha(double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    config_.alpha = alpha;
}

void Seq2SeqModel::set_dropout(double dropout) {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
    config_.dropout = dropout;
}

Seq2SeqModel::Seq2SeqModel(ModelConfig config, uint64_t init_seed) : config_(config) {
    config_.validate();
    init_encoder(lyric_enc_, "lyric_enc", config_, config_.lyric_vocab);
    init_encoder(melody_enc_, "melody_enc", config_, config_.melody_vocab);
    init_decoder(lyric_dec_, "lyric_dec", config_, config_.lyric_vocab);
    init_decoder(melody_dec_, "melody_dec", config_, config_.melody_vocab);
    Rng rng(init_seed);
    for (Param* p : all_params()) random_fill(*p, rng);
}

std::vector<Param*> Seq2SeqModel::all_params() {
    std::vector<Param*> out;
    collect_encoder(out, lyric_enc_);
    collect_encoder(out, melody_enc_);
    collect_decoder(out, lyric_dec_);
    collect_decoder(out, melody_dec_);
    return out;
}

std::vector<const Param*> Seq2SeqModel::all_params() const {
    auto mutable_this = const_cast<Seq2SeqModel*>(this);
    std::vector<Param*> params = mutable_this->all_params();
    return {params.begin(), params.end()};
}

std::vector<Param*> Seq2SeqModel::params_for(Mode mode) {
    std::vector<Param*> out;
    collect_encoder(out, mode_uses_lyric_encoder(mode) ? lyric_enc_ : melody_enc_);
    collect_decoder(out, mode_uses_lyric_decoder(mode) ? lyric_dec_ : melody_dec_);
    return out;
}

void Seq2SeqModel::zero_grads() {
    for (Param* p : all_params()) p->g.zero();
}

const EncoderParams& Seq2SeqModel::encoder(Mode mode) const {
    return mode_uses_lyric_encoder(mode) ? lyric_enc_ : melody_enc_;
}

const DecoderParams& Seq2SeqModel::decoder(Mode mode) const {
    return mode_uses_lyric_decoder(mode) ? lyric_dec_ : melody_dec_;
}

// --- forward machinery --------------------------------------------------------

namespace {

void add_positional_encoding(Mat& x, const std::vector<int>& positions) {
    const int d = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        double pos = positions[i];
        for (int j = 0; j < d; j += 2) {
            double freq = std::exp(-std::log(10000.0) * j / d);
            x(i, j) += std::sin(pos * freq);
            if (j + 1 < d) x(i, j + 1) += std::cos(pos * freq);
        }
    }
}

Mat embed_tokens(const Param& embedding, const std::vector<int>& tokens) {
    Mat x(static_cast<int>(tokens.size()), embedding.w.cols);
    for (int i = 0; i < x.rows; ++i) {
        int t = tokens[i];
        if (t < 0 || t >= embedding.w.rows)
            throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary of " +
                                    std::to_string(embedding.w.rows));
        const double* src = embedding.w.row(t);
        std::copy(src, src + x.cols, x.row(i));
    }
    return x;
}

struct DropMask {
    Mat m;
    bool active = false;
};

void apply_dropout(Mat& x, DropMask& cache, double rate, bool training, Rng& rng) {
    if (!training || rate <= 0.0) {
        cache.active = false;
        return;
    }
    cache.active = true;
    cache.m = Mat(x.rows, x.cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < x.a.size(); ++i) {
        double keep = rng.uniform() >= rate ? keep_scale : 0.0;
        cache.m.a[i] = keep;
        x.a[i] *= keep;
    }
}

void dropout_backward(Mat& grad, const DropMask& cache) {
    if (!cache.active) return;
    for (size_t i = 0; i < grad.a.size(); ++i) grad.a[i] *= cache.m.a[i];
}

Mat linear_forward(const LinearParams& l, const Mat& x) {
    Mat y = matmul(x, l.weight.w);
    for (int i = 0; i < y.rows; ++i)
        for (int j = 0; j < y.cols; ++j) y(i, j) += l.bias.w(0, j);
    return y;
}

// Accumulates weight/bias grads and returns the input gradient.
Mat linear_backward(LinearParams& l, const Mat& x, const Mat& dy) {
    add_inplace(l.weight.g, matmul_tn(x, dy));
    for (int i = 0; i < dy.rows; ++i)
        for (int j = 0; j < dy.cols; ++j) l.bias.g(0, j) += dy(i, j);
    return matmul_nt(dy, l.weight.w);
}

struct LnCache {
    Mat xhat;
    std::vector<double> rstd;
};

Mat layernorm_forward(const LayerNormParams& ln, const Mat& x, LnCache& cache) {
    const int d = x.cols;
    Mat y(x.rows, d);
    cache.xhat = Mat(x.rows, d);
    cache.rstd.resize(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x(i, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = x(i, j) - mean;
            var += c * c;
        }
        var /= d;
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd[i] = rstd;
        for (int j = 0; j < d; ++j) {
            double xh = (x(i, j) - mean) * rstd;
            cache.xhat(i, j) = xh;
            y(i, j) = ln.gamma.w(0, j) * xh + ln.beta.w(0, j);
        }
    }
    return y;
}

Mat layernorm_backward(LayerNormParams& ln, const LnCache& cache, const Mat& dy) {
    const int d = dy.cols;
    Mat dx(dy.rows, d);
    std::vector<double> dxhat(d);
    for (int i = 0; i < dy.rows; ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            ln.gamma.g(0, j) += dy(i, j) * cache.xhat(i, j);
            ln.beta.g(0, j) += dy(i, j);
            dxhat[j] = dy(i, j) * ln.gamma.w(0, j);
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * cache.xhat(i, j);
        }
        mean_dxhat /= d;
        mean_dxhat_xhat /= d;
        for (int j = 0; j < d; ++j)
            dx(i, j) = cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
    }
    return dx;
}

struct AttnCache {
    Mat q, k, v;             // full-width projections
    std::vector<Mat> probs;  // per head
    Mat ctx;                 // concatenated head outputs
};

Mat slice_cols(const Mat& x, int lo, int width) {
    Mat out(x.rows, width);
    for (int i = 0; i < x.rows; ++i)
        std::copy(x.row(i) + lo, x.row(i) + lo + width, out.row(i));
    return out;
}

void add_cols(Mat& dst, const Mat& src, int lo) {
    for (int i = 0; i < dst.rows; ++i)
        for (int j = 0; j < src.cols; ++j) dst(i, lo + j) += src(i, j);
}

// Multi-head scaled dot-product attention over projected q/k/v, with an
// optional additive mask shared by every head.
Mat attention_forward(const AttentionParams& p, int heads, const Mat& q_in, const Mat& kv_in,
                      const Mat& mask, AttnCache& cache) {
    const int d = p.query.weight.w.cols;
    const int dh = d / heads;
    cache.q = linear_forward(p.query, q_in);
    cache.k = linear_forward(p.key, kv_in);
    cache.v = linear_forward(p.value, kv_in);
    cache.probs.resize(heads);
    cache.ctx = Mat(q_in.rows, d);
    for (int h = 0; h < heads; ++h) {
        Mat qh = slice_cols(cache.q, h * dh, dh);
        Mat kh = slice_cols(cache.k, h * dh, dh);
        Mat vh = slice_cols(cache.v, h * dh, dh);
        cache.probs[h] = masked_attention(qh, kh, mask);
        Mat ctx_h = matmul(cache.probs[h], vh);
        add_cols(cache.ctx, ctx_h, h * dh);
    }
    return linear_forward(p.output, cache.ctx);
}

// dprobs_extra, when non-empty, is an additional gradient on every head's
// probability matrix (divided across heads by the caller); it carries the
// attention-regularizer term into the softmax backward.
void attention_backward(AttentionParams& p, int heads, const Mat& q_in, const Mat& kv_in,
                        const AttnCache& cache, const Mat& dout, const Mat& dprobs_extra,
                        Mat& dq_in, Mat& dkv_in) {
    const int d = p.query.weight.w.cols;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dctx = linear_backward(p.output, cache.ctx, dout);

    Mat dq(cache.q.rows, d), dk(cache.k.rows, d), dv(cache.v.rows, d);
    for (int h = 0; h < heads; ++h) {
        Mat qh = slice_cols(cache.q, h * dh, dh);
        Mat kh = slice_cols(cache.k, h * dh, dh);
        Mat vh = slice_cols(cache.v, h * dh, dh);
        Mat dctx_h = slice_cols(dctx, h * dh, dh);
        const Mat& probs = cache.probs[h];

        Mat dprobs = matmul_nt(dctx_h, vh);
        if (!dprobs_extra.empty()) add_inplace(dprobs, dprobs_extra);
        Mat dvh = matmul_tn(probs, dctx_h);

        // softmax backward, rowwise
        Mat dscores(probs.rows, probs.cols);
        for (int i = 0; i < probs.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < probs.cols; ++j) dot += dprobs(i, j) * probs(i, j);
            for (int j = 0; j < probs.cols; ++j)
                dscores(i, j) = probs(i, j) * (dprobs(i, j) - dot);
        }
        for (double& x : dscores.a) x *= scale;

        add_cols(dq, matmul(dscores, kh), h * dh);
        add_cols(dk, matmul_tn(dscores, qh), h * dh);
        add_cols(dv, dvh, h * dh);
    }

    add_inplace(dq_in, linear_backward(p.query, q_in, dq));
    add_inplace(dkv_in, linear_backward(p.key, kv_in, dk));
    add_inplace(dkv_in, linear_backward(p.value, kv_in, dv));
}

Mat causal_mask(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m(i, j) = kNegInf;
    return m;
}

struct FfnCache {
    Mat pre;  // before relu
    Mat act;  // after relu
};

Mat ffn_forward(const LinearParams& ff_in, const LinearParams& ff_out, const Mat& x, FfnCache& cache) {
    cache.pre = linear_forward(ff_in, x);
    cache.act = cache.pre;
    for (double& v : cache.act.a) v = std::max(0.0, v);
    return linear_forward(ff_out, cache.act);
}

Mat ffn_backward(LinearParams& ff_in, LinearParams& ff_out, const Mat& x, const FfnCache& cache,
                 const Mat& dout) {
    Mat dact = linear_backward(ff_out, cache.act, dout);
    for (size_t i = 0; i < dact.a.size(); ++i)
        if (cache.pre.a[i] <= 0.0) dact.a[i] = 0.0;
    return linear_backward(ff_in, x, dact);
}

struct EncLayerCache {
    Mat x_in;        // layer input
    AttnCache attn;
    DropMask attn_drop;
    LnCache ln_self;
    Mat x_mid;       // after first residual+LN
    FfnCache ffn;
    DropMask ffn_drop;
    LnCache ln_ff;
};

struct DecLayerCache {
    Mat y_in;
    AttnCache self;
    DropMask self_drop;
    LnCache ln_self;
    Mat y_mid;       // query input to cross attention
    AttnCache cross;
    DropMask cross_drop;
    LnCache ln_cross;
    Mat y_cross;     // input to ffn
    FfnCache ffn;
    DropMask ffn_drop;
    LnCache ln_ff;
};

struct SampleCaches {
    Mat enc_x0;  // embedded encoder input after dropout
    DropMask enc_embed_drop;
    std::vector<EncLayerCache> enc_layers;
    Mat h_enc;
    Mat dec_y0;
    DropMask dec_embed_drop;
    std::vector<DecLayerCache> dec_layers;
    Mat dec_out;
    Mat probs;       // output softmax rows
    Mat cross_mask;
    Mat abar;        // head-averaged last-layer cross attention
    double l_att = 0.0;
    double nll_sum = 0.0;
};

void check_sample(const ModelConfig& cfg, const Sample& s) {
    if (s.src_tokens.empty() || s.dec_tokens.empty())
        throw std::invalid_argument("sample: empty source or target");
    if (s.src_tokens.size() != s.src_sentences.size() || s.dec_tokens.size() != s.targets.size() ||
        s.dec_tokens.size() != s.dec_positions.size() || s.dec_tokens.size() != s.dec_sentences.size())
        throw std::invalid_argument("sample: field lengths disagree");
    if (static_cast<int>(s.src_tokens.size()) > cfg.max_len ||
        static_cast<int>(s.dec_tokens.size()) > cfg.max_len)
        throw std::length_error("sample exceeds max_len " + std::to_string(cfg.max_len));
    for (int pos : s.dec_positions)
        if (pos < 0 || pos >= cfg.max_len) throw std::length_error("decoder position exceeds max_len");
    if (!s.attention_target.empty() &&
        (s.attention_target.rows != static_cast<int>(s.targets.size()) ||
         s.attention_target.cols != static_cast<int>(s.src_tokens.size())))
        throw std::invalid_argument("sample: attention target shape mismatch");
}

void forward_sample(const ModelConfig& cfg, const EncoderParams& enc, const DecoderParams& dec,
                    const Sample& s, bool training, Rng& rng, SampleCaches& c) {
    check_sample(cfg, s);
    const int heads = cfg.heads;

    // encoder
    std::vector<int> src_positions(s.src_tokens.size());
    for (size_t i = 0; i < src_positions.size(); ++i) src_positions[i] = static_cast<int>(i);
    Mat x = embed_tokens(enc.embedding, s.src_tokens);
    add_positional_encoding(x, src_positions);
    apply_dropout(x, c.enc_embed_drop, cfg.dropout, training, rng);
    c.enc_x0 = x;

    c.enc_layers.resize(enc.layers.size());
    Mat empty_mask;
    for (size_t l = 0; l < enc.layers.size(); ++l) {
        EncLayerCache& lc = c.enc_layers[l];
        const EncoderLayerParams& lp = enc.layers[l];
        lc.x_in = x;
        Mat a = attention_forward(lp.self_attn, heads, x, x, empty_mask, lc.attn);
        apply_dropout(a, lc.attn_drop, cfg.dropout, training, rng);
        add_inplace(a, x);
        lc.x_mid = layernorm_forward(lp.ln_self, a, lc.ln_self);
        Mat f = ffn_forward(lp.ff_in, lp.ff_out, lc.x_mid, lc.ffn);
        apply_dropout(f, lc.ffn_drop, cfg.dropout, training, rng);
        add_inplace(f, lc.x_mid);
        x = layernorm_forward(lp.ln_ff, f, lc.ln_ff);
    }
    c.h_enc = x;

    // decoder
    Mat y = embed_tokens(dec.embedding, s.dec_tokens);
    add_positional_encoding(y, s.dec_positions);
    apply_dropout(y, c.dec_embed_drop, cfg.dropout, training, rng);
    c.dec_y0 = y;
    c.cross_mask = sentence_mask(s.dec_sentences, s.src_sentences);
    Mat self_mask = causal_mask(y.rows);

    c.dec_layers.resize(dec.layers.size());
    for (size_t l = 0; l < dec.layers.size(); ++l) {
        DecLayerCache& lc = c.dec_layers[l];
        const DecoderLayerParams& lp = dec.layers[l];
        lc.y_in = y;
        Mat a = attention_forward(lp.self_attn, heads, y, y, self_mask, lc.self);
        apply_dropout(a, lc.self_drop, cfg.dropout, training, rng);
        add_inplace(a, y);
        lc.y_mid = layernorm_forward(lp.ln_self, a, lc.ln_self);

        Mat cr = attention_forward(lp.cross_attn, heads, lc.y_mid, c.h_enc, c.cross_mask, lc.cross);
        apply_dropout(cr, lc.cross_drop, cfg.dropout, training, rng);
        add_inplace(cr, lc.y_mid);
        lc.y_cross = layernorm_forward(lp.ln_cross, cr, lc.ln_cross);

        Mat f = ffn_forward(lp.ff_in, lp.ff_out, lc.y_cross, lc.ffn);
        apply_dropout(f, lc.ffn_drop, cfg.dropout, training, rng);
        add_inplace(f, lc.y_cross);
        y = layernorm_forward(lp.ln_ff, f, lc.ln_ff);
    }
    c.dec_out = y;

    // head-averaged cross attention of the last decoder layer
    const std::vector<Mat>& last_probs = c.dec_layers.back().cross.probs;
    c.abar = Mat(last_probs[0].rows, last_probs[0].cols);
    for (const Mat& p : last_probs) add_inplace(c.abar, p);
    for (double& v : c.abar.a) v /= heads;

    // output distribution and per-token nll
    Mat logits = linear_forward(dec.out_proj, y);
    c.probs = Mat(logits.rows, logits.cols);
    c.nll_sum = 0.0;
    for (int i = 0; i < logits.rows; ++i) {
        double mx = logits(i, 0);
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            double e = std::exp(logits(i, j) - mx);
            c.probs(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < logits.cols; ++j) c.probs(i, j) /= sum;
        int t = s.targets[i];
        if (t < 0 || t >= logits.cols)
            throw std::out_of_range("target id outside vocabulary");
        c.nll_sum += -(logits(i, t) - mx - std::log(sum));
    }

    if (!s.attention_target.empty())
        c.l_att = attention_regularizer(c.abar, s.attention_target, cfg.squared_att_penalty);
}

// nll_scale multiplies the cross-entropy gradient (1 / total target tokens);
// att_scale multiplies the regularizer gradient (alpha / samples carrying u).
void backward_sample(const ModelConfig& cfg, EncoderParams& enc, DecoderParams& dec, const Sample& s,
                     const SampleCaches& c, double nll_scale, double att_scale) {
    const int heads = cfg.heads;

    // d logits -> d dec_out
    Mat dlogits = c.probs;
    for (int i = 0; i < dlogits.rows; ++i) dlogits(i, s.targets[i]) -= 1.0;
    for (double& v : dlogits.a) v *= nll_scale;
    Mat dy = linear_backward(dec.out_proj, c.dec_out, dlogits);

    // regularizer gradient on the head-averaged last-layer cross attention
    Mat dprobs_extra;
    if (!s.attention_target.empty() && att_scale != 0.0) {
        const Mat& u = s.attention_target;
        dprobs_extra = Mat(c.abar.rows, c.abar.cols);
        double inv = att_scale / (static_cast<double>(c.abar.rows) * c.abar.cols) / heads;
        for (size_t i = 0; i < c.abar.a.size(); ++i) {
            double d = c.abar.a[i] - u.a[i];
            dprobs_extra.a[i] = cfg.squared_att_penalty ? inv * 2.0 * d
                                : d > 0.0 ? inv
                                : d < 0.0 ? -inv
                                          : 0.0;
        }
    }

    Mat dh_enc(c.h_enc.rows, c.h_enc.cols);
    Mat empty;
    for (int l = static_cast<int>(dec.layers.size()) - 1; l >= 0; --l) {
        const DecLayerCache& lc = c.dec_layers[l];
        DecoderLayerParams& lp = dec.layers[l];

        // ffn sublayer
        Mat dres = layernorm_backward(lp.ln_ff, lc.ln_ff, dy);
        Mat df = dres;
        dropout_backward(df, lc.ffn_drop);
        Mat dy_cross = ffn_backward(lp.ff_in, lp.ff_out, lc.y_cross, lc.ffn, df);
        add_inplace(dy_cross, dres);

        // cross-attention sublayer
        dres = layernorm_backward(lp.ln_cross, lc.ln_cross, dy_cross);
        Mat dcr = dres;
        dropout_backward(dcr, lc.cross_drop);
        Mat dy_mid(lc.y_mid.rows, lc.y_mid.cols);
        bool is_last = l == static_cast<int>(dec.layers.size()) - 1;
        attention_backward(lp.cross_attn, heads, lc.y_mid, c.h_enc, lc.cross, dcr,
                           is_last ? dprobs_extra : empty, dy_mid, dh_enc);
        add_inplace(dy_mid, dres);

        // self-attention sublayer
        dres = layernorm_backward(lp.ln_self, lc.ln_self, dy_mid);
        Mat da = dres;
        dropout_backward(da, lc.self_drop);
        Mat dy_in(lc.y_in.rows, lc.y_in.cols);
        attention_backward(lp.self_attn, heads, lc.y_in, lc.y_in, lc.self, da, empty, dy_in, dy_in);
        add_inplace(dy_in, dres);
        dy = dy_in;
    }
    dropout_backward(dy, c.dec_embed_drop);
    for (int i = 0; i < dy.rows; ++i) {
        double* grow = dec.embedding.g.row(s.dec_tokens[i]);
        for (int j = 0; j < dy.cols; ++j) grow[j] += dy(i, j);
    }

    // encoder
    Mat dx = dh_enc;
    for (int l = static_cast<int>(enc.layers.size()) - 1; l >= 0; --l) {
        const EncLayerCache& lc = c.enc_layers[l];
        EncoderLayerParams& lp = enc.layers[l];

        Mat dres = layernorm_backward(lp.ln_ff, lc.ln_ff, dx);
        Mat df = dres;
        dropout_backward(df, lc.ffn_drop);
        Mat dx_mid = ffn_backward(lp.ff_in, lp.ff_out, lc.x_mid, lc.ffn, df);
        add_inplace(dx_mid, dres);

        dres = layernorm_backward(lp.ln_self, lc.ln_self, dx_mid);
        Mat da = dres;
        dropout_backward(da, lc.attn_drop);
        Mat dx_in(lc.x_in.rows, lc.x_in.cols);
        attention_backward(lp.self_attn, heads, lc.x_in, lc.x_in, lc.attn, da, empty, dx_in, dx_in);
        add_inplace(dx_in, dres);
        dx = dx_in;
    }
    dropout_backward(dx, c.enc_embed_drop);
    for (int i = 0; i < dx.rows; ++i) {
        double* grow = enc.embedding.g.row(s.src_tokens[i]);
        for (int j = 0; j < dx.cols; ++j) grow[j] += dx(i, j);
    }
}

ForwardStats summarize(const ModelConfig& cfg, const std::vector<SampleCaches>& caches,
                       const std::vector<Sample>& batch) {
    ForwardStats stats;
    long long tokens = 0;
    double nll = 0.0, att = 0.0;
    long long with_u = 0;
    for (size_t i = 0; i < caches.size(); ++i) {
        nll += caches[i].nll_sum;
        tokens += static_cast<long long>(batch[i].targets.size());
        if (!batch[i].attention_target.empty()) {
            att += caches[i].l_att;
            ++with_u;
        }
        stats.attention.push_back(caches[i].abar);
    }
    stats.tokens = tokens;
    stats.nll = nll / static_cast<double>(tokens);
    stats.att_penalty = with_u > 0 ? att / static_cast<double>(with_u) : 0.0;
    stats.loss = stats.nll + cfg.alpha * stats.att_penalty;
    return stats;
}

}  // namespace

ForwardStats Seq2SeqModel::forward_loss(const std::vector<Sample>& batch, Mode mode, bool training,
                                        uint64_t dropout_seed) const {
    if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");
    const EncoderParams& enc = encoder(mode);
    const DecoderParams& dec = decoder(mode);
    Rng rng(dropout_seed);
    std::vector<SampleCaches> caches(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        Rng sample_rng = rng.fork(i);
        forward_sample(config_, enc, dec, batch[i], training, sample_rng, caches[i]);
    }
    return summarize(config_, caches, batch);
}

ForwardStats Seq2SeqModel::forward_backward(const std::vector<Sample>& batch, Mode mode, bool training,
                                            uint64_t dropout_seed) {
    if (batch.empty()) throw std::invalid_argument("forward_backward: empty batch");
    EncoderParams& enc = mode_uses_lyric_encoder(mode) ? lyric_enc_ : melody_enc_;
    DecoderParams& dec = mode_uses_lyric_decoder(mode) ? lyric_dec_ : melody_dec_;
    Rng rng(dropout_seed);
    std::vector<SampleCaches> caches(batch.size());
    long long tokens = 0;
    long long with_u = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        Rng sample_rng = rng.fork(i);
        forward_sample(config_, enc, dec, batch[i], training, sample_rng, caches[i]);
        tokens += static_cast<long long>(batch[i].targets.size());
        if (!batch[i].attention_target.empty()) ++with_u;
    }
    ForwardStats stats = summarize(config_, caches, batch);
    if (!std::isfinite(stats.loss))
        throw std::runtime_error("forward_backward: non-finite loss (mode " + std::string(mode_name(mode)) + ")");

    const double nll_scale = 1.0 / static_cast<double>(tokens);
    const double att_scale = with_u > 0 ? config_.alpha / static_cast<double>(with_u) : 0.0;
    for (size_t i = 0; i < batch.size(); ++i)
        backward_sample(config_, enc, dec, batch[i], caches[i], nll_scale, att_scale);
    return stats;
}

std::pair<Mat, Mat> Seq2SeqModel::forward_probs(const Sample& sample, Mode mode) const {
    Sample s = sample;
    s.targets.assign(s.dec_tokens.size(), 0);
    s.attention_target = Mat();
    SampleCaches caches;
    Rng rng(0);
    forward_sample(config_, encoder(mode), decoder(mode), s, false, rng, caches);
    return {std::move(caches.probs), std::move(caches.abar)};
}

double Seq2SeqModel::corpus_perplexity(const std::vector<Sample>& dataset, Mode mode) const {
    if (dataset.empty()) throw std::invalid_argument("corpus_perplexity: empty dataset");
    double nll = 0.0;
    long long tokens = 0;
    for (const Sample& s : dataset) {
        ForwardStats f = forward_loss({s}, mode, false);
        nll += f.nll * static_cast<double>(f.tokens);
        tokens += f.tokens;
    }
    return std::exp(nll / static_cast<double>(tokens));
}

// --- checkpoints ----------------------------------------------------------------

void Seq2SeqModel::save_checkpoint(const std::string& path) const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = {{"layers", config_.layers},
                   {"hidden", config_.hidden},
                   {"heads", config_.heads},
                   {"ffn", config_.ffn},
                   {"lyric_vocab", config_.lyric_vocab},
                   {"melody_vocab", config_.melody_vocab},
                   {"max_len", config_.max_len},
                   {"dropout", config_.dropout},
                   {"alpha", config_.alpha},
                   {"squared_att_penalty", config_.squared_att_penalty}};
    nlohmann::json params = nlohmann::json::object();
    for (const Param* p : all_params())
        params[p->name] = {{"rows", p->w.rows}, {"cols", p->w.cols}, {"data", p->w.a}};
    j["params"] = std::move(params);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << '\n';
}

Seq2SeqModel Seq2SeqModel::load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format_version", 0) != 1)
        throw std::runtime_error("unsupported checkpoint format in " + path);

    const auto& jc = j.at("config");
    ModelConfig cfg;
    cfg.layers = jc.at("layers").get<int>();
    cfg.hidden = jc.at("hidden").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.ffn = jc.at("ffn").get<int>();
    cfg.lyric_vocab = jc.at("lyric_vocab").get<int>();
    cfg.melody_vocab = jc.at("melody_vocab").get<int>();
    cfg.max_len = jc.at("max_len").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.alpha = jc.at("alpha").get<double>();
    cfg.squared_att_penalty = jc.at("squared_att_penalty").get<bool>();

    Seq2SeqModel model(cfg, 0);
    const auto& jp = j.at("params");
    for (Param* p : model.all_params()) {
        if (!jp.contains(p->name))
            throw std::runtime_error("checkpoint missing parameter " + p->name);
        const auto& jt = jp.at(p->name);
        if (jt.at("rows").get<int>() != p->w.rows || jt.at("cols").get<int>() != p->w.cols)
            throw std::runtime_error("checkpoint shape mismatch for " + p->name);
        std::vector<double> data = jt.at("data").get<std::vector<double>>();
        if (data.size() != p->w.a.size())
            throw std::runtime_error("checkpoint size mismatch for " + p->name);
        p->w.a = std::move(data);
    }
    return model;
}

// --- sample builders -------------------------------------------------------------

Sample make_mass_sample(const MaskedPair& masked, const Vocabulary& vocab) {
    Sample s;
    s.src_tokens = vocab.encode(masked.encoder_tokens);
    s.src_sentences = masked.encoder_sentence_ids;
    s.targets = vocab.encode(masked.target_tokens);
    s.dec_positions = masked.target_positions;
    s.dec_sentences = masked.target_sentence_ids;
    s.dec_tokens.resize(s.targets.size());
    s.dec_tokens[0] = Vocabulary::kEosId;
    for (size_t t = 1; t < s.targets.size(); ++t) s.dec_tokens[t] = s.targets[t - 1];
    return s;
}

Sample make_mass_sample(const TokenSeq& song, const Vocabulary& vocab, double ratio, uint64_t seed) {
    return make_mass_sample(mask_song(song, ratio, seed), vocab);
}

Sample make_supervised_sample(const TokenSeq& source, const TokenSeq& target,
                              const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                              const Alignment* content_alignment) {
    if (source.empty() || target.empty())
        throw std::invalid_argument("supervised sample: empty source or target");
    Sample s;
    s.src_tokens = src_vocab.encode(source.tokens);
    s.src_sentences = source.sentence_ids;
    s.targets = tgt_vocab.encode(target.tokens);
    s.dec_sentences = target.sentence_ids;
    s.dec_positions.resize(s.targets.size());
    for (size_t t = 0; t < s.targets.size(); ++t) s.dec_positions[t] = static_cast<int>(t);
    s.dec_tokens.resize(s.targets.size());
    s.dec_tokens[0] = Vocabulary::kEosId;
    for (size_t t = 1; t < s.targets.size(); ++t) s.dec_tokens[t] = s.targets[t - 1];

    if (content_alignment) {
        if (source.sentence_count() != target.sentence_count())
            throw std::invalid_argument("supervised sample: sentence counts differ, cannot align");

        // flat positions of content tokens (1-based content index -> flat index)
        auto content_positions = [](const TokenSeq& seq) {
            std::vector<int> pos;
            for (size_t i = 0; i < seq.tokens.size(); ++i)
                if (seq.tokens[i] != tok::kSep) pos.push_back(static_cast<int>(i));
            return pos;
        };
        std::vector<int> src_pos = content_positions(source);
        std::vector<int> tgt_pos = content_positions(target);

        std::vector<SpanPair> flat;
        for (const SpanPair& p : content_alignment->pairs) {
            if (p.src_lo < 1 || p.src_hi > static_cast<int>(src_pos.size()) || p.tgt_lo < 1 ||
                p.tgt_hi > static_cast<int>(tgt_pos.size()))
                throw std::invalid_argument("supervised sample: alignment span out of range");
            SpanPair f;
            f.src_lo = src_pos[p.src_lo - 1] + 1;
            f.src_hi = src_pos[p.src_hi - 1] + 1;
            f.tgt_lo = tgt_pos[p.tgt_lo - 1] + 1;
            f.tgt_hi = tgt_pos[p.tgt_hi - 1] + 1;
            if (f.src_hi - f.src_lo != p.src_hi - p.src_lo || f.tgt_hi - f.tgt_lo != p.tgt_hi - p.tgt_lo)
                throw std::invalid_argument("supervised sample: alignment span crosses a sentence boundary");
            flat.push_back(f);
        }
        // every [SEP] aligns to its counterpart
        std::vector<int> src_seps, tgt_seps;
        for (size_t i = 0; i < source.tokens.size(); ++i)
            if (source.tokens[i] == tok::kSep) src_seps.push_back(static_cast<int>(i) + 1);
        for (size_t i = 0; i < target.tokens.size(); ++i)
            if (target.tokens[i] == tok::kSep) tgt_seps.push_back(static_cast<int>(i) + 1);
        for (size_t k = 0; k < src_seps.size(); ++k)
            flat.push_back(SpanPair{src_seps[k], src_seps[k], tgt_seps[k], tgt_seps[k]});

        s.attention_target = target_attention_map(flat, static_cast<int>(s.targets.size()),
                                                  static_cast<int>(s.src_tokens.size()));
    }
    return s;
}

}  // namespace song
