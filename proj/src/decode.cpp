#include "song/decode.hpp"

#include <algorithm>
#include <cmath>

#include "song/rng.hpp"
#include "song/score.hpp"

namespace song {

namespace {

enum class TokClass { Pitch, Duration, Word, Sep, Special };

std::vector<TokClass> classify_vocab(const Vocabulary& vocab) {
    std::vector<TokClass> cls(vocab.size());
    for (int id = 0; id < vocab.size(); ++id) {
        const std::string& t = vocab.token(id);
        if (t == tok::kSep)
            cls[id] = TokClass::Sep;
        else if (tok::is_special(t))
            cls[id] = TokClass::Special;
        else if (is_pitch_token(t))
            cls[id] = TokClass::Pitch;
        else if (is_duration_token(t))
            cls[id] = TokClass::Duration;
        else
            cls[id] = TokClass::Word;
    }
    return cls;
}

int pick_token(const double* probs, const std::vector<bool>& allowed, int vocab_size,
               const GenerateOptions& options, Rng& rng) {
    if (options.strategy == GenerateOptions::Strategy::Greedy) {
        int best = -1;
        double best_p = -1.0;
        for (int id = 0; id < vocab_size; ++id) {
            if (!allowed[id]) continue;
            if (probs[id] > best_p) {
                best_p = probs[id];
                best = id;
            }
        }
        if (best < 0) throw std::runtime_error("generate: no token permitted by the grammar mask");
        return best;
    }

    // top-k over the allowed tokens
    std::vector<std::pair<double, int>> cand;
    for (int id = 0; id < vocab_size; ++id)
        if (allowed[id]) cand.emplace_back(probs[id], id);
    if (cand.empty()) throw std::runtime_error("generate: no token permitted by the grammar mask");
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    size_t k = std::min<size_t>(std::max(1, options.top_k), cand.size());
    double total = 0.0;
    for (size_t i = 0; i < k; ++i) total += cand[i].first;
    if (total <= 0.0) return cand[0].second;
    double r = rng.uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) {
        acc += cand[i].first;
        if (r < acc) return cand[i].second;
    }
    return cand[k - 1].second;
}

}  // namespace

GenerateResult generate(const Seq2SeqModel& model, const TokenSeq& source, Mode direction,
                        const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                        const GenerateOptions& options) {
    const int sentences = source.sentence_count();
    if (sentences < 1) throw std::invalid_argument("generate: source has no [SEP]-closed sentence");
    if (options.per_sentence_factor < 1) throw std::invalid_argument("generate: per_sentence_factor must be >= 1");

    const bool melody_out = !mode_uses_lyric_decoder(direction);
    std::vector<TokClass> cls = classify_vocab(tgt_vocab);

    // caps count the natural unit of the output modality: complete notes for
    // melodies (two tokens each), words for lyrics
    std::vector<int> caps(sentences);
    int budget = options.step_budget;
    for (int s = 0; s < sentences; ++s) {
        auto [lo, hi] = source.sentence_content_span(s);
        int content = lo < 0 ? 0 : hi - lo + 1;
        caps[s] = std::max(1, options.per_sentence_factor * content);
        if (options.step_budget == 0) budget += (melody_out ? 2 * caps[s] : caps[s]) + 2;
    }

    Sample s;
    s.src_tokens = src_vocab.encode(source.tokens);
    s.src_sentences = source.sentence_ids;

    Rng rng(options.seed);
    std::vector<std::string> out_tokens;
    std::vector<int> out_ids, out_sentences;
    int sentence = 0;
    int sentence_items = 0;  // notes (melody) or words (lyric) in the open sentence
    bool expect_pitch = true;

    auto make_partial = [&]() { return TokenSeq::from_tokens(out_tokens); };

    while (sentence < sentences) {
        if (static_cast<int>(out_tokens.size()) >= budget)
            throw GenerationTruncated("generate: step budget exhausted before the final [SEP]", make_partial());

        // decoder rows 0..T: row t is fed output token t-1 ([EOS] first) and
        // predicts token t; row T is the step being generated now
        s.dec_tokens.assign(1, Vocabulary::kEosId);
        s.dec_tokens.insert(s.dec_tokens.end(), out_ids.begin(), out_ids.end());
        s.dec_sentences = out_sentences;
        s.dec_sentences.push_back(sentence);
        s.dec_positions.resize(s.dec_tokens.size());
        for (size_t t = 0; t < s.dec_positions.size(); ++t) s.dec_positions[t] = static_cast<int>(t);

        auto [probs, abar] = model.forward_probs(s, direction);
        const double* row = probs.row(probs.rows - 1);

        std::vector<bool> allowed(tgt_vocab.size(), false);
        bool cap_hit = sentence_items >= caps[sentence];
        for (int id = 0; id < tgt_vocab.size(); ++id) {
            switch (cls[id]) {
                case TokClass::Sep:
                    // a sentence may close only at a note boundary and never empty
                    allowed[id] = sentence_items > 0 && (!melody_out || expect_pitch);
                    break;
                case TokClass::Pitch:
                    allowed[id] = melody_out && expect_pitch && !cap_hit;
                    break;
                case TokClass::Duration:
                    allowed[id] = melody_out && !expect_pitch;
                    break;
                case TokClass::Word:
                    allowed[id] = !melody_out && !cap_hit;
                    break;
                case TokClass::Special:
                    break;
            }
        }
        if (cap_hit && (!melody_out || expect_pitch)) {
            std::fill(allowed.begin(), allowed.end(), false);
            allowed[Vocabulary::kSepId] = true;  // force the sentence closed
        }

        int id = pick_token(row, allowed, tgt_vocab.size(), options, rng);
        out_ids.push_back(id);
        out_sentences.push_back(sentence);
        out_tokens.push_back(tgt_vocab.token(id));
        if (id == Vocabulary::kSepId) {
            ++sentence;
            sentence_items = 0;
            expect_pitch = true;
        } else if (melody_out) {
            expect_pitch = !expect_pitch;
            if (expect_pitch) ++sentence_items;  // a pitch-duration pair completed
        } else {
            ++sentence_items;
        }
    }

    // final pass over the complete output for the attention actually used
    s.dec_tokens.resize(out_ids.size());
    s.dec_tokens[0] = Vocabulary::kEosId;
    for (size_t t = 1; t < out_ids.size(); ++t) s.dec_tokens[t] = out_ids[t - 1];
    s.dec_sentences = out_sentences;
    s.dec_positions.resize(out_ids.size());
    for (size_t t = 0; t < s.dec_positions.size(); ++t) s.dec_positions[t] = static_cast<int>(t);
    auto [probs, abar] = model.forward_probs(s, direction);

    GenerateResult result;
    result.output = make_partial();
    result.full_attention = std::move(abar);
    for (int snt = 0; snt < sentences; ++snt) {
        auto [slo, shi] = source.sentence_content_span(snt);
        auto [tlo, thi] = result.output.sentence_content_span(snt);
        if (slo < 0 || tlo < 0) {
            result.sentence_attention.emplace_back();
            continue;
        }
        Mat m(thi - tlo + 1, shi - slo + 1);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) m(i, j) = result.full_attention(tlo + i, slo + j);
        result.sentence_attention.push_back(std::move(m));
    }
    return result;
}

}  // namespace song
