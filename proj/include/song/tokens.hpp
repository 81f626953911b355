#pragma once

#include <string>
#include <vector>

namespace song {

namespace tok {
inline const std::string kPad = "[PAD]";
inline const std::string kEos = "[EOS]";
inline const std::string kSep = "[SEP]";
inline const std::string kMask = "[MASK]";
inline const std::string kUnk = "[UNK]";

bool is_special(const std::string& t);
}  // namespace tok

// A whole song as a flat token list. Sentences (lyric lines or melody
// phrases) are delimited by a trailing [SEP]; sentence_ids[i] is the
// 0-based sentence the i-th token belongs to, with the [SEP] counted as
// part of the sentence it closes.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::vector<int> sentence_ids;

    static TokenSeq from_tokens(std::vector<std::string> tokens);

    size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }

    int sentence_count() const;

    // Positions of the content tokens (everything but [SEP]) of one sentence.
    // Returns {lo, hi} inclusive over the flat token index, or {-1, -1} for a
    // sentence that holds nothing but its [SEP].
    std::pair<int, int> sentence_content_span(int sentence) const;

    // Content tokens (non-[SEP]) in order.
    std::vector<std::string> content_tokens() const;
};

// Token files: one song per line, tokens space-separated, "[SEP]" literal.
std::vector<TokenSeq> read_token_file(const std::string& path);
void write_token_file(const std::string& path, const std::vector<TokenSeq>& songs);

std::string join_tokens(const std::vector<std::string>& tokens);
std::vector<std::string> split_tokens(const std::string& line);

}  // namespace song
