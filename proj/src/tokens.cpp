#include "song/tokens.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace song {

namespace tok {
bool is_special(const std::string& t) {
    return t == kPad || t == kEos || t == kSep || t == kMask || t == kUnk;
}
}  // namespace tok

TokenSeq TokenSeq::from_tokens(std::vector<std::string> tokens) {
    TokenSeq seq;
    seq.sentence_ids.reserve(tokens.size());
    int sid = 0;
    for (const std::string& t : tokens) {
        seq.sentence_ids.push_back(sid);
        if (t == tok::kSep) ++sid;
    }
    seq.tokens = std::move(tokens);
    return seq;
}

int TokenSeq::sentence_count() const {
    int n = 0;
    for (const std::string& t : tokens)
        if (t == tok::kSep) ++n;
    return n;
}

std::pair<int, int> TokenSeq::sentence_content_span(int sentence) const {
    int lo = -1, hi = -1;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (sentence_ids[i] != sentence || tokens[i] == tok::kSep) continue;
        if (lo < 0) lo = static_cast<int>(i);
        hi = static_cast<int>(i);
    }
    return {lo, hi};
}

std::vector<std::string> TokenSeq::content_tokens() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const std::string& t : tokens)
        if (t != tok::kSep) out.push_back(t);
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string t;
    while (iss >> t) out.push_back(std::move(t));
    return out;
}

std::vector<TokenSeq> read_token_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open token file: " + path);
    std::vector<TokenSeq> songs;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> toks = split_tokens(line);
        if (toks.empty()) continue;
        songs.push_back(TokenSeq::from_tokens(std::move(toks)));
    }
    return songs;
}

void write_token_file(const std::string& path, const std::vector<TokenSeq>& songs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write token file: " + path);
    for (const TokenSeq& s : songs) out << join_tokens(s.tokens) << '\n';
}

}  // namespace song
