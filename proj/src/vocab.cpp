#include "song/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace song {

Vocabulary::Vocabulary() {
    add(tok::kPad);
    add(tok::kEos);
    add(tok::kSep);
    add(tok::kMask);
    add(tok::kUnk);
}

void Vocabulary::add(const std::string& token) {
    token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<TokenSeq>& corpus, int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
    std::map<std::string, long> freq;
    for (const TokenSeq& seq : corpus)
        for (const std::string& t : seq.tokens)
            if (!tok::is_special(t)) ++freq[t];

    std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    for (const auto& [token, count] : items)
        if (count >= min_count) v.add(token);
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
    return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int i : ids) tokens.push_back(token(i));
    return tokens;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    for (const std::string& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        if (line_no < kNumSpecials) {
            if (line != v.id_to_token_[line_no])
                throw std::runtime_error("vocabulary file has wrong special token order: " + path);
        } else {
            if (line.empty()) throw std::runtime_error("vocabulary file has an empty token: " + path);
            v.add(line);
        }
        ++line_no;
    }
    if (line_no < kNumSpecials)
        throw std::runtime_error("vocabulary file truncated: " + path);
    return v;
}

}  // namespace song
