#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "song/tokens.hpp"

namespace song {

// Token <-> id map with the special tokens pinned to the lowest ids.
// Lyric and melody vocabularies are built separately and never shared.
class Vocabulary {
public:
    static constexpr int kPadId = 0;
    static constexpr int kEosId = 1;
    static constexpr int kSepId = 2;
    static constexpr int kMaskId = 3;
    static constexpr int kUnkId = 4;
    static constexpr int kNumSpecials = 5;

    Vocabulary();

    // Frequency >= min_count keeps a token; rarer tokens encode to [UNK].
    // Ids are assigned by frequency desc, then lexicographic, so the same
    // corpus always produces the same file.
    static Vocabulary build(const std::vector<TokenSeq>& corpus, int min_count = 1);

    int id(const std::string& token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(id_to_token_.size()); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    // One token per line; the line number is the id.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    void add(const std::string& token);

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace song
