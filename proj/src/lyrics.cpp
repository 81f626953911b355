#include "song/lyrics.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace song {

std::string clean_lyric_word(const std::string& word) {
    std::string out;
    out.reserve(word.size());
    for (unsigned char c : word) {
        if (std::isalnum(c) || c == '\'' || c >= 0x80)
            out.push_back(static_cast<char>(std::tolower(c)));
    }
    // strip apostrophes that are not in-word
    size_t begin = out.find_first_not_of('\'');
    size_t end = out.find_last_not_of('\'');
    if (begin == std::string::npos) return "";
    return out.substr(begin, end - begin + 1);
}

std::vector<TokenSeq> parse_lyrics(std::istream& in, const WordSplitter& splitter) {
    std::vector<TokenSeq> songs;
    std::vector<std::string> current;

    auto flush_song = [&]() {
        if (!current.empty()) {
            songs.push_back(TokenSeq::from_tokens(std::move(current)));
            current.clear();
        }
    };

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = line.find_first_not_of(" \t") == std::string::npos;
        if (blank) {
            flush_song();
            continue;
        }
        std::istringstream words(line);
        std::string word;
        size_t before = current.size();
        while (words >> word) {
            std::string cleaned = clean_lyric_word(word);
            if (cleaned.empty()) continue;
            if (splitter) {
                for (std::string& piece : splitter(cleaned))
                    if (!piece.empty()) current.push_back(std::move(piece));
            } else {
                current.push_back(std::move(cleaned));
            }
        }
        if (current.size() > before)
            current.push_back(tok::kSep);
        // a line of pure punctuation contributes no sentence
    }
    flush_song();
    return songs;
}

std::vector<TokenSeq> parse_lyrics(const std::string& text, const WordSplitter& splitter) {
    std::istringstream in(text);
    return parse_lyrics(in, splitter);
}

std::vector<TokenSeq> parse_lyrics_file(const std::string& path, const WordSplitter& splitter) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lyrics file: " + path);
    return parse_lyrics(in, splitter);
}

}  // namespace song
