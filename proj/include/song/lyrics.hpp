#pragma once

#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "song/tokens.hpp"

namespace song {

// Optional hook mapping a cleaned word to sub-word tokens (e.g. syllables).
// The default leaves words whole; the rest of the pipeline is agnostic to
// the granularity.
using WordSplitter = std::function<std::vector<std::string>(const std::string&)>;

// Splits a lyric corpus into songs (blank-line-delimited) of sentences (one
// per non-blank line). Words are lowercased, stripped of punctuation except
// in-word apostrophes, and whitespace-tokenized; each sentence ends with
// [SEP]. Lines that clean down to nothing are dropped, as are empty songs.
std::vector<TokenSeq> parse_lyrics(std::istream& in, const WordSplitter& splitter = {});
std::vector<TokenSeq> parse_lyrics(const std::string& text, const WordSplitter& splitter = {});
std::vector<TokenSeq> parse_lyrics_file(const std::string& path, const WordSplitter& splitter = {});

// The per-word cleanup used above, exposed for tests.
std::string clean_lyric_word(const std::string& word);

}  // namespace song
