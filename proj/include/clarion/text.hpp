#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace clarion::text {

/// NFC-normalizes UTF-8 text and removes control characters. Tabs and line
/// breaks become plain spaces. Invalid UTF-8 sequences are replaced by U+FFFD.
std::string normalize(std::string_view utf8);

/// Full Unicode lowercasing (root locale).
std::string to_lower(std::string_view utf8);

/// True when the first code point is an uppercase or titlecase letter.
bool starts_upper(std::string_view utf8);

/// True for words of two or more code points whose cased letters are all
/// uppercase ("FPV", "NASA").
bool is_acronym(std::string_view utf8);

struct WordToken {
    std::string surface;  ///< original casing
    std::string term;     ///< lowercased
    bool has_digit = false;
};

/// A run of tokens not interrupted by phrase punctuation.
using Chunk = std::vector<WordToken>;

struct Sentence {
    std::vector<Chunk> chunks;
};

/// Splits normalized text into sentences ('.', '!', '?' and their Unicode
/// relatives end a sentence), sentences into punctuation-free chunks, and
/// chunks into word tokens. Apostrophes between letters and '.'/',' between
/// digits stay inside a token; a dash joining two word characters splits the
/// token but not the chunk.
std::vector<Sentence> segment(std::string_view utf8);

/// Lowercased word tokens of `utf8` in reading order.
std::vector<std::string> tokenize(std::string_view utf8);

/// The shipped English stopword list (data/stopwords_en.txt).
std::unordered_set<std::string> const &stopwords();
int stopword_list_version();
inline bool is_stopword(std::string const &term) { return stopwords().count(term) != 0; }

} // namespace clarion::text
