#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace clarion {

/// Per-term statistics of the unigram YAKE scorer. Lower `keyword_score`
/// means more important.
struct TermFeatures {
    std::string term;
    std::size_t tf = 0;
    double casing = 0.0;
    double position = 0.0;
    double frequency = 0.0;
    double relatedness = 0.0;
    double spread = 0.0;
    double term_score = 0.0;
    double keyword_score = 0.0;
};

/// Feature table over candidate terms, sorted by ascending keyword score with
/// ties broken by term. Candidates are non-stopword tokens of at least three
/// code points that contain no digit. Relatedness uses a co-occurrence window
/// of one token inside a chunk.
std::vector<TermFeatures> keyword_feature_table(std::string_view text);

/// All distinct terms of `text` in extraction order: YAKE candidates first,
/// then the remaining terms by descending frequency (ties by term).
std::vector<std::string> ranked_terms(std::string_view text);

/// The `n` best terms of `text`. Pads with frequent non-candidate terms when
/// there are fewer than `n` candidates; may return fewer than `n` terms only
/// when the text has fewer distinct terms. Throws DataError when the text has
/// no terms at all.
std::vector<std::string> extract_keywords(std::string_view text, std::size_t n);

} // namespace clarion
