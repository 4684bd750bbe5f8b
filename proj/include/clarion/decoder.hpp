#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "clarion/lexical_index.hpp"
#include "clarion/scorer.hpp"
#include "clarion/trie.hpp"

namespace clarion {

struct DecodeOptions {
    std::size_t beam_width = 10;
    std::size_t max_docs = 10;         ///< clamped to the candidate count
    std::ostream *trace = nullptr;     ///< JSON-lines beam dump per step when set
};

struct RankedList {
    /// Every candidate exactly once: generated documents first, then the rest
    /// in first-phase order. Scores are rank-derived and strictly decreasing.
    std::vector<ScoredDoc> docs;
    std::vector<TokenId> tokens;       ///< best finished generation
    double score = 0.0;                ///< its length-normalized log-probability
    std::size_t generated = 0;         ///< documents taken from the generation
};

/// Trie-constrained beam search. Beams are nested: the beams kept at width w
/// are always a subset of those kept at width w + 1, so widening the beam
/// never lowers the best finished score. Finished sequences are ranked by
/// log-probability divided by token count, ties by first-phase order of their
/// documents.
RankedList beam_decode(DecodingTrie const &trie, Scorer const &scorer, ScorerContext const &context,
                       DecodeOptions const &options = {});

/// Length-normalized log-probability of `tokens` under the masked scorer.
double sequence_score(DecodingTrie const &trie, Scorer const &scorer, ScorerContext const &context,
                      std::vector<TokenId> const &tokens, ConstraintOptions constraints);

/// Ranked list for a fixed generated order, completed in first-phase order.
RankedList complete_ranking(DecodingTrie const &trie, std::vector<std::uint32_t> const &generated);

} // namespace clarion
