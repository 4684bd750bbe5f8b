#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clarion/corpus.hpp"
#include "clarion/lexical_index.hpp"

namespace clarion {

/// Prefix tree over the keyword-identifier token sequences of a candidate
/// set. Candidates keep their first-phase order; `candidate` indices refer
/// to that order.
class DecodingTrie {
  public:
    static constexpr std::uint32_t kRoot = 0;
    static constexpr std::int32_t kNoDoc = -1;

    struct Node {
        std::vector<std::pair<TokenId, std::uint32_t>> children;  ///< sorted by token
        std::int32_t terminal = kNoDoc;                            ///< candidate index ending here
        std::vector<std::uint32_t> subtree;                        ///< candidate indices below, ascending
    };

    /// Throws DataError for an empty candidate set or a candidate without a
    /// keyword identifier in `manifest`.
    static DecodingTrie build(CandidateSet const &candidates, CorpusManifest const &manifest);
    /// Direct construction from (doc_id, tokens) pairs in first-phase order.
    /// Sequences must be nonempty, distinct and free of SEP/END tokens.
    static DecodingTrie from_sequences(std::vector<std::pair<std::string, std::vector<TokenId>>> sequences);

    [[nodiscard]] std::size_t candidate_count() const noexcept { return doc_ids_.size(); }
    [[nodiscard]] std::string const &doc_id(std::size_t candidate) const { return doc_ids_.at(candidate); }
    [[nodiscard]] std::vector<std::string> const &doc_ids() const noexcept { return doc_ids_; }
    [[nodiscard]] std::vector<TokenId> const &sequence(std::size_t candidate) const
    {
        return sequences_.at(candidate);
    }
    [[nodiscard]] std::vector<Node> const &nodes() const noexcept { return nodes_; }
    [[nodiscard]] Node const &node(std::uint32_t id) const { return nodes_.at(id); }
    /// Child reached from `node` by `token`, or -1.
    [[nodiscard]] std::int64_t child(std::uint32_t node, TokenId token) const;
    [[nodiscard]] std::size_t terminal_count() const;

  private:
    std::vector<std::string> doc_ids_;
    std::vector<std::vector<TokenId>> sequences_;
    std::vector<Node> nodes_;
};

struct ConstraintOptions {
    /// Prune branches that can only lead to documents already emitted.
    bool suppress_duplicates = true;
    /// Stop offering SEP once this many documents are emitted (0 = no limit).
    std::size_t max_docs = 0;
};

/// Incremental decoding position: current trie node plus the documents
/// completed so far.
class TrieCursor {
  public:
    explicit TrieCursor(DecodingTrie const &trie, ConstraintOptions options = {});

    /// Allowed next tokens in ascending order. Empty once END was consumed.
    [[nodiscard]] std::vector<TokenId> allowed() const;
    [[nodiscard]] bool allows(TokenId token) const;
    /// Consumes `token`; throws DataError when it is not allowed.
    void advance(TokenId token);

    [[nodiscard]] bool finished() const noexcept { return finished_; }
    [[nodiscard]] std::uint32_t node() const noexcept { return node_; }
    /// Candidate indices in emission order.
    [[nodiscard]] std::vector<std::uint32_t> const &emitted() const noexcept { return emitted_; }
    [[nodiscard]] bool is_emitted(std::uint32_t candidate) const { return emitted_mask_.at(candidate); }

  private:
    [[nodiscard]] bool alive(std::uint32_t node) const;
    [[nodiscard]] bool can_continue() const;

    DecodingTrie const *trie_;
    ConstraintOptions options_;
    std::uint32_t node_ = DecodingTrie::kRoot;
    std::vector<std::uint32_t> emitted_;
    std::vector<bool> emitted_mask_;
    bool finished_ = false;
};

/// Allowed set after `prefix`; throws DataError when the prefix itself
/// violates the constraints.
std::vector<TokenId> allowed_tokens(DecodingTrie const &trie, std::span<TokenId const> prefix,
                                    ConstraintOptions options = {});

/// Splits a generated stream on SEP (stopping at END) and maps each segment to
/// its document, keeping the first occurrence of repeated documents. Throws
/// DataError for a segment that is not a complete trie path.
std::vector<std::string> parse_generation(std::span<TokenId const> tokens, DecodingTrie const &trie);

/// Token sequence for emitting `candidates` in order, terminated by END.
std::vector<TokenId> generation_tokens(DecodingTrie const &trie, std::span<std::uint32_t const> candidates);

} // namespace clarion
