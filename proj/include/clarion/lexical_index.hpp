#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "clarion/corpus.hpp"

namespace clarion {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(Bm25Params const &) const = default;
};

struct Posting {
    std::uint32_t doc = 0;  ///< ordinal into InvertedIndex::doc_ids()
    std::uint32_t tf = 0;

    friend bool operator==(Posting const &, Posting const &) = default;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    friend bool operator==(ScoredDoc const &, ScoredDoc const &) = default;
};

struct CandidateSet {
    std::string topic_id;
    std::vector<ScoredDoc> docs;  ///< descending score, ties by ascending doc_id
};

/// BM25 inverted index over title+body tokens. Document ordinals follow
/// ascending doc_id, so every posting list is sorted by doc_id.
class InvertedIndex {
  public:
    static InvertedIndex build(Corpus const &corpus, Bm25Params params = {});

    [[nodiscard]] std::size_t document_count() const noexcept { return doc_ids_.size(); }
    [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
    [[nodiscard]] Bm25Params const &params() const noexcept { return params_; }
    [[nodiscard]] std::vector<std::string> const &doc_ids() const noexcept { return doc_ids_; }
    [[nodiscard]] std::vector<std::uint32_t> const &doc_lengths() const noexcept { return doc_lengths_; }
    [[nodiscard]] std::map<std::string, std::vector<Posting>> const &postings() const noexcept
    {
        return postings_;
    }
    [[nodiscard]] std::vector<Posting> const *find_postings(std::string const &term) const;
    [[nodiscard]] std::uint32_t doc_ordinal(std::string const &doc_id) const;
    [[nodiscard]] std::uint32_t doc_length(std::string const &doc_id) const;

    /// IDF(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)); 0 for unseen terms.
    [[nodiscard]] double idf(std::string const &term) const;

    /// Sum over query term occurrences (duplicates count) of
    /// IDF * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avglen)).
    [[nodiscard]] double bm25_score(std::vector<std::string> const &query_terms,
                                    std::string const &doc_id) const;
    [[nodiscard]] double bm25_score(std::vector<std::string> const &query_terms,
                                    std::string const &doc_id, Bm25Params params) const;

    /// Top-k documents for `query_terms`; always returns min(k, N) documents,
    /// zero-scoring ones included, ordered by score then doc_id.
    [[nodiscard]] std::vector<ScoredDoc> search(std::vector<std::string> const &query_terms,
                                                std::size_t k) const;

    /// First-phase retrieval: tokenized topic text followed by the tokenized
    /// inferred query. Throws DataError when both are empty.
    [[nodiscard]] CandidateSet retrieve(std::string const &topic_id, std::string_view topic,
                                        std::string_view inferred_query, std::size_t k = 100) const;

    void save(std::filesystem::path const &path) const;
    static InvertedIndex load(std::filesystem::path const &path);

    friend bool operator==(InvertedIndex const &, InvertedIndex const &) = default;

  private:
    double term_weight(double idf, std::uint32_t tf, std::uint32_t length, Bm25Params p) const;
    void finalize();

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::map<std::string, std::vector<Posting>> postings_;
};

/// Query tokens used by retrieve(): topic tokens then inferred-query tokens.
std::vector<std::string> retrieval_query(std::string_view topic, std::string_view inferred_query);

} // namespace clarion
