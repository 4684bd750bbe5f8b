#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "clarion/conversation.hpp"
#include "clarion/corpus.hpp"
#include "clarion/decoder.hpp"
#include "clarion/evaluation.hpp"
#include "clarion/lexical_index.hpp"
#include "clarion/parallel.hpp"
#include "clarion/scorer.hpp"

namespace clarion {

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    friend bool operator==(SplitSizes const &, SplitSizes const &) = default;
};

/// train = floor(0.8 n); val and test share the rest equally, and an odd
/// leftover goes to train.
SplitSizes split_sizes(std::size_t n);

struct FacetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Seeded shuffle of the distinct facet ids (sorted first), then partition.
FacetSplit split_facets(std::vector<std::string> facet_ids, std::uint64_t seed);

/// Conversations whose facet is in `facets`, in input order.
std::vector<Conversation> select_facets(std::vector<Conversation> const &conversations,
                                        std::vector<std::string> const &facets);

enum class RankMode { Bm25Only, Rerank };
enum class Modality { MultiModal, TextOnly };

struct PipelineOptions {
    RankMode mode = RankMode::Bm25Only;
    Modality modality = Modality::MultiModal;
    std::size_t k = 100;
    DecodeOptions decode;
    std::size_t jobs = 1;
    bool collect_trace = false;  ///< keep the beam trace of every re-ranked conversation
};

/// Re-ranker input for one conversation: topic + inferred query tokens, plus
/// the conversation's image features unless `store` is null.
ScorerContext make_context(Vocabulary const &vocabulary, std::string const &topic_query,
                           std::string const &inferred_query, Conversation const &conversation,
                           ImageFeatureStore const *store);

struct PipelineRecord {
    std::string conversation_id;
    std::string inferred_query;
    CandidateSet candidates;
    ScorerContext context;
    std::vector<ScoredDoc> ranking;
    std::string trace;  ///< JSON-lines beam dump when requested
};

/// Per conversation: infer query, retrieve top-k, optionally re-rank. Work
/// is spread over `jobs` threads; records come back in conversation-id order.
/// `scorer` is required for RankMode::Rerank; `store` is only consulted in
/// multi-modal re-ranking.
std::vector<PipelineRecord> run_conversations(std::vector<Conversation> const &conversations,
                                              TopicCatalog const &catalog, InvertedIndex const &index,
                                              CorpusManifest const &manifest, Summarizer &summarizer,
                                              Scorer const *scorer, ImageFeatureStore const *store,
                                              PipelineOptions const &options);

Run to_run(std::vector<PipelineRecord> const &records, std::string tag);

} // namespace clarion
