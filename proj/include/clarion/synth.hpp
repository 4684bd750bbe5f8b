#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "clarion/conversation.hpp"
#include "clarion/corpus.hpp"
#include "clarion/evaluation.hpp"
#include "clarion/forge.hpp"

namespace clarion {

/// Planted-signal benchmark: every topic is a product type whose documents
/// combine one color with one material. A facet asks for one (color,
/// material) pair. Conversations state the material in text and reveal the
/// color only through images drawn from a per-color feature cluster, so
/// first-phase retrieval cannot separate documents that differ by color.
struct BenchmarkConfig {
    std::size_t topics = 20;
    std::size_t docs_per_topic = 10;
    std::size_t facets_per_topic = 4;  ///< at most 4 use the color x material grid
    std::size_t variants_per_facet = 4;  ///< conversations per facet and turn count
    std::size_t image_dim = 16;
    double image_noise = 0.35;
    std::uint64_t seed = 7;
};

struct Benchmark {
    Corpus corpus;
    TopicCatalog catalog;
    std::vector<Conversation> conversations;  ///< 1 to 4 turns each
    Qrels qrels;                              ///< keyed by facet id
    ImageFeatureStore images;
    std::vector<SingleTurnQA> qa_pool;
};

Benchmark make_benchmark(BenchmarkConfig const &config = {});

/// Writes corpus.jsonl, topics.jsonl, conversations.jsonl, qrels.txt,
/// features.tsv and qa_pool.jsonl into `dir`.
void write_benchmark(std::filesystem::path const &dir, Benchmark const &benchmark);

} // namespace clarion
