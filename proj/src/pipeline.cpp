#include "clarion/pipeline.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "clarion/errors.hpp"

namespace clarion {

SplitSizes split_sizes(std::size_t n)
{
    SplitSizes s;
    s.train = n * 8 / 10;
    auto rest = n - s.train;
    s.val = rest / 2;
    s.test = rest / 2;
    s.train += rest % 2;
    return s;
}

FacetSplit split_facets(std::vector<std::string> facet_ids, std::uint64_t seed)
{
    std::sort(facet_ids.begin(), facet_ids.end());
    facet_ids.erase(std::unique(facet_ids.begin(), facet_ids.end()), facet_ids.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = facet_ids.size(); i > 1; --i) {
        std::swap(facet_ids[i - 1], facet_ids[rng() % i]);
    }
    auto sizes = split_sizes(facet_ids.size());
    FacetSplit out;
    auto it = facet_ids.begin();
    out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
    it += static_cast<std::ptrdiff_t>(sizes.train);
    out.val.assign(it, it + static_cast<std::ptrdiff_t>(sizes.val));
    it += static_cast<std::ptrdiff_t>(sizes.val);
    out.test.assign(it, facet_ids.end());
    for (auto *part : {&out.train, &out.val, &out.test}) {
        std::sort(part->begin(), part->end());
    }
    return out;
}

std::vector<Conversation> select_facets(std::vector<Conversation> const &conversations,
                                        std::vector<std::string> const &facets)
{
    std::set<std::string> keep(facets.begin(), facets.end());
    std::vector<Conversation> out;
    for (auto const &c : conversations) {
        if (keep.count(c.facet_id)) {
            out.push_back(c);
        }
    }
    return out;
}

ScorerContext make_context(Vocabulary const &vocabulary, std::string const &topic_query,
                           std::string const &inferred_query, Conversation const &conversation,
                           ImageFeatureStore const *store)
{
    ScorerContext ctx;
    for (auto const &term : retrieval_query(topic_query, inferred_query)) {
        ctx.text.push_back(vocabulary.lookup(term));
    }
    if (store != nullptr) {
        ctx.images = conversation_images(conversation, *store);
    }
    return ctx;
}

std::vector<PipelineRecord> run_conversations(std::vector<Conversation> const &conversations,
                                              TopicCatalog const &catalog, InvertedIndex const &index,
                                              CorpusManifest const &manifest, Summarizer &summarizer,
                                              Scorer const *scorer, ImageFeatureStore const *store,
                                              PipelineOptions const &options)
{
    if (options.mode == RankMode::Rerank && scorer == nullptr) {
        throw UsageError("re-ranking requires a scorer");
    }
    std::vector<Conversation const *> order;
    for (auto const &c : conversations) {
        order.push_back(&c);
    }
    std::sort(order.begin(), order.end(),
              [](auto const *a, auto const *b) { return a->conversation_id < b->conversation_id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->conversation_id == order[i - 1]->conversation_id) {
            throw DataError("duplicate conversation id '" + order[i]->conversation_id + "'");
        }
    }
    auto jobs = options.jobs;
    if (scorer != nullptr && !scorer->concurrent()) {
        jobs = 1;
    }
    ImageFeatureStore const *images = options.modality == Modality::MultiModal ? store : nullptr;

    std::vector<PipelineRecord> records(order.size());
    parallel_for(order.size(), jobs, [&](std::size_t i) {
        auto const &conv = *order[i];
        auto const &topic = catalog.get(conv.topic_id);
        auto &rec = records[i];
        rec.conversation_id = conv.conversation_id;
        rec.inferred_query = infer_query(conv, topic, summarizer);
        rec.candidates = index.retrieve(conv.conversation_id, topic.query, rec.inferred_query, options.k);
        if (options.mode == RankMode::Bm25Only) {
            rec.ranking = rec.candidates.docs;
            return;
        }
        rec.context = make_context(manifest.vocabulary, topic.query, rec.inferred_query, conv, images);
        auto trie = DecodingTrie::build(rec.candidates, manifest);
        std::ostringstream trace;
        auto decode = options.decode;
        decode.trace = options.collect_trace ? &trace : nullptr;
        try {
            rec.ranking = beam_decode(trie, *scorer, rec.context, decode).docs;
        } catch (std::exception const &e) {
            throw Error("conversation '" + conv.conversation_id + "': " + e.what());
        }
        rec.trace = trace.str();
    });
    return records;
}

Run to_run(std::vector<PipelineRecord> const &records, std::string tag)
{
    Run run;
    run.tag = std::move(tag);
    for (auto const &r : records) {
        run.topics[r.conversation_id] = r.ranking;
    }
    return run;
}

} // namespace clarion
