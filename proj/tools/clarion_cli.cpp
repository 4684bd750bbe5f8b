// Command-line entry point: index, forge, split, train, pipeline, eval, compare.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clarion/conversation.hpp"
#include "clarion/corpus.hpp"
#include "clarion/errors.hpp"
#include "clarion/evaluation.hpp"
#include "clarion/forge.hpp"
#include "clarion/fusion.hpp"
#include "clarion/io.hpp"
#include "clarion/judge.hpp"
#include "clarion/lexical_index.hpp"
#include "clarion/pipeline.hpp"
#include "clarion/remote.hpp"
#include "clarion/training.hpp"

namespace fs = std::filesystem;
using namespace clarion;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRemote = 3;

constexpr char const *kManifestFile = "manifest.json";
constexpr char const *kIndexFile = "index.bin";

void require_file(fs::path const &path, char const *what)
{
    if (!fs::is_regular_file(path)) {
        throw DataError(std::string(what) + " not found: " + path.string());
    }
}

std::map<std::string, std::string> facet_of(std::vector<Conversation> const &conversations)
{
    std::map<std::string, std::string> out;
    for (auto const &c : conversations) {
        out[c.conversation_id] = c.facet_id;
    }
    return out;
}

struct Artifacts {
    CorpusManifest manifest;
    InvertedIndex index;
};

Artifacts load_artifacts(fs::path const &dir)
{
    require_file(dir / kManifestFile, "manifest");
    require_file(dir / kIndexFile, "index");
    return {load_manifest(dir / kManifestFile), InvertedIndex::load(dir / kIndexFile)};
}

std::unique_ptr<ChatClient> remote_client()
{
    return std::make_unique<HttpChatClient>(chat_options_from_env());
}

// ---------------------------------------------------------------- index

struct IndexArgs {
    std::string corpus;
    std::string out;
    std::size_t keywords = 5;
    double k1 = 1.2;
    double b = 0.75;
};

int cmd_index(IndexArgs const &a)
{
    require_file(a.corpus, "corpus");
    auto corpus = load_corpus(a.corpus);
    if (corpus.empty()) {
        throw DataError("corpus " + a.corpus + " has no documents");
    }
    auto manifest = assign_keyword_ids(corpus, a.keywords);
    auto index = InvertedIndex::build(corpus, {a.k1, a.b});
    fs::create_directories(a.out);
    save_manifest(fs::path(a.out) / kManifestFile, manifest);
    index.save(fs::path(a.out) / kIndexFile);
    std::cout << "indexed " << corpus.size() << " documents, vocabulary " << manifest.vocabulary.size()
              << " terms -> " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- forge

struct ForgeArgs {
    std::string pool;
    std::string topics;
    std::string out;
    std::string stats;
    std::vector<std::size_t> turns{2, 3, 4};
    std::size_t sample_size = 10000;
    std::uint64_t seed = 42;
    std::string judge = "stub";
    std::size_t jobs = 1;
};

int cmd_forge(ForgeArgs const &a)
{
    require_file(a.pool, "QA pool");
    require_file(a.topics, "topics");
    auto pool = load_qa_pool(a.pool);
    auto catalog = TopicCatalog::load(a.topics);
    for (auto t : a.turns) {
        if (t < 2 || t > Conversation::kMaxTurns) {
            throw UsageError("--turns values must be between 2 and 4");
        }
    }
    ForgeConfig config{a.turns, a.sample_size, a.seed, a.jobs};
    std::unique_ptr<ChatClient> client;
    std::unique_ptr<JudgeClient> judge;
    if (a.judge == "stub") {
        judge = std::make_unique<StubJudge>();
    } else {
        client = remote_client();
        judge = std::make_unique<RemoteJudge>(*client);
    }
    auto result = run_pipeline(pool, catalog, config, *judge);
    save_conversations(a.out, result.conversations);
    if (!a.stats.empty()) {
        io::write_file_atomic(a.stats, result.stats.to_json().dump(2) + "\n");
    }
    std::cout << "forged " << result.conversations.size() << " conversations (" << result.stats.total_in()
              << " sampled, " << result.stats.total_rejected() << " rejected as duplicates)\n";
    for (auto const &f : result.stats.refine_failures) {
        std::cerr << "refine failed, kept unrefined: " << f << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
    std::string conversations;
    std::string out_dir;
    std::uint64_t seed = 42;
};

int cmd_split(SplitArgs const &a)
{
    require_file(a.conversations, "conversations");
    auto convs = load_conversations(a.conversations);
    std::vector<std::string> facets;
    for (auto const &c : convs) {
        facets.push_back(c.facet_id);
    }
    auto split = split_facets(facets, a.seed);
    fs::create_directories(a.out_dir);
    nlohmann::json summary;
    summary["seed"] = a.seed;
    for (auto const &[name, part] : {std::pair{"train", &split.train}, std::pair{"val", &split.val},
                                     std::pair{"test", &split.test}}) {
        auto selected = select_facets(convs, *part);
        save_conversations(fs::path(a.out_dir) / (std::string(name) + ".jsonl"), selected);
        summary[name] = {{"facets", *part}, {"conversations", selected.size()}};
        std::cout << name << ": " << part->size() << " facets, " << selected.size() << " conversations\n";
    }
    io::write_file_atomic(fs::path(a.out_dir) / "split.json", summary.dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------- shared retrieval

struct CommonArgs {
    std::string conversations;
    std::string topics;
    std::string index_dir;
    std::string features;
    bool text_only = false;
    std::size_t k = 100;
    std::size_t jobs = 1;
    std::string summarizer = "keyword";
};

std::unique_ptr<Summarizer> make_summarizer(std::string const &kind, std::unique_ptr<ChatClient> &client)
{
    if (kind == "keyword") {
        return std::make_unique<KeywordSummarizer>();
    }
    client = remote_client();
    return std::make_unique<RemoteSummarizer>(*client);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    CommonArgs common;
    std::string qrels;
    std::string checkpoint;
    std::string loss_curve;
    std::size_t epochs = 10;
    double lr = 1e-4;
    double margin = 2.0;
    double lambda = 0.75;
    std::size_t batch = 2;
    std::uint64_t seed = 42;
    std::size_t dim = 64;
    std::size_t max_docs = 10;
};

int cmd_train(TrainArgs const &a)
{
    auto const &c = a.common;
    require_file(c.conversations, "conversations");
    require_file(c.topics, "topics");
    require_file(a.qrels, "qrels");
    auto catalog = TopicCatalog::load(c.topics);
    auto convs = load_conversations(c.conversations, &catalog);
    auto qrels = read_qrels(a.qrels);
    auto art = load_artifacts(c.index_dir);
    std::optional<ImageFeatureStore> store;
    if (!c.text_only) {
        if (c.features.empty()) {
            throw UsageError("--features is required unless --text-only is given");
        }
        require_file(c.features, "image features");
        store = ImageFeatureStore::load(c.features);
    }
    std::unique_ptr<ChatClient> client;
    auto summarizer = make_summarizer(c.summarizer, client);

    PipelineOptions first_phase;
    first_phase.k = c.k;
    first_phase.jobs = c.jobs;
    first_phase.modality = c.text_only ? Modality::TextOnly : Modality::MultiModal;
    auto records = run_conversations(convs, catalog, art.index, art.manifest, *summarizer, nullptr,
                                     store ? &*store : nullptr, first_phase);
    std::map<std::string, Conversation const *> by_id;
    for (auto const &conv : convs) {
        by_id[conv.conversation_id] = &conv;
    }
    std::vector<TrainingInput> inputs;
    for (auto const &r : records) {
        auto const &conv = *by_id.at(r.conversation_id);
        inputs.push_back({r.conversation_id, conv.facet_id,
                          make_context(art.manifest.vocabulary, catalog.get(conv.topic_id).query, r.inferred_query,
                                       conv, store ? &*store : nullptr),
                          r.candidates});
    }
    TrainingSetReport report;
    auto examples = build_training_set(inputs, qrels, art.manifest, &report, {a.max_docs, a.max_docs});
    std::cout << "training examples: " << report.examples << " (skipped " << report.skipped_no_positive
              << " without positives, " << report.skipped_no_negative << " without negatives)\n";

    FusionDims dims{art.manifest.vocabulary.size(), a.dim, store ? store->dim() : 0, a.dim};
    auto model = FusionModel::create(dims, a.seed);
    TrainOptions opts;
    opts.epochs = a.epochs;
    opts.seed = a.seed;
    opts.loss = {a.margin, a.lambda, a.lr, a.batch};
    opts.constraints.max_docs = a.max_docs;
    opts.on_epoch = [](std::size_t epoch, double loss) {
        std::cout << "epoch " << epoch << " loss " << io::format_double(loss) << "\n" << std::flush;
    };
    auto result = train(model, examples, opts);
    model.save(a.checkpoint, art.manifest.vocabulary.hash());
    if (!a.loss_curve.empty()) {
        write_loss_curve(a.loss_curve, result.epoch_loss);
    }
    return kExitOk;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
    CommonArgs common;
    std::string mode = "bm25-only";
    std::string scorer = "fusion";
    std::string checkpoint;
    std::string run;
    std::string tag = "clarion";
    std::string trace;
    std::size_t beams = 10;
    std::size_t max_docs = 10;
};

int cmd_pipeline(PipelineArgs const &a)
{
    auto const &c = a.common;
    require_file(c.conversations, "conversations");
    require_file(c.topics, "topics");
    auto catalog = TopicCatalog::load(c.topics);
    auto convs = load_conversations(c.conversations, &catalog);
    auto art = load_artifacts(c.index_dir);

    PipelineOptions opts;
    opts.mode = a.mode == "rerank" ? RankMode::Rerank : RankMode::Bm25Only;
    opts.modality = c.text_only ? Modality::TextOnly : Modality::MultiModal;
    opts.k = c.k;
    opts.jobs = c.jobs;
    opts.decode.beam_width = a.beams;
    opts.decode.max_docs = a.max_docs;
    opts.collect_trace = !a.trace.empty();

    std::unique_ptr<Scorer> scorer;
    std::optional<ImageFeatureStore> store;
    if (opts.mode == RankMode::Rerank) {
        if (a.scorer == "lexical") {
            scorer = std::make_unique<LexicalScorer>(art.manifest.vocabulary.size());
        } else {
            if (a.checkpoint.empty()) {
                throw UsageError("--mode rerank with the fusion scorer requires --checkpoint");
            }
            require_file(a.checkpoint, "checkpoint");
            scorer = std::make_unique<FusionModel>(FusionModel::load(a.checkpoint, art.manifest.vocabulary.hash()));
        }
        // Image features are read only for multi-modal re-ranking.
        if (!c.text_only && !c.features.empty()) {
            require_file(c.features, "image features");
            store = ImageFeatureStore::load(c.features);
        }
    }
    std::unique_ptr<ChatClient> client;
    auto summarizer = make_summarizer(c.summarizer, client);
    auto records = run_conversations(convs, catalog, art.index, art.manifest, *summarizer, scorer.get(),
                                     store ? &*store : nullptr, opts);
    write_run(a.run, to_run(records, a.tag));
    if (!a.trace.empty()) {
        std::string out;
        for (auto const &r : records) {
            out += nlohmann::json{{"conversation_id", r.conversation_id}, {"inferred_query", r.inferred_query}}.dump();
            out += "\n" + r.trace;
        }
        io::write_file_atomic(a.trace, out);
    }
    std::cout << "ranked " << records.size() << " conversations -> " << a.run << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval / compare

struct EvalArgs {
    std::string run;
    std::string baseline;
    std::string qrels;
    std::string conversations;
    std::string json;
    int threshold = 1;
};

EvalOptions eval_options(EvalArgs const &a)
{
    EvalOptions opts;
    opts.relevance_threshold = a.threshold;
    if (!a.conversations.empty()) {
        require_file(a.conversations, "conversations");
        opts.topic_key = facet_of(load_conversations(a.conversations));
    }
    return opts;
}

int cmd_eval(EvalArgs const &a)
{
    require_file(a.run, "run");
    require_file(a.qrels, "qrels");
    auto report = evaluate(read_run(a.run), read_qrels(a.qrels), eval_options(a));
    std::cout << report.to_table();
    if (!a.json.empty()) {
        io::write_file_atomic(a.json, report.to_json().dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_compare(EvalArgs const &a)
{
    require_file(a.baseline, "baseline run");
    require_file(a.run, "system run");
    require_file(a.qrels, "qrels");
    auto report = compare_runs(read_run(a.baseline), read_run(a.run), read_qrels(a.qrels), eval_options(a));
    std::cout << report.to_table();
    if (!a.json.empty()) {
        io::write_file_atomic(a.json, report.to_json().dump(2) + "\n");
    }
    return kExitOk;
}

void add_common(CLI::App *cmd, CommonArgs &c, bool needs_features)
{
    cmd->add_option("--conversations", c.conversations, "Conversations JSON-lines file")->required();
    cmd->add_option("--topics", c.topics, "Topic catalog JSON-lines file")->required();
    cmd->add_option("--index-dir", c.index_dir, "Directory written by 'index'")->required();
    cmd->add_option("--features", c.features, needs_features ? "Image feature store" : "Image feature store (rerank)");
    cmd->add_flag("--text-only", c.text_only, "Ignore images (uni-modal ablation)");
    cmd->add_option("-k,--top-k", c.k, "First-phase candidates per conversation")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", c.jobs, "Conversations processed concurrently")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--summarizer", c.summarizer, "Inferred-query summarizer")
        ->check(CLI::IsMember({"keyword", "remote"}))
        ->capture_default_str();
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Conversational retrieval: BM25 first phase with trie-constrained generative re-ranking"};
    app.require_subcommand(1);

    IndexArgs index_args;
    auto *index = app.add_subcommand("index", "Assign keyword identifiers and build the BM25 index");
    index->add_option("--corpus", index_args.corpus, "Corpus JSON-lines file")->required();
    index->add_option("--out", index_args.out, "Output directory")->required();
    index->add_option("--keywords", index_args.keywords, "Keywords per identifier")->capture_default_str()
        ->check(CLI::PositiveNumber);
    index->add_option("--k1", index_args.k1, "BM25 k1")->capture_default_str();
    index->add_option("--b", index_args.b, "BM25 b")->capture_default_str();

    ForgeArgs forge_args;
    auto *forge = app.add_subcommand("forge", "Build multi-turn conversations from single-turn QA pairs");
    forge->add_option("--pool", forge_args.pool, "Single-turn QA JSON-lines file")->required();
    forge->add_option("--topics", forge_args.topics, "Topic catalog JSON-lines file")->required();
    forge->add_option("--out", forge_args.out, "Output conversations file")->required();
    forge->add_option("--stats", forge_args.stats, "Stats JSON output");
    forge->add_option("--turns", forge_args.turns, "Turn-count targets")->capture_default_str()->delimiter(',');
    forge->add_option("--sample-size", forge_args.sample_size, "Conversations sampled per target")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    forge->add_option("--seed", forge_args.seed, "Sampling seed")->capture_default_str();
    forge->add_option("--judge", forge_args.judge, "Judge client (remote reads JUDGE_ENDPOINT, JUDGE_API_KEY)")
        ->check(CLI::IsMember({"stub", "remote"}))
        ->capture_default_str();
    forge->add_option("--jobs", forge_args.jobs, "Concurrent judge calls")->capture_default_str()
        ->check(CLI::PositiveNumber);

    SplitArgs split_args;
    auto *split = app.add_subcommand("split", "Facet-level 80/10/10 split of a conversations file");
    split->add_option("--conversations", split_args.conversations, "Conversations file")->required();
    split->add_option("--out-dir", split_args.out_dir, "Output directory")->required();
    split->add_option("--seed", split_args.seed, "Shuffle seed")->capture_default_str();

    TrainArgs train_args;
    auto *trainc = app.add_subcommand("train", "Train the fusion re-ranker");
    add_common(trainc, train_args.common, true);
    trainc->add_option("--qrels", train_args.qrels, "Qrels keyed by facet id")->required();
    trainc->add_option("--checkpoint", train_args.checkpoint, "Output checkpoint")->required();
    trainc->add_option("--loss-curve", train_args.loss_curve, "Per-epoch loss CSV");
    trainc->add_option("--epochs", train_args.epochs, "Epochs")->capture_default_str();
    trainc->add_option("--lr", train_args.lr, "SGD learning rate")->capture_default_str();
    trainc->add_option("--margin", train_args.margin, "Ranking margin m")->capture_default_str();
    trainc->add_option("--lambda", train_args.lambda, "Ranking loss weight")->capture_default_str();
    trainc->add_option("--batch-size", train_args.batch, "Batch size")->capture_default_str()
        ->check(CLI::PositiveNumber);
    trainc->add_option("--seed", train_args.seed, "Initialization and shuffle seed")->capture_default_str();
    trainc->add_option("--dim", train_args.dim, "Model width")->capture_default_str()->check(CLI::PositiveNumber);
    trainc->add_option("--max-docs", train_args.max_docs, "Documents per training target")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    PipelineArgs pipe_args;
    auto *pipe = app.add_subcommand("pipeline", "Infer queries, retrieve, optionally re-rank; write a TREC run");
    add_common(pipe, pipe_args.common, false);
    pipe->add_option("--mode", pipe_args.mode, "Ranking mode")
        ->check(CLI::IsMember({"bm25-only", "rerank"}))
        ->capture_default_str();
    pipe->add_option("--scorer", pipe_args.scorer, "Re-ranking scorer")
        ->check(CLI::IsMember({"fusion", "lexical"}))
        ->capture_default_str();
    pipe->add_option("--checkpoint", pipe_args.checkpoint, "Fusion checkpoint");
    pipe->add_option("--run", pipe_args.run, "Output run file")->required();
    pipe->add_option("--tag", pipe_args.tag, "Run tag")->capture_default_str();
    pipe->add_option("--trace", pipe_args.trace, "Beam trace JSON-lines output");
    pipe->add_option("--beams", pipe_args.beams, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
    pipe->add_option("--max-docs", pipe_args.max_docs, "Documents generated before fallback")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    EvalArgs eval_args;
    auto *evalc = app.add_subcommand("eval", "Score a run against qrels");
    evalc->add_option("--run", eval_args.run, "Run file")->required();
    evalc->add_option("--qrels", eval_args.qrels, "Qrels file")->required();
    evalc->add_option("--conversations", eval_args.conversations,
                      "Conversations mapping run topics to qrels facets");
    evalc->add_option("--json", eval_args.json, "Report JSON output");
    evalc->add_option("--threshold", eval_args.threshold, "Minimum relevant grade")->capture_default_str();

    EvalArgs cmp_args;
    auto *cmp = app.add_subcommand("compare", "Metric deltas of a system run over a baseline run");
    cmp->add_option("--baseline", cmp_args.baseline, "Baseline run")->required();
    cmp->add_option("--system", cmp_args.run, "System run")->required();
    cmp->add_option("--qrels", cmp_args.qrels, "Qrels file")->required();
    cmp->add_option("--conversations", cmp_args.conversations,
                    "Conversations mapping run topics to qrels facets");
    cmp->add_option("--json", cmp_args.json, "Report JSON output");
    cmp->add_option("--threshold", cmp_args.threshold, "Minimum relevant grade")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const &e) {
        return app.exit(e);
    } catch (CLI::CallForAllHelp const &e) {
        return app.exit(e);
    } catch (CLI::CallForVersion const &e) {
        return app.exit(e);
    } catch (CLI::ParseError const &e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (index->parsed()) {
            return cmd_index(index_args);
        }
        if (forge->parsed()) {
            return cmd_forge(forge_args);
        }
        if (split->parsed()) {
            return cmd_split(split_args);
        }
        if (trainc->parsed()) {
            return cmd_train(train_args);
        }
        if (pipe->parsed()) {
            return cmd_pipeline(pipe_args);
        }
        if (evalc->parsed()) {
            return cmd_eval(eval_args);
        }
        if (cmp->parsed()) {
            return cmd_compare(cmp_args);
        }
    } catch (UsageError const &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (RemoteError const &e) {
        std::cerr << "remote error (" << e.endpoint() << "): " << e.what() << "\n";
        return kExitRemote;
    } catch (ForgeError const &e) {
        std::cerr << "forge failed in " << e.what() << "\n";
        return e.endpoint().empty() ? kExitData : kExitRemote;
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
