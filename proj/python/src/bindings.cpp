#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "clarion/corpus.hpp"
#include "clarion/decoder.hpp"
#include "clarion/errors.hpp"
#include "clarion/evaluation.hpp"
#include "clarion/keywords.hpp"
#include "clarion/lexical_index.hpp"
#include "clarion/scorer.hpp"
#include "clarion/text.hpp"
#include "clarion/training.hpp"
#include "clarion/trie.hpp"

namespace py = pybind11;
using namespace clarion;

namespace {

// Python-side scorer: a callable (context_tokens, prefix) -> list of logits.
class CallbackScorer final : public Scorer {
  public:
    CallbackScorer(std::size_t vocab, py::function fn) : vocab_(vocab), fn_(std::move(fn)) {}

    [[nodiscard]] std::size_t vocab_size() const override { return vocab_; }
    [[nodiscard]] bool concurrent() const override { return false; }
    std::unique_ptr<ScorerSession> start(ScorerContext const &context) const override
    {
        return std::make_unique<Session>(*this, context.text);
    }

  private:
    class Session final : public ScorerSession {
      public:
        Session(CallbackScorer const &owner, std::vector<TokenId> text) : owner_(owner), text_(std::move(text)) {}
        std::vector<double> next(std::span<TokenId const> prefix) override
        {
            auto out = owner_.fn_(text_, std::vector<TokenId>(prefix.begin(), prefix.end()))
                           .template cast<std::vector<double>>();
            if (out.size() != owner_.vocab_) {
                throw DataError("scorer returned " + std::to_string(out.size()) + " logits, expected " +
                                std::to_string(owner_.vocab_));
            }
            return out;
        }

      private:
        CallbackScorer const &owner_;
        std::vector<TokenId> text_;
    };

    std::size_t vocab_;
    py::function fn_;
};

using RankingMap = std::map<std::string, std::vector<std::pair<std::string, double>>>;

clarion::Run to_run(RankingMap const &rankings, std::string const &tag)
{
    clarion::Run run;
    run.tag = tag;
    for (auto const &[topic, docs] : rankings) {
        auto &out = run.topics[topic];
        for (auto const &[doc, score] : docs) {
            out.push_back({doc, score});
        }
    }
    return run;
}

RankingMap from_run(clarion::Run const &run)
{
    RankingMap out;
    for (auto const &[topic, docs] : run.topics) {
        auto &list = out[topic];
        for (auto const &d : docs) {
            list.emplace_back(d.doc_id, d.score);
        }
    }
    return out;
}

Qrels to_qrels(std::map<std::string, std::map<std::string, int>> const &grades)
{
    Qrels q;
    for (auto const &[topic, docs] : grades) {
        for (auto const &[doc, grade] : docs) {
            q.set(topic, doc, grade);
        }
    }
    return q;
}

} // namespace

PYBIND11_MODULE(_clarion, m)
{
    m.doc() = "Conversational retrieval core: BM25, keyword identifiers, constrained decoding, evaluation";

    auto base = py::register_exception<Error>(m, "ClarionError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<RemoteError>(m, "RemoteError", base.ptr());

    m.attr("SEP") = Vocabulary::kSep;
    m.attr("END") = Vocabulary::kEnd;
    m.attr("UNK") = Vocabulary::kUnk;

    m.def("normalize", [](std::string const &s) { return text::normalize(s); });
    m.def("tokenize", [](std::string const &s) { return text::tokenize(s); });
    m.def("extract_keywords", [](std::string const &s, std::size_t n) { return extract_keywords(s, n); },
          py::arg("text"), py::arg("n") = 5);
    m.def("ranked_terms", [](std::string const &s) { return ranked_terms(s); });

    py::class_<Document>(m, "Document")
        .def(py::init([](std::string id, std::string title, std::string body) {
                 return Document{std::move(id), std::move(title), std::move(body)};
             }),
             py::arg("doc_id"), py::arg("title") = "", py::arg("body") = "")
        .def_readwrite("doc_id", &Document::doc_id)
        .def_readwrite("title", &Document::title)
        .def_readwrite("body", &Document::body);

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def("add", &Corpus::add_document, py::arg("document"))
        .def("__len__", &Corpus::size)
        .def("get", &Corpus::get, py::return_value_policy::copy)
        .def_static("load", [](std::filesystem::path const &p) { return load_corpus(p); })
        .def("save", [](Corpus const &c, std::filesystem::path const &p) { save_corpus(p, c); });

    py::class_<Vocabulary>(m, "Vocabulary")
        .def("__len__", &Vocabulary::size)
        .def("lookup", &Vocabulary::lookup)
        .def("term", &Vocabulary::term, py::return_value_policy::copy)
        .def_property_readonly("terms", &Vocabulary::terms)
        .def_property_readonly("hash", &Vocabulary::hash);

    py::class_<CorpusManifest>(m, "CorpusManifest")
        .def_readonly("vocabulary", &CorpusManifest::vocabulary)
        .def_readonly("keywords_per_doc", &CorpusManifest::keywords_per_doc)
        .def("keywords", [](CorpusManifest const &mf, std::string const &id) { return mf.keyword_id(id).keywords; })
        .def("tokens", [](CorpusManifest const &mf, std::string const &id) { return mf.keyword_id(id).tokens; })
        .def("save", [](CorpusManifest const &mf, std::filesystem::path const &p) { save_manifest(p, mf); })
        .def_static("load", [](std::filesystem::path const &p) { return load_manifest(p); });
    m.def("assign_keyword_ids", &assign_keyword_ids, py::arg("corpus"), py::arg("keywords_per_doc") = 5);

    py::class_<InvertedIndex>(m, "InvertedIndex")
        .def_static(
            "build",
            [](Corpus const &c, double k1, double b) { return InvertedIndex::build(c, {k1, b}); },
            py::arg("corpus"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def_static("load", &InvertedIndex::load)
        .def("save", &InvertedIndex::save)
        .def_property_readonly("document_count", &InvertedIndex::document_count)
        .def_property_readonly("avg_doc_length", &InvertedIndex::avg_doc_length)
        .def("idf", &InvertedIndex::idf)
        .def(
            "retrieve",
            [](InvertedIndex const &idx, std::string const &topic, std::string const &inferred, std::size_t k) {
                std::vector<std::pair<std::string, double>> out;
                for (auto const &d : idx.retrieve("q", topic, inferred, k).docs) {
                    out.emplace_back(d.doc_id, d.score);
                }
                return out;
            },
            py::arg("topic"), py::arg("inferred_query") = "", py::arg("k") = 100);

    py::class_<ConstraintOptions>(m, "ConstraintOptions")
        .def(py::init([](bool suppress, std::size_t max_docs) { return ConstraintOptions{suppress, max_docs}; }),
             py::arg("suppress_duplicates") = true, py::arg("max_docs") = 0)
        .def_readwrite("suppress_duplicates", &ConstraintOptions::suppress_duplicates)
        .def_readwrite("max_docs", &ConstraintOptions::max_docs);

    py::class_<DecodingTrie>(m, "DecodingTrie")
        .def_static("from_sequences", &DecodingTrie::from_sequences, py::arg("sequences"))
        .def_property_readonly("candidate_count", &DecodingTrie::candidate_count)
        .def_property_readonly("doc_ids", &DecodingTrie::doc_ids)
        .def(
            "allowed",
            [](DecodingTrie const &t, std::vector<TokenId> const &prefix, ConstraintOptions const &o) {
                return allowed_tokens(t, prefix, o);
            },
            py::arg("prefix"), py::arg("options") = ConstraintOptions{})
        .def("parse", [](DecodingTrie const &t, std::vector<TokenId> const &tokens) {
            return parse_generation(tokens, t);
        });

    m.def(
        "beam_decode",
        [](DecodingTrie const &trie, std::size_t vocab, py::function scorer, std::vector<TokenId> context,
           std::size_t beam_width, std::size_t max_docs) {
            CallbackScorer cb(vocab, std::move(scorer));
            DecodeOptions o;
            o.beam_width = beam_width;
            o.max_docs = max_docs;
            auto r = beam_decode(trie, cb, {std::move(context), {}}, o);
            std::vector<std::string> docs;
            for (auto const &d : r.docs) {
                docs.push_back(d.doc_id);
            }
            return py::make_tuple(docs, r.tokens, r.score);
        },
        py::arg("trie"), py::arg("vocab_size"), py::arg("scorer"), py::arg("context") = std::vector<TokenId>{},
        py::arg("beam_width") = 10, py::arg("max_docs") = 10,
        "Returns (ranked doc ids, generated tokens, normalized score). `scorer(context, prefix)` returns logits.");

    m.def("rank_loss", &rank_loss, py::arg("positive"), py::arg("negative"), py::arg("margin") = 2.0);
    m.def(
        "combine_losses",
        [](double pos, double neg, double margin, double lambda) { return combine_losses(pos, neg, {margin, lambda}); },
        py::arg("positive"), py::arg("negative"), py::arg("margin") = 2.0, py::arg("lambda_rank") = 0.75);

    m.def(
        "evaluate",
        [](RankingMap const &run, std::map<std::string, std::map<std::string, int>> const &qrels, int threshold) {
            EvalOptions o;
            o.relevance_threshold = threshold;
            return evaluate(to_run(run, "py"), to_qrels(qrels), o).mean;
        },
        py::arg("run"), py::arg("qrels"), py::arg("threshold") = 1,
        "Mean metrics of {topic: [(doc, score), ...]} against {topic: {doc: grade}}.");
    m.def(
        "relative_delta", [](double baseline, double system) { return metric_delta(baseline, system).relative; },
        py::arg("baseline"), py::arg("system"));
    m.def("read_run", [](std::filesystem::path const &p) { return from_run(read_run(p)); });
    m.def(
        "write_run",
        [](std::filesystem::path const &p, RankingMap const &run, std::string const &tag) {
            write_run(p, to_run(run, tag));
        },
        py::arg("path"), py::arg("run"), py::arg("tag") = "clarion");
    m.def("read_qrels", [](std::filesystem::path const &p) { return read_qrels(p).grades; });
}
