#include "clarion/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"
#include "clarion/keywords.hpp"
#include "clarion/text.hpp"

namespace clarion {

using nlohmann::json;

namespace {

constexpr char const *kSpecialTerms[] = {"[SEP]", "[END]", "[UNK]"};

std::string required_string(json const &obj, char const *key, std::string const &source,
                            std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw DataError(source, line, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
}

} // namespace

std::string document_text(Document const &doc)
{
    if (doc.title.empty()) {
        return doc.body;
    }
    char const last = doc.title.back();
    bool const terminated = last == '.' || last == '!' || last == '?';
    return doc.title + (terminated ? " " : ". ") + doc.body;
}

void Corpus::add_document(Document doc)
{
    if (doc.doc_id.empty()) {
        throw DataError("document with empty doc_id");
    }
    if (doc.body.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw DataError("document '" + doc.doc_id + "' has an empty body");
    }
    if (by_id_.count(doc.doc_id) != 0) {
        throw DataError("duplicate doc_id '" + doc.doc_id + "'");
    }
    by_id_.emplace(doc.doc_id, docs_.size());
    docs_.push_back(std::move(doc));
}

Document const *Corpus::find(std::string const &doc_id) const
{
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

Document const &Corpus::get(std::string const &doc_id) const
{
    if (auto const *doc = find(doc_id)) {
        return *doc;
    }
    throw DataError("unknown doc_id '" + doc_id + "'");
}

Corpus load_corpus(std::filesystem::path const &path)
{
    Corpus corpus;
    auto const source = path.string();
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        json obj;
        try {
            obj = json::parse(line);
        } catch (json::parse_error const &e) {
            throw DataError(source, number, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw DataError(source, number, "expected a JSON object");
        }
        Document doc;
        doc.doc_id = required_string(obj, "doc_id", source, number);
        doc.body = required_string(obj, "body", source, number);
        if (auto it = obj.find("title"); it != obj.end()) {
            if (!it->is_string()) {
                throw DataError(source, number, "field 'title' must be a string");
            }
            doc.title = it->get<std::string>();
        }
        try {
            corpus.add_document(std::move(doc));
        } catch (DataError const &e) {
            throw DataError(source, number, e.what());
        }
    });
    return corpus;
}

void save_corpus(std::filesystem::path const &path, Corpus const &corpus)
{
    std::string out;
    for (auto const &doc : corpus.documents()) {
        json obj = {{"doc_id", doc.doc_id}, {"title", doc.title}, {"body", doc.body}};
        out += obj.dump();
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> terms)
{
    std::set<std::string> unique(std::make_move_iterator(terms.begin()),
                                 std::make_move_iterator(terms.end()));
    for (auto const *special : kSpecialTerms) {
        unique.erase(special);
    }
    terms_.assign(std::begin(kSpecialTerms), std::end(kSpecialTerms));
    terms_.insert(terms_.end(), unique.begin(), unique.end());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        ids_.emplace(terms_[i], static_cast<TokenId>(i));
    }
}

std::optional<TokenId> Vocabulary::find(std::string const &term) const
{
    auto it = ids_.find(term);
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId Vocabulary::lookup(std::string const &term) const { return find(term).value_or(kUnk); }

std::string const &Vocabulary::term(TokenId id) const
{
    if (id >= terms_.size()) {
        throw DataError("token id " + std::to_string(id) + " outside vocabulary");
    }
    return terms_[id];
}

std::uint64_t Vocabulary::hash() const
{
    std::uint64_t h = io::fnv1a64("");
    for (auto const &t : terms_) {
        h = io::fnv1a64(t, h);
        h = io::fnv1a64("\n", h);
    }
    return h;
}

KeywordId const &CorpusManifest::keyword_id(std::string const &doc_id) const
{
    auto it = id_map.find(doc_id);
    if (it == id_map.end()) {
        throw DataError("doc_id '" + doc_id + "' has no keyword identifier");
    }
    return it->second;
}

std::string disambiguator_term(std::string const &doc_id, std::size_t attempt)
{
    auto const h = io::fnv1a64(doc_id + "#" + std::to_string(attempt));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%08x", static_cast<unsigned>(h & 0xffffffffU));
    return buf;
}

CorpusManifest assign_keyword_ids(Corpus const &corpus, std::size_t keywords_per_doc)
{
    if (corpus.empty()) {
        throw DataError("cannot assign keyword ids: corpus is empty");
    }
    if (keywords_per_doc == 0) {
        throw UsageError("keywords_per_doc must be at least 1");
    }

    std::vector<Document const *> order;
    for (auto const &doc : corpus.documents()) {
        order.push_back(&doc);
    }
    std::sort(order.begin(), order.end(),
              [](Document const *a, Document const *b) { return a->doc_id < b->doc_id; });

    std::set<std::set<std::string>> taken;
    std::map<std::string, std::vector<std::string>> chosen;
    std::vector<std::string> all_terms;

    for (auto const *doc : order) {
        auto const text = document_text(*doc);
        auto const ranked = ranked_terms(text);
        for (auto const &t : text::tokenize(text::normalize(text))) {
            all_terms.push_back(t);
        }

        std::vector<std::string> keywords(ranked.begin(),
                                          ranked.begin()
                                              + static_cast<std::ptrdiff_t>(
                                                  std::min(ranked.size(), keywords_per_doc)));
        std::size_t attempt = 0;
        while (keywords.size() < keywords_per_doc) {
            keywords.push_back(disambiguator_term(doc->doc_id, attempt++));
        }
        auto key = [&] { return std::set<std::string>(keywords.begin(), keywords.end()); };

        std::size_t next = keywords_per_doc;
        while (taken.count(key()) != 0) {
            if (next < ranked.size()) {
                keywords.back() = ranked[next++];
            } else {
                keywords.back() = disambiguator_term(doc->doc_id, attempt++);
            }
        }
        taken.insert(key());
        all_terms.insert(all_terms.end(), keywords.begin(), keywords.end());
        chosen.emplace(doc->doc_id, std::move(keywords));
    }

    CorpusManifest manifest;
    manifest.document_count = corpus.size();
    manifest.keywords_per_doc = keywords_per_doc;
    manifest.vocabulary = Vocabulary(std::move(all_terms));
    for (auto &[doc_id, keywords] : chosen) {
        KeywordId id;
        id.doc_id = doc_id;
        for (auto const &k : keywords) {
            id.tokens.push_back(*manifest.vocabulary.find(k));
        }
        id.keywords = std::move(keywords);
        manifest.id_map.emplace(doc_id, std::move(id));
    }
    return manifest;
}

void save_manifest(std::filesystem::path const &path, CorpusManifest const &manifest)
{
    json id_map = json::object();
    for (auto const &[doc_id, id] : manifest.id_map) {
        id_map[doc_id] = id.keywords;
    }
    json obj = {
        {"format", "clarion-manifest"},
        {"version", 1},
        {"document_count", manifest.document_count},
        {"keywords_per_doc", manifest.keywords_per_doc},
        {"stopword_list_version", text::stopword_list_version()},
        {"vocabulary", manifest.vocabulary.terms()},
        {"id_map", id_map},
    };
    io::write_file_atomic(path, obj.dump(1) + "\n");
}

CorpusManifest load_manifest(std::filesystem::path const &path)
{
    auto const content = io::read_file(path);
    auto const source = path.string();
    json obj;
    try {
        obj = json::parse(content);
    } catch (json::parse_error const &e) {
        throw DataError(source, io::line_of_offset(content, e.byte > 0 ? e.byte - 1 : 0),
                        std::string("invalid manifest JSON: ") + e.what());
    }
    auto fail = [&](std::string const &msg) -> DataError {
        return DataError(source, 1, "invalid manifest: " + msg);
    };
    if (!obj.is_object() || obj.value("format", "") != "clarion-manifest") {
        throw fail("not a clarion manifest");
    }
    CorpusManifest m;
    try {
        m.document_count = obj.at("document_count").get<std::size_t>();
        m.keywords_per_doc = obj.at("keywords_per_doc").get<std::size_t>();
        auto terms = obj.at("vocabulary").get<std::vector<std::string>>();
        if (terms.size() < Vocabulary::kFirstTerm
            || !std::equal(std::begin(kSpecialTerms), std::end(kSpecialTerms), terms.begin())) {
            throw fail("vocabulary must start with the reserved tokens");
        }
        m.vocabulary = Vocabulary(terms);
        if (m.vocabulary.terms() != terms) {
            throw fail("vocabulary is not in canonical order");
        }
        for (auto const &[doc_id, kws] : obj.at("id_map").items()) {
            KeywordId id;
            id.doc_id = doc_id;
            id.keywords = kws.get<std::vector<std::string>>();
            if (id.keywords.size() != m.keywords_per_doc) {
                throw fail("identifier of '" + doc_id + "' has wrong length");
            }
            for (auto const &k : id.keywords) {
                auto tok = m.vocabulary.find(k);
                if (!tok) {
                    throw fail("keyword '" + k + "' missing from vocabulary");
                }
                id.tokens.push_back(*tok);
            }
            m.id_map.emplace(doc_id, std::move(id));
        }
    } catch (json::exception const &e) {
        throw fail(e.what());
    }
    if (m.id_map.size() != m.document_count) {
        throw fail("id_map size does not match document_count");
    }
    return m;
}

} // namespace clarion
