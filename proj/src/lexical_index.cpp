#include "clarion/lexical_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"
#include "clarion/text.hpp"

namespace clarion {

namespace {

constexpr char const *kIndexFormat = "clarion-bm25";
constexpr int kIndexVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "index serialization assumes a little-endian host");

void put_u32(std::string &out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }
}

void put_bytes(std::string &out, std::string const &s)
{
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
  public:
    Reader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
        }
        pos_ += 4;
        return v;
    }

    std::string bytes()
    {
        auto const n = u32();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n) {
            throw DataError(source_, 2, "index body truncated at byte " + std::to_string(pos_));
        }
    }

    std::string_view data_;
    std::string source_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::string> retrieval_query(std::string_view topic, std::string_view inferred_query)
{
    auto terms = text::tokenize(text::normalize(topic));
    for (auto &t : text::tokenize(text::normalize(inferred_query))) {
        terms.push_back(std::move(t));
    }
    return terms;
}

InvertedIndex InvertedIndex::build(Corpus const &corpus, Bm25Params params)
{
    if (corpus.empty()) {
        throw DataError("cannot build an index over an empty corpus");
    }
    InvertedIndex index;
    index.params_ = params;
    std::vector<Document const *> order;
    for (auto const &doc : corpus.documents()) {
        order.push_back(&doc);
    }
    std::sort(order.begin(), order.end(),
              [](Document const *a, Document const *b) { return a->doc_id < b->doc_id; });

    for (std::size_t ord = 0; ord < order.size(); ++ord) {
        auto const tokens = text::tokenize(text::normalize(document_text(*order[ord])));
        std::map<std::string, std::uint32_t> tf;
        for (auto const &t : tokens) {
            ++tf[t];
        }
        index.doc_ids_.push_back(order[ord]->doc_id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        for (auto const &[term, count] : tf) {
            index.postings_[term].push_back({static_cast<std::uint32_t>(ord), count});
        }
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize()
{
    double const total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avg_doc_length_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
}

std::vector<Posting> const *InvertedIndex::find_postings(std::string const &term) const
{
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::uint32_t InvertedIndex::doc_ordinal(std::string const &doc_id) const
{
    auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
    if (it == doc_ids_.end() || *it != doc_id) {
        throw DataError("doc_id '" + doc_id + "' is not in the index");
    }
    return static_cast<std::uint32_t>(it - doc_ids_.begin());
}

std::uint32_t InvertedIndex::doc_length(std::string const &doc_id) const
{
    return doc_lengths_[doc_ordinal(doc_id)];
}

double InvertedIndex::idf(std::string const &term) const
{
    auto const *list = find_postings(term);
    if (list == nullptr) {
        return 0.0;
    }
    double const n = static_cast<double>(doc_ids_.size());
    double const df = static_cast<double>(list->size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double InvertedIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t length, Bm25Params p) const
{
    double const f = static_cast<double>(tf);
    double const norm = 1.0 - p.b + p.b * static_cast<double>(length) / avg_doc_length_;
    return idf * (f * (p.k1 + 1.0)) / (f + p.k1 * norm);
}

double InvertedIndex::bm25_score(std::vector<std::string> const &query_terms,
                                 std::string const &doc_id) const
{
    return bm25_score(query_terms, doc_id, params_);
}

double InvertedIndex::bm25_score(std::vector<std::string> const &query_terms,
                                 std::string const &doc_id, Bm25Params params) const
{
    auto const ord = doc_ordinal(doc_id);
    double score = 0.0;
    for (auto const &term : query_terms) {
        auto const *list = find_postings(term);
        if (list == nullptr) {
            continue;
        }
        auto it = std::lower_bound(list->begin(), list->end(), ord,
                                   [](Posting const &p, std::uint32_t d) { return p.doc < d; });
        if (it == list->end() || it->doc != ord) {
            continue;
        }
        score += term_weight(idf(term), it->tf, doc_lengths_[ord], params);
    }
    return score;
}

std::vector<ScoredDoc> InvertedIndex::search(std::vector<std::string> const &query_terms,
                                             std::size_t k) const
{
    if (k == 0) {
        throw UsageError("retrieval depth k must be at least 1");
    }
    // Term-at-a-time accumulation. Contributions are added in query order so
    // every document's sum matches bm25_score() bit for bit.
    std::vector<double> acc(doc_ids_.size(), 0.0);
    std::unordered_map<std::string, double> idf_cache;
    for (auto const &term : query_terms) {
        auto const *list = find_postings(term);
        if (list == nullptr) {
            continue;
        }
        auto [it, inserted] = idf_cache.try_emplace(term, 0.0);
        if (inserted) {
            it->second = idf(term);
        }
        for (auto const &p : *list) {
            acc[p.doc] += term_weight(it->second, p.tf, doc_lengths_[p.doc], params_);
        }
    }

    std::vector<std::uint32_t> order(doc_ids_.size());
    std::iota(order.begin(), order.end(), 0U);
    auto const depth = std::min(k, order.size());
    // Ordinals follow doc_id order, so ordinal order is the doc_id tie-break.
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        return acc[a] != acc[b] ? acc[a] > acc[b] : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                      better);
    std::vector<ScoredDoc> out;
    out.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        out.push_back({doc_ids_[order[i]], acc[order[i]]});
    }
    return out;
}

CandidateSet InvertedIndex::retrieve(std::string const &topic_id, std::string_view topic,
                                     std::string_view inferred_query, std::size_t k) const
{
    auto const query = retrieval_query(topic, inferred_query);
    if (query.empty()) {
        throw DataError("topic '" + topic_id + "': retrieval query is empty");
    }
    return CandidateSet{topic_id, search(query, k)};
}

void InvertedIndex::save(std::filesystem::path const &path) const
{
    nlohmann::json header = {
        {"format", kIndexFormat},
        {"version", kIndexVersion},
        {"N", doc_ids_.size()},
        {"avg_doc_length", avg_doc_length_},
        {"k1", params_.k1},
        {"b", params_.b},
        {"num_terms", postings_.size()},
    };
    std::string out = header.dump();
    out += '\n';
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        put_bytes(out, doc_ids_[i]);
        put_u32(out, doc_lengths_[i]);
    }
    for (auto const &[term, list] : postings_) {
        put_bytes(out, term);
        put_u32(out, static_cast<std::uint32_t>(list.size()));
        for (auto const &p : list) {
            put_u32(out, p.doc);
            put_u32(out, p.tf);
        }
    }
    io::write_file_atomic(path, out);
}

InvertedIndex InvertedIndex::load(std::filesystem::path const &path)
{
    auto const content = io::read_file(path);
    auto const source = path.string();
    auto const newline = content.find('\n');
    if (newline == std::string::npos) {
        throw DataError(source, 1, "missing index header line");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(content.substr(0, newline));
    } catch (nlohmann::json::parse_error const &e) {
        throw DataError(source, 1, std::string("invalid index header: ") + e.what());
    }
    if (!header.is_object() || header.value("format", "") != kIndexFormat) {
        throw DataError(source, 1, "not a clarion BM25 index");
    }
    if (header.value("version", 0) != kIndexVersion) {
        throw DataError(source, 1, "unsupported index version");
    }

    InvertedIndex index;
    std::size_t n_docs = 0;
    std::size_t n_terms = 0;
    try {
        n_docs = header.at("N").get<std::size_t>();
        n_terms = header.at("num_terms").get<std::size_t>();
        index.params_.k1 = header.at("k1").get<double>();
        index.params_.b = header.at("b").get<double>();
    } catch (nlohmann::json::exception const &e) {
        throw DataError(source, 1, std::string("invalid index header: ") + e.what());
    }

    Reader in(std::string_view(content).substr(newline + 1), source);
    for (std::size_t i = 0; i < n_docs; ++i) {
        index.doc_ids_.push_back(in.bytes());
        index.doc_lengths_.push_back(in.u32());
    }
    if (!std::is_sorted(index.doc_ids_.begin(), index.doc_ids_.end())) {
        throw DataError(source, 2, "document table is not sorted by doc_id");
    }
    for (std::size_t i = 0; i < n_terms; ++i) {
        auto term = in.bytes();
        auto const count = in.u32();
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint32_t j = 0; j < count; ++j) {
            Posting p;
            p.doc = in.u32();
            p.tf = in.u32();
            if (p.doc >= n_docs) {
                throw DataError(source, 2, "posting references unknown document");
            }
            list.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    if (!in.at_end()) {
        throw DataError(source, 2, "trailing bytes after postings");
    }
    index.finalize();
    if (header.at("avg_doc_length").get<double>() != index.avg_doc_length_) {
        throw DataError(source, 1, "avg_doc_length does not match the document table");
    }
    return index;
}

} // namespace clarion
