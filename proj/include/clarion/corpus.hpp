#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace clarion {

using TokenId = std::uint32_t;

struct Document {
    std::string doc_id;
    std::string title;
    std::string body;

    friend bool operator==(Document const &, Document const &) = default;
};

/// Title and body joined into the text used for both keyword extraction and
/// lexical indexing.
std::string document_text(Document const &doc);

class Corpus {
  public:
    /// Throws DataError on an empty/duplicate doc_id or an empty body.
    void add_document(Document doc);

    [[nodiscard]] Document const *find(std::string const &doc_id) const;
    [[nodiscard]] Document const &get(std::string const &doc_id) const;
    [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return docs_.empty(); }
    /// Documents in insertion order.
    [[nodiscard]] std::vector<Document> const &documents() const noexcept { return docs_; }

    friend bool operator==(Corpus const &a, Corpus const &b) { return a.docs_ == b.docs_; }

  private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// JSON-lines: one {"doc_id", "title", "body"} object per line.
Corpus load_corpus(std::filesystem::path const &path);
void save_corpus(std::filesystem::path const &path, Corpus const &corpus);

/// Term <-> token id map. Ids 0..2 are the reserved [SEP], [END] and [UNK]
/// tokens; regular terms follow in lexicographic order.
class Vocabulary {
  public:
    static constexpr TokenId kSep = 0;
    static constexpr TokenId kEnd = 1;
    static constexpr TokenId kUnk = 2;
    static constexpr TokenId kFirstTerm = 3;

    Vocabulary();
    /// Builds from arbitrary terms; duplicates collapse, order is normalized.
    explicit Vocabulary(std::vector<std::string> terms);

    [[nodiscard]] std::optional<TokenId> find(std::string const &term) const;
    [[nodiscard]] TokenId lookup(std::string const &term) const;  ///< kUnk when absent
    [[nodiscard]] std::string const &term(TokenId id) const;
    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] std::vector<std::string> const &terms() const noexcept { return terms_; }
    /// FNV-1a over the newline-joined term list.
    [[nodiscard]] std::uint64_t hash() const;

    friend bool operator==(Vocabulary const &a, Vocabulary const &b) { return a.terms_ == b.terms_; }

  private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TokenId> ids_;
};

struct KeywordId {
    std::string doc_id;
    std::vector<std::string> keywords;
    std::vector<TokenId> tokens;

    friend bool operator==(KeywordId const &, KeywordId const &) = default;
};

struct CorpusManifest {
    std::size_t document_count = 0;
    std::size_t keywords_per_doc = 5;
    Vocabulary vocabulary;
    std::map<std::string, KeywordId> id_map;

    [[nodiscard]] KeywordId const &keyword_id(std::string const &doc_id) const;

    friend bool operator==(CorpusManifest const &, CorpusManifest const &) = default;
};

/// Gives every document a unique keyword identifier. Documents are visited
/// in ascending doc_id order; a document whose keyword set is already taken
/// replaces its last keyword with the next-ranked unused term, and falls back
/// to hash-derived terms ("#" + 8 hex digits of its doc_id hash) once its own
/// terms run out.
CorpusManifest assign_keyword_ids(Corpus const &corpus, std::size_t keywords_per_doc = 5);

/// Term used to disambiguate `doc_id` on its `attempt`-th hash fallback.
std::string disambiguator_term(std::string const &doc_id, std::size_t attempt);

void save_manifest(std::filesystem::path const &path, CorpusManifest const &manifest);
CorpusManifest load_manifest(std::filesystem::path const &path);

} // namespace clarion
