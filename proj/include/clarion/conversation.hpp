#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clarion {

class ChatClient;

struct Facet {
    std::string facet_id;
    std::string description;

    friend bool operator==(Facet const &, Facet const &) = default;
};

struct Topic {
    std::string topic_id;
    std::string query;
    std::vector<Facet> facets;

    [[nodiscard]] Facet const *find_facet(std::string const &facet_id) const;

    friend bool operator==(Topic const &, Topic const &) = default;
};

/// Topics keyed by id. File format: JSON-lines of
/// {"topic_id", "query", "facets": [{"facet_id", "description"}]}.
class TopicCatalog {
  public:
    void add(Topic topic);
    [[nodiscard]] Topic const *find(std::string const &topic_id) const;
    [[nodiscard]] Topic const &get(std::string const &topic_id) const;
    [[nodiscard]] Facet const &facet(std::string const &topic_id, std::string const &facet_id) const;
    [[nodiscard]] std::map<std::string, Topic> const &topics() const noexcept { return topics_; }
    [[nodiscard]] std::size_t size() const noexcept { return topics_.size(); }

    static TopicCatalog load(std::filesystem::path const &path);
    void save(std::filesystem::path const &path) const;

  private:
    std::map<std::string, Topic> topics_;
};

struct Turn {
    std::string question;
    std::vector<std::string> image_refs;
    std::string answer;

    friend bool operator==(Turn const &, Turn const &) = default;
};

struct Conversation {
    static constexpr std::size_t kMaxTurns = 4;

    std::string conversation_id;
    std::string topic_id;
    std::string facet_id;  ///< hidden intent
    std::vector<Turn> turns;

    [[nodiscard]] std::size_t turn_count() const noexcept { return turns.size(); }

    friend bool operator==(Conversation const &, Conversation const &) = default;
};

/// Throws DataError describing the first violated invariant. Topic and facet
/// ids are checked only when a catalog is supplied.
void validate(Conversation const &conversation, TopicCatalog const *catalog = nullptr);

/// JSON-lines of {"conversation_id"?, "topic_id", "facet_id",
/// "turns": [{"question", "image_refs", "answer"}]}. A missing
/// conversation_id defaults to "<facet_id>@<line>".
std::vector<Conversation> load_conversations(std::filesystem::path const &path,
                                             TopicCatalog const *catalog = nullptr);
void save_conversations(std::filesystem::path const &path, std::span<Conversation const> conversations);
std::string conversation_to_json_line(Conversation const &conversation);

/// Image feature vectors produced by an external encoder.
/// File format: a "dim=<D>" header line, optional "# ..." comment lines
/// (a "# provenance: ..." comment names the encoder), then
/// "image_id<TAB>f,f,...,f" rows.
class ImageFeatureStore {
  public:
    explicit ImageFeatureStore(std::size_t dim = 0, std::string provenance = {});

    void add(std::string image_id, std::vector<float> vector);
    [[nodiscard]] std::vector<float> const *find(std::string const &image_id) const;
    [[nodiscard]] std::vector<float> const &get(std::string const &image_id) const;
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::string const &provenance() const noexcept { return provenance_; }
    [[nodiscard]] std::size_t size() const noexcept { return vectors_.size(); }

    static ImageFeatureStore load(std::filesystem::path const &path);
    void save(std::filesystem::path const &path) const;

  private:
    std::size_t dim_;
    std::string provenance_;
    std::map<std::string, std::vector<float>> vectors_;
};

/// Feature vectors of every image referenced by the conversation, in turn order.
std::vector<std::vector<float>> conversation_images(Conversation const &conversation,
                                                    ImageFeatureStore const &store);

/// Distils a conversation into a one-line inferred query.
class Summarizer {
  public:
    virtual ~Summarizer() = default;
    virtual std::string summarize(Conversation const &conversation, Topic const &topic) = 0;
};

/// Deterministic default: topic terms, then content terms of affirmatively
/// answered turns whose latest mention is affirmative. A turn answered
/// negatively retracts the content terms of its question and answer.
class KeywordSummarizer final : public Summarizer {
  public:
    std::string summarize(Conversation const &conversation, Topic const &topic) override;
};

/// Sends the intent-extraction prompt to a chat endpoint.
class RemoteSummarizer final : public Summarizer {
  public:
    explicit RemoteSummarizer(ChatClient &client) : client_(client) {}
    std::string summarize(Conversation const &conversation, Topic const &topic) override;

  private:
    ChatClient &client_;
};

/// An answer is affirmative unless its first non-stopword token is one of
/// no / not / never / don't / doesn't.
bool is_affirmative(std::string_view answer);

std::string intent_prompt(Conversation const &conversation, Topic const &topic);

/// Runs the summarizer; failures are rethrown with the conversation id and
/// turn count attached.
std::string infer_query(Conversation const &conversation, Topic const &topic, Summarizer &summarizer);

} // namespace clarion
