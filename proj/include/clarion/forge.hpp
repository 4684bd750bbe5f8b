#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarion/conversation.hpp"
#include "clarion/judge.hpp"

namespace clarion {

struct SingleTurnQA {
    std::string topic_id;
    std::string facet_id;
    std::string question;
    std::vector<std::string> image_refs;
    std::string answer;

    friend bool operator==(SingleTurnQA const &, SingleTurnQA const &) = default;
};

/// JSON-lines of {"topic_id", "facet_id", "question", "image_refs", "answer"}.
std::vector<SingleTurnQA> load_qa_pool(std::filesystem::path const &path);
void save_qa_pool(std::filesystem::path const &path, std::vector<SingleTurnQA> const &pool);

/// Lazily enumerates every ordered selection of `turn_count` distinct QA
/// pairs sharing a topic. Topics are visited in ascending topic_id order;
/// within a topic, selections come in lexicographic order of pool indices.
/// The conversation's hidden facet is the facet of its last QA pair.
class ConversationStream {
  public:
    ConversationStream(std::vector<SingleTurnQA> const &pool, std::size_t turn_count);

    /// Next conversation, or nullopt once exhausted.
    std::optional<Conversation> next();
    /// Number of conversations emitted so far.
    [[nodiscard]] std::size_t position() const noexcept { return emitted_; }
    [[nodiscard]] std::size_t turn_count() const noexcept { return turn_count_; }

  private:
    bool advance();

    std::vector<std::pair<std::string, std::vector<SingleTurnQA const *>>> groups_;
    std::size_t turn_count_;
    std::size_t group_ = 0;
    std::vector<std::size_t> indices_;
    std::size_t local_ = 0;
    bool started_ = false;
    std::size_t emitted_ = 0;
};

std::vector<Conversation> synthesize(std::vector<SingleTurnQA> const &pool, std::size_t turn_count);

/// Uniform reservoir sample of min(n, stream length) conversations, returned
/// in stream order. Reproducible for a fixed seed.
std::vector<Conversation> sample(ConversationStream &stream, std::size_t n, std::uint64_t seed);

/// False (reject) iff the judge marks any pair of turns as duplicates.
bool filter_duplicates(Conversation const &conversation, JudgeClient &judge);

/// Cuts the conversation after the first turn t < k that reveals the facet.
Conversation truncate_on_reveal(Conversation const &conversation, Facet const &facet, JudgeClient &judge);

struct RefineResult {
    Conversation conversation;
    bool refined = true;
    std::string error;  ///< non-empty when the judge failed and answers were left unchanged
};

/// Rewrites answers turn by turn: the first turn with the initial strategy,
/// middle turns with the partial strategy and the last turn (when it is not
/// also the first) with the final strategy. Questions and images are kept.
RefineResult refine(Conversation const &conversation, Facet const &facet, JudgeClient &judge);

/// Strategy applied at 1-based turn `t` of a `total`-turn conversation.
RefineStage refine_stage(std::size_t t, std::size_t total);

struct ForgeConfig {
    std::vector<std::size_t> turn_targets{2, 3, 4};
    std::size_t sample_size = 10000;
    std::uint64_t seed = 42;
    std::size_t jobs = 1;  ///< concurrent judge calls
};

struct TargetStats {
    std::size_t synthesized = 0;
    std::size_t sampled = 0;
    std::size_t duplicates_rejected = 0;
    std::size_t truncated = 0;
    std::size_t refine_failures = 0;
    std::size_t emitted = 0;
};

struct ForgeStats {
    std::map<std::size_t, TargetStats> targets;
    std::map<std::size_t, std::size_t> final_turn_histogram;
    std::vector<std::string> refine_failures;  ///< "<conversation_id>: <error>"

    [[nodiscard]] std::size_t total_in() const;
    [[nodiscard]] std::size_t total_out() const;
    [[nodiscard]] std::size_t total_rejected() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct ForgeResult {
    std::vector<Conversation> conversations;
    ForgeStats stats;
};

/// Failure inside a forge stage; the message is prefixed with the stage name.
class ForgeError : public std::runtime_error {
  public:
    ForgeError(std::string stage, std::string const &message, std::string endpoint = {})
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), endpoint_(std::move(endpoint))
    {
    }
    [[nodiscard]] std::string const &stage() const noexcept { return stage_; }
    /// Remote endpoint involved in the failure, empty for local failures.
    [[nodiscard]] std::string const &endpoint() const noexcept { return endpoint_; }

  private:
    std::string stage_;
    std::string endpoint_;
};

/// synthesize -> sample -> filter_duplicates -> truncate_on_reveal -> refine,
/// per turn target in configuration order.
ForgeResult run_pipeline(std::vector<SingleTurnQA> const &pool, TopicCatalog const &catalog,
                         ForgeConfig const &config, JudgeClient &judge);

} // namespace clarion
