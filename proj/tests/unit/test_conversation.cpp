#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "clarion/conversation.hpp"
#include "clarion/errors.hpp"
#include "clarion/remote.hpp"
#include "clarion/text.hpp"
#include "support.hpp"

using namespace clarion;
using clarion::testing::Gen;
using clarion::testing::TempDir;

namespace {

Topic teddy_topic()
{
    return {"t1", "teddy bears", {{"t1-f1", "giant teddy bears"}, {"t1-f2", "tiny teddy bears"}}};
}

Conversation one_turn(std::string question, std::string answer)
{
    return {"c1", "t1", "t1-f1", {{std::move(question), {}, std::move(answer)}}};
}

TopicCatalog teddy_catalog()
{
    TopicCatalog cat;
    cat.add(teddy_topic());
    return cat;
}

std::string conversation_line(std::size_t turns, std::string const &facet = "t1-f1")
{
    std::string line = R"({"topic_id":"t1","facet_id":")" + facet + R"(","turns":[)";
    for (std::size_t i = 0; i < turns; ++i) {
        line += std::string(i ? "," : "") + R"({"question":"q)" + std::to_string(i) + R"(?","image_refs":[],"answer":"yes"})";
    }
    return line + "]}";
}

class FailingSummarizer final : public Summarizer {
  public:
    std::string summarize(Conversation const &, Topic const &) override
    {
        throw RemoteError("http://judge.invalid/v1", "connection refused");
    }
};

} // namespace

TEST(InferQuery, AffirmativeAnswerAddsContentTerms)
{
    KeywordSummarizer s;
    auto c = one_turn("Are you looking for big ones?", "yes, giant ones");
    EXPECT_EQ(infer_query(c, teddy_topic(), s), "teddy bears giant");
    EXPECT_EQ(infer_query(c, teddy_topic(), s), infer_query(c, teddy_topic(), s));
}

TEST(InferQuery, AllNegativeAnswersLeaveTopicTerms)
{
    KeywordSummarizer s;
    Conversation c{"c", "t1", "t1-f1",
                   {{"Do you want giant ones?", {}, "no"}, {"Maybe tiny plush?", {}, "no, not plush"}}};
    EXPECT_EQ(infer_query(c, teddy_topic(), s), "teddy bears");
}

TEST(InferQuery, LatestMentionWins)
{
    KeywordSummarizer s;
    Conversation c{"c", "t1", "t1-f1",
                   {{"Size?", {}, "yes, giant please"}, {"Do you want giant ones?", {}, "no, tiny after all"}}};
    EXPECT_EQ(infer_query(c, teddy_topic(), s), "teddy bears");
    c.turns.push_back({"Sure about giant?", {}, "yes giant"});
    EXPECT_EQ(infer_query(c, teddy_topic(), s), "teddy bears giant");
}

TEST(InferQuery, AffirmativityRule)
{
    EXPECT_TRUE(is_affirmative("yes please"));
    EXPECT_TRUE(is_affirmative("I would like the blue one"));
    EXPECT_FALSE(is_affirmative("no thanks"));
    EXPECT_FALSE(is_affirmative("I don't want that"));
    EXPECT_FALSE(is_affirmative("Never."));
    EXPECT_TRUE(is_affirmative("blue, not red"));
}

TEST(InferQuery, PropertyNegativeTermsExcluded)
{
    std::vector<std::string> const negators{"no", "not", "never"};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Gen gen(seed);
        Topic topic{"t", gen.word() + " " + gen.word(), {{"f", "facet"}}};
        Conversation c{"c", "t", "f", {}};
        auto const k = gen.uniform(1, 4);
        std::set<std::string> affirmed;
        std::set<std::string> negated;
        for (std::size_t i = 0; i < k; ++i) {
            Turn turn;
            turn.question = "what about " + gen.word() + "?";
            if (gen.coin()) {
                turn.answer = gen.pick(negators) + " " + gen.word();
            } else {
                turn.answer = "yes " + gen.word() + " " + gen.word();
            }
            c.turns.push_back(turn);
        }
        KeywordSummarizer s;
        auto const words = text::tokenize(infer_query(c, topic, s));
        std::set<std::string> out(words.begin(), words.end());
        auto const topic_terms = text::tokenize(topic.query);
        for (std::size_t i = 0; i < c.turns.size(); ++i) {
            auto const &t = c.turns[i];
            if (is_affirmative(t.answer)) {
                continue;
            }
            for (auto const &term : text::tokenize(t.answer + " " + t.question)) {
                if (!out.count(term)) {
                    continue;
                }
                bool const in_topic = std::find(topic_terms.begin(), topic_terms.end(), term) != topic_terms.end();
                bool later_affirmed = false;
                for (std::size_t j = i + 1; j < c.turns.size(); ++j) {
                    auto const later = text::tokenize(c.turns[j].answer);
                    later_affirmed |= is_affirmative(c.turns[j].answer)
                                      && std::find(later.begin(), later.end(), term) != later.end();
                }
                EXPECT_TRUE(in_topic || later_affirmed) << "seed " << seed << " leaked '" << term << "'";
            }
        }
    }
}

TEST(InferQuery, FailureCarriesTurnContext)
{
    FailingSummarizer s;
    auto c = one_turn("q?", "yes");
    try {
        infer_query(c, teddy_topic(), s);
        FAIL() << "expected RemoteError";
    } catch (RemoteError const &e) {
        EXPECT_EQ(e.endpoint(), "http://judge.invalid/v1");
        std::string const what = e.what();
        EXPECT_NE(what.find("c1"), std::string::npos);
        EXPECT_NE(what.find("1 turn"), std::string::npos);
    }
}

TEST(InferQuery, PromptCarriesConversation)
{
    auto prompt = intent_prompt(one_turn("Giant ones?", "yes, giant"), teddy_topic());
    EXPECT_NE(prompt.find("Extract the user's intent"), std::string::npos);
    EXPECT_NE(prompt.find("Question 1: Giant ones?"), std::string::npos);
}

TEST(Conversations, LoadTwoTurnRecord)
{
    TempDir dir;
    clarion::testing::write_text(dir / "c.jsonl", conversation_line(2) + "\n");
    auto cat = teddy_catalog();
    auto convs = load_conversations(dir / "c.jsonl", &cat);
    ASSERT_EQ(convs.size(), 1u);
    EXPECT_EQ(convs[0].turn_count(), 2u);
    EXPECT_EQ(convs[0].conversation_id, "t1-f1@1");
}

TEST(Conversations, FiveTurnsNamesLine)
{
    TempDir dir;
    clarion::testing::write_text(dir / "c.jsonl", conversation_line(1) + "\n" + conversation_line(5) + "\n");
    try {
        load_conversations(dir / "c.jsonl");
        FAIL() << "expected DataError";
    } catch (DataError const &e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("5 turns"), std::string::npos);
    }
}

TEST(Conversations, DanglingFacetRejected)
{
    TempDir dir;
    clarion::testing::write_text(dir / "c.jsonl", conversation_line(1, "t1-f9") + "\n");
    auto cat = teddy_catalog();
    EXPECT_THROW(load_conversations(dir / "c.jsonl", &cat), DataError);
    EXPECT_NO_THROW(load_conversations(dir / "c.jsonl"));
}

TEST(Conversations, TurnHistogramOfTwentyRecords)
{
    TempDir dir;
    std::size_t const counts[] = {3, 8, 5, 4};
    std::string content;
    for (std::size_t k = 1; k <= 4; ++k) {
        for (std::size_t i = 0; i < counts[k - 1]; ++i) {
            content += conversation_line(k) + "\n";
        }
    }
    clarion::testing::write_text(dir / "c.jsonl", content);
    auto convs = load_conversations(dir / "c.jsonl");
    ASSERT_EQ(convs.size(), 20u);
    std::map<std::size_t, std::size_t> hist;
    for (auto const &c : convs) {
        ++hist[c.turn_count()];
    }
    EXPECT_EQ(hist, (std::map<std::size_t, std::size_t>{{1, 3}, {2, 8}, {3, 5}, {4, 4}}));
}

TEST(Conversations, SaveLoadRoundTrip)
{
    TempDir dir;
    std::vector<Conversation> convs{{"x", "t1", "t1-f2", {{"Which \"size\"?", {"img-1", "img-2"}, "tiny"}}}};
    save_conversations(dir / "c.jsonl", convs);
    EXPECT_EQ(load_conversations(dir / "c.jsonl"), convs);
}

TEST(Catalog, RoundTripAndLookup)
{
    TempDir dir;
    auto cat = teddy_catalog();
    cat.save(dir / "topics.jsonl");
    auto loaded = TopicCatalog::load(dir / "topics.jsonl");
    EXPECT_EQ(loaded.get("t1"), teddy_topic());
    EXPECT_EQ(loaded.facet("t1", "t1-f2").description, "tiny teddy bears");
    EXPECT_THROW((void)loaded.get("t2"), DataError);
}

TEST(Features, ParseHeaderProvenanceAndRows)
{
    TempDir dir;
    clarion::testing::write_text(dir / "f.tsv", "dim=3\n# provenance: test encoder\nimg-a\t1,2,3.5\nimg-b\t0,0,-1\n");
    auto store = ImageFeatureStore::load(dir / "f.tsv");
    EXPECT_EQ(store.dim(), 3u);
    EXPECT_EQ(store.provenance(), "test encoder");
    EXPECT_EQ(store.get("img-a"), (std::vector<float>{1, 2, 3.5f}));
    store.save(dir / "g.tsv");
    auto again = ImageFeatureStore::load(dir / "g.tsv");
    EXPECT_EQ(again.get("img-b"), store.get("img-b"));

    Conversation c{"c", "t", "f", {{"q", {"img-b", "img-a"}, "a"}}};
    auto images = conversation_images(c, store);
    ASSERT_EQ(images.size(), 2u);
    EXPECT_EQ(images[0][2], -1.0f);
}

TEST(Features, DimensionMismatchAndNonFiniteRejected)
{
    TempDir dir;
    clarion::testing::write_text(dir / "a.tsv", "dim=3\nimg\t1,2\n");
    EXPECT_THROW(ImageFeatureStore::load(dir / "a.tsv"), DataError);
    clarion::testing::write_text(dir / "b.tsv", "dim=2\nimg\t1,nan\n");
    EXPECT_THROW(ImageFeatureStore::load(dir / "b.tsv"), DataError);
    clarion::testing::write_text(dir / "c.tsv", "img\t1,2\n");
    EXPECT_THROW(ImageFeatureStore::load(dir / "c.tsv"), DataError);
}
