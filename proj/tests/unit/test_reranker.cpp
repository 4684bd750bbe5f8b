#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "clarion/errors.hpp"
#include "clarion/fusion.hpp"
#include "clarion/training.hpp"
#include "decoder_oracles.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace clarion;
using namespace clarion::testing;

namespace {

constexpr TokenId a = 3, b = 4, c = 5, d = 6, e = 7;

FusionDims small_dims(std::size_t image_dim = 4) { return {8, 6, image_dim, 5}; }

ScorerContext fixture_context(bool images = true)
{
    ScorerContext ctx{{a, b, Vocabulary::kUnk}, {}};
    if (images) {
        ctx.images = {{0.5f, -1.0f, 0.25f, 2.0f}, {1.0f, 0.0f, 0.0f, -0.5f}};
    }
    return ctx;
}

TrainingExample fixture_example()
{
    auto trie = std::make_shared<DecodingTrie const>(
        DecodingTrie::from_sequences({{"A", {a, b}}, {"B", {a, c}}, {"C", {d}}, {"D", {e, b}}}));
    TrainingExample ex;
    ex.id = "fixture";
    ex.context = fixture_context();
    std::vector<std::uint32_t> pos{1, 3};
    std::vector<std::uint32_t> neg{0, 2};
    ex.positive = generation_tokens(*trie, pos);
    ex.negative = generation_tokens(*trie, neg);
    ex.trie = trie;
    return ex;
}

} // namespace

TEST(RankLoss, Fixtures)
{
    EXPECT_EQ(rank_loss(1.0, 4.0, 2.0), 0.0);
    EXPECT_EQ(rank_loss(3.0, 2.0, 2.0), 3.0);
    EXPECT_EQ(rank_loss(1.5, 1.5, 2.0), 2.0);
}

TEST(RankLoss, PropertyMonotone)
{
    Gen gen(3);
    for (int i = 0; i < 500; ++i) {
        double const p = gen.real(0, 10), n = gen.real(0, 10), m = gen.real(0.1, 3), step = gen.real(0, 2);
        EXPECT_GE(rank_loss(p, n, m), 0.0);
        EXPECT_LE(rank_loss(p, n + step, m), rank_loss(p, n, m));
        EXPECT_GE(rank_loss(p + step, n, m), rank_loss(p, n, m));
    }
}

TEST(TotalLoss, ArithmeticFixtures)
{
    LossConfig cfg;  // m = 2.0, lambda = 0.75
    EXPECT_EQ(combine_losses(3.0, 2.0, cfg), 5.25);
    EXPECT_EQ(combine_losses(1.0, 4.0, cfg), 1.0);
    cfg.lambda_rank = 0.0;
    EXPECT_EQ(combine_losses(3.0, 2.0, cfg), 3.0);
}

TEST(TotalLoss, ZeroLambdaIsPositiveLmMean)
{
    auto ex = fixture_example();
    HashScorer scorer(8, 5);
    LossConfig cfg;
    cfg.lambda_rank = 0.0;
    double const lm = lm_loss(scorer, ex.context, ex.positive, *ex.trie);
    EXPECT_NEAR(total_loss(ex, scorer, cfg), lm / static_cast<double>(ex.positive.size()), 1e-12);
}

TEST(TotalLoss, FusionOverloadMatchesGenericScorer)
{
    auto ex = fixture_example();
    auto model = FusionModel::create(small_dims(), 9);
    LossConfig cfg;
    ConstraintOptions none;
    EXPECT_NEAR(total_loss(ex, model, cfg, none, nullptr), total_loss(ex, static_cast<Scorer const &>(model), cfg),
                1e-10);
}

TEST(LmLoss, ForcedPathIsZero)
{
    auto trie = DecodingTrie::from_sequences({{"A", {a, b, c}}});
    HashScorer scorer(8, 1);
    EXPECT_EQ(lm_loss(scorer, {}, {a, b, c, Vocabulary::kEnd}, trie), 0.0);
}

TEST(LmLoss, UniformTwoStepClosedForm)
{
    // Step 1 chooses among {a, b}; step 2 among {c, d, e}; then END is forced.
    auto trie = DecodingTrie::from_sequences(
        {{"A", {a, c}}, {"B", {a, d}}, {"C", {a, e}}, {"D", {b, c}}});
    ConstantScorer uniform(std::vector<double>(8, 0.0));
    ConstraintOptions single;
    single.max_docs = 1;
    double const loss = lm_loss(uniform, {}, {a, c, Vocabulary::kEnd}, trie, single);
    EXPECT_NEAR(loss, std::log(2.0) + std::log(3.0), 1e-9);
}

TEST(LmLoss, DisallowedTargetThrows)
{
    auto trie = DecodingTrie::from_sequences({{"A", {a, b}}});
    HashScorer scorer(8, 1);
    EXPECT_THROW(lm_loss(scorer, {}, {b}, trie), DataError);
    EXPECT_THROW(lm_loss(scorer, {}, {}, trie), DataError);
}

TEST(LmLoss, PropertyNonNegative)
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Gen gen(seed);
        auto seqs = random_sequences(gen, gen.uniform(1, 6), 4, 1, 3);
        auto trie = DecodingTrie::from_sequences(seqs);
        std::vector<std::uint32_t> order{static_cast<std::uint32_t>(gen.uniform(0, seqs.size() - 1))};
        HashScorer scorer(7, seed, 5.0);
        EXPECT_GE(lm_loss(scorer, {}, generation_tokens(trie, order), trie), 0.0);
    }
}

TEST(Fusion, ZeroImagesMatchTextPath)
{
    auto params = FusionParameters::random(small_dims(), 4);
    params.image.setZero();
    FusionModel model(params);
    std::vector<TokenId> prefix{a, b};
    auto with = model.score_next(fixture_context(true), prefix);
    auto without = model.score_next(fixture_context(false), prefix);
    ASSERT_EQ(with.size(), without.size());
    for (std::size_t i = 0; i < with.size(); ++i) {
        EXPECT_NEAR(with[i], without[i], 1e-12);
    }
    // Zero feature vectors through a nonzero projection are also inert.
    FusionModel full(FusionParameters::random(small_dims(), 4));
    ScorerContext zero = fixture_context(false);
    zero.images = {std::vector<float>(4, 0.0f)};
    auto z = full.score_next(zero, prefix);
    auto t = full.score_next(fixture_context(false), prefix);
    for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(z[i], t[i], 1e-12);
    }
}

TEST(Fusion, ImagesChangeLogits)
{
    FusionModel model(FusionParameters::random(small_dims(), 4));
    auto with = model.score_next(fixture_context(true), {});
    auto without = model.score_next(fixture_context(false), {});
    EXPECT_NE(with, without);
}

TEST(Fusion, SessionMatchesStatelessScoring)
{
    FusionModel model(FusionParameters::random(small_dims(), 8));
    auto ctx = fixture_context();
    auto session = model.start(ctx);
    std::vector<TokenId> prefix;
    for (TokenId tok : {a, b, Vocabulary::kSep, d}) {
        auto cached = session->next(prefix);
        auto fresh = model.start(ctx)->next(prefix);
        ASSERT_EQ(cached, fresh);
        prefix.push_back(tok);
    }
}

TEST(Fusion, DeterministicUnderSeed)
{
    auto m1 = FusionModel::create(small_dims(), 21);
    auto m2 = FusionModel::create(small_dims(), 21);
    auto m3 = FusionModel::create(small_dims(), 22);
    EXPECT_EQ(m1.score_next(fixture_context(), {}), m2.score_next(fixture_context(), {}));
    EXPECT_NE(m1.score_next(fixture_context(), {}), m3.score_next(fixture_context(), {}));
}

TEST(Fusion, RejectsBadContexts)
{
    auto model = FusionModel::create(small_dims(), 1);
    ScorerContext wrong_dim{{a}, {{1.0f, 2.0f}}};
    EXPECT_THROW(model.start(wrong_dim), DataError);
    ScorerContext wrong_token{{99}, {}};
    EXPECT_THROW(model.start(wrong_token), DataError);
    auto text_only = FusionModel::create(small_dims(0), 1);
    EXPECT_THROW(text_only.start(fixture_context(true)), DataError);
    EXPECT_NO_THROW(text_only.start(fixture_context(false)));
}

TEST(Fusion, CheckpointRoundTrip)
{
    TempDir dir;
    auto model = FusionModel::create(small_dims(), 5);
    model.params().round_to_float();
    model.save(dir / "m.ckpt", 0xABCDEF);
    auto loaded = FusionModel::load(dir / "m.ckpt", 0xABCDEF);
    EXPECT_EQ(loaded.seed(), 5u);
    EXPECT_EQ(loaded.params().dims(), small_dims());
    EXPECT_EQ(loaded.score_next(fixture_context(), {}), model.score_next(fixture_context(), {}));
    EXPECT_THROW(FusionModel::load(dir / "m.ckpt", 0x123), DataError);
    EXPECT_NO_THROW(FusionModel::load(dir / "m.ckpt"));

    auto bytes = read_text(dir / "m.ckpt");
    write_text(dir / "short.ckpt", bytes.substr(0, bytes.size() - 4));
    EXPECT_THROW(FusionModel::load(dir / "short.ckpt"), DataError);
    write_text(dir / "long.ckpt", bytes + "xx");
    EXPECT_THROW(FusionModel::load(dir / "long.ckpt"), DataError);
}

TEST(Gradient, MatchesFiniteDifferences)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto c = random_gradcheck_case(seed);
        auto r = gradient_check(c);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_GT(r.checked, 0u);
    }
}

TEST(TrainingSet, GradesSplitPositivesAndNegatives)
{
    CorpusManifest m;
    m.vocabulary = Vocabulary({"w", "x", "y", "z"});
    for (auto const &[id, tok] : std::vector<std::pair<std::string, TokenId>>{{"d1", 3}, {"d2", 4}, {"d3", 5}, {"d4", 6}}) {
        m.id_map[id] = {id, {m.vocabulary.term(tok)}, {tok}};
    }
    Qrels q;
    q.set("f", "d1", 1);
    q.set("f", "d2", 0);
    q.set("f", "d3", 2);
    TrainingInput in{"conv", "f", {{3}, {}}, {"t", {{"d1", 4}, {"d2", 3}, {"d3", 2}, {"d4", 1}}}};
    TrainingSetReport report;
    auto set = build_training_set({in}, q, m, &report);
    ASSERT_EQ(set.size(), 1u);
    EXPECT_EQ(parse_generation(set[0].positive, *set[0].trie), (std::vector<std::string>{"d1", "d3"}));
    EXPECT_EQ(parse_generation(set[0].negative, *set[0].trie), (std::vector<std::string>{"d2", "d4"}));

    Qrels none;
    none.set("f", "d1", 0);
    build_training_set({in}, none, m, &report);
    EXPECT_EQ(report.examples, 0u);
    EXPECT_EQ(report.skipped_no_positive, 1u);

    Qrels all;
    for (auto const *id : {"d1", "d2", "d3", "d4"}) {
        all.set("f", id, 1);
    }
    build_training_set({in}, all, m, &report);
    EXPECT_EQ(report.skipped_no_negative, 1u);
}

TEST(Train, SingleExampleLossDecreases)
{
    auto model = FusionModel::create(small_dims(), 3);
    TrainOptions opts;
    opts.epochs = 50;
    opts.loss.learning_rate = 0.05;
    auto r = train(model, {fixture_example()}, opts);
    ASSERT_EQ(r.epoch_loss.size(), 50u);
    EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Train, SameSeedSameCurve)
{
    std::vector<TrainingExample> examples{fixture_example(), fixture_example(), fixture_example()};
    examples[1].context.text = {c, d};
    examples[2].context.images.clear();
    TrainOptions opts;
    opts.epochs = 5;
    opts.loss.learning_rate = 0.01;
    auto m1 = FusionModel::create(small_dims(), 3);
    auto m2 = FusionModel::create(small_dims(), 3);
    EXPECT_EQ(train(m1, examples, opts).epoch_loss, train(m2, examples, opts).epoch_loss);
    EXPECT_EQ(m1.score_next(fixture_context(), {}), m2.score_next(fixture_context(), {}));
}

TEST(Train, NonFiniteLossNamesExample)
{
    auto model = FusionModel::create(small_dims(), 3);
    model.params().out_bias(0, a) = std::numeric_limits<double>::infinity();
    try {
        train(model, {fixture_example()}, {});
        FAIL() << "expected Error";
    } catch (Error const &err) {
        EXPECT_NE(std::string(err.what()).find("fixture"), std::string::npos) << err.what();
    }
}

TEST(Train, RejectsEmptyAndInvalidConfig)
{
    auto model = FusionModel::create(small_dims(), 3);
    EXPECT_THROW(train(model, {}, {}), DataError);
    TrainOptions bad;
    bad.loss.margin = 0.0;
    EXPECT_THROW(train(model, {fixture_example()}, bad), UsageError);
}

TEST(Train, LossCurveCsv)
{
    TempDir dir;
    write_loss_curve(dir / "loss.csv", {1.5, 0.25});
    EXPECT_EQ(read_text(dir / "loss.csv"), "epoch,mean_loss\n1,1.5\n2,0.25\n");
}
