#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "support.hpp"

using clarion::testing::read_text;
using clarion::testing::TempDir;
using clarion::testing::write_text;

namespace fs = std::filesystem;

namespace {

int run(std::string const &args, std::string const &env = {})
{
    auto const cmd = env + " " + CLARION_CLI + " " + args + " >/dev/null 2>&1";
    int const status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// One generated benchmark and index shared by every test in this file.
class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        dir_ = new TempDir();
        auto const synth = std::string(CLARION_SYNTH) + " --topics 4 --out " + dir_->path().string() + " >/dev/null";
        ASSERT_EQ(std::system(synth.c_str()), 0);
        ASSERT_EQ(run("index --corpus " + at("corpus.jsonl") + " --out " + at("index")), 0);
    }
    static void TearDownTestSuite()
    {
        delete dir_;
        dir_ = nullptr;
    }

    static std::string at(std::string const &name) { return (dir_->path() / name).string(); }
    static std::string common()
    {
        return " --conversations " + at("conversations.jsonl") + " --topics " + at("topics.jsonl") +
               " --index-dir " + at("index");
    }

    static TempDir *dir_;
};

TempDir *Cli::dir_ = nullptr;

} // namespace

TEST_F(Cli, IndexIsByteDeterministic)
{
    ASSERT_EQ(run("index --corpus " + at("corpus.jsonl") + " --out " + at("index2")), 0);
    for (auto const *name : {"manifest.json", "index.bin"}) {
        EXPECT_EQ(read_text(fs::path(at("index")) / name), read_text(fs::path(at("index2")) / name)) << name;
    }
}

TEST_F(Cli, MissingInputIsDataErrorWithoutPartialOutput)
{
    EXPECT_EQ(run("index --corpus " + at("absent.jsonl") + " --out " + at("never")), 2);
    EXPECT_FALSE(fs::exists(at("never")));
    EXPECT_EQ(run("eval --run " + at("absent.run") + " --qrels " + at("qrels.txt")), 2);
}

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run("index --corpus " + at("corpus.jsonl")), 1);
    EXPECT_EQ(run("no-such-command"), 1);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("pipeline" + common() + " --mode rerank --scorer fusion --run " + at("x.run")), 1);
}

TEST_F(Cli, ForgeEmptyPoolAndUnreachableJudge)
{
    write_text(at("empty_pool.jsonl"), "");
    EXPECT_EQ(run("forge --pool " + at("empty_pool.jsonl") + " --topics " + at("topics.jsonl") + " --out " +
                  at("forged_empty.jsonl")),
              0);
    EXPECT_EQ(read_text(at("forged_empty.jsonl")), "");

    auto const forge = "forge --pool " + at("qa_pool.jsonl") + " --topics " + at("topics.jsonl") +
                       " --sample-size 5 --judge remote --out " + at("forged_remote.jsonl");
    EXPECT_EQ(run(forge, "JUDGE_ENDPOINT=http://127.0.0.1:9 JUDGE_API_KEY=k"), 3);
    EXPECT_FALSE(fs::exists(at("forged_remote.jsonl")));
    EXPECT_EQ(run(forge, "env -u JUDGE_ENDPOINT"), 1);
}

TEST_F(Cli, ForgeIsReproducible)
{
    auto const forge = "forge --pool " + at("qa_pool.jsonl") + " --topics " + at("topics.jsonl") +
                       " --sample-size 40 --seed 9 --jobs 3 --out ";
    ASSERT_EQ(run(forge + at("forged_a.jsonl") + " --stats " + at("stats_a.json")), 0);
    ASSERT_EQ(run(forge + at("forged_b.jsonl") + " --stats " + at("stats_b.json")), 0);
    EXPECT_EQ(read_text(at("forged_a.jsonl")), read_text(at("forged_b.jsonl")));
    EXPECT_EQ(read_text(at("stats_a.json")), read_text(at("stats_b.json")));
    EXPECT_FALSE(read_text(at("forged_a.jsonl")).empty());
}

TEST_F(Cli, TextOnlyNeverOpensFeatureStore)
{
    EXPECT_EQ(run("pipeline" + common() + " --mode rerank --scorer lexical --text-only --features " +
                  at("no_such_features.tsv") + " --run " + at("text.run")),
              0);
    EXPECT_FALSE(read_text(at("text.run")).empty());
}

TEST_F(Cli, TrainThenRerankAndCompare)
{
    ASSERT_EQ(run("split --conversations " + at("conversations.jsonl") + " --out-dir " + at("split")), 0);
    auto const train_common = " --conversations " + at("split/train.jsonl") + " --topics " + at("topics.jsonl") +
                              " --index-dir " + at("index") + " --features " + at("features.tsv");
    ASSERT_EQ(run("train" + train_common + " --qrels " + at("qrels.txt") + " --checkpoint " + at("model.bin") +
                  " --epochs 5 --lr 0.05 --dim 16 --loss-curve " + at("loss.csv")),
              0);

    std::istringstream csv(read_text(at("loss.csv")));
    std::string line;
    std::getline(csv, line);  // header
    std::vector<double> losses;
    while (std::getline(csv, line)) {
        losses.push_back(std::stod(line.substr(line.find(',') + 1)));
    }
    ASSERT_EQ(losses.size(), 5u);
    for (std::size_t i = 1; i < losses.size(); ++i) {
        EXPECT_LT(losses[i], losses[i - 1]) << "epoch " << i + 1;
    }

    auto const test_common = " --conversations " + at("split/test.jsonl") + " --topics " + at("topics.jsonl") +
                             " --index-dir " + at("index");
    ASSERT_EQ(run("pipeline" + test_common + " --mode bm25-only --run " + at("bm25.run")), 0);
    ASSERT_EQ(run("pipeline" + test_common + " --features " + at("features.tsv") +
                  " --mode rerank --scorer fusion --checkpoint " + at("model.bin") + " --trace " + at("trace.jsonl") +
                  " --run " + at("mm.run")),
              0);
    EXPECT_FALSE(read_text(at("trace.jsonl")).empty());

    auto const conv = " --qrels " + at("qrels.txt") + " --conversations " + at("split/test.jsonl");
    ASSERT_EQ(run("eval --run " + at("mm.run") + conv + " --json " + at("eval.json")), 0);
    auto const report = nlohmann::json::parse(read_text(at("eval.json")));
    EXPECT_TRUE(report["mean"].contains("MRR"));
    ASSERT_EQ(run("compare --baseline " + at("mm.run") + " --system " + at("mm.run") + conv + " --json " +
                  at("self.json")),
              0);
    auto const self = nlohmann::json::parse(read_text(at("self.json")));
    ASSERT_FALSE(self["metrics"].empty());
    for (auto const &[name, d] : self["metrics"].items()) {
        EXPECT_EQ(d["absolute"].get<double>(), 0.0) << name;
    }
    ASSERT_EQ(run("compare --baseline " + at("bm25.run") + " --system " + at("mm.run") + conv), 0);
}
