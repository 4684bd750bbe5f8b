#include "clarion/forge.hpp"

#include <algorithm>
#include <random>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"
#include "clarion/parallel.hpp"

namespace clarion {

using nlohmann::json;

std::vector<SingleTurnQA> load_qa_pool(std::filesystem::path const &path)
{
    std::vector<SingleTurnQA> pool;
    auto const source = path.string();
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        try {
            auto obj = json::parse(line);
            SingleTurnQA qa;
            qa.topic_id = obj.at("topic_id").get<std::string>();
            qa.facet_id = obj.at("facet_id").get<std::string>();
            qa.question = obj.at("question").get<std::string>();
            qa.answer = obj.at("answer").get<std::string>();
            if (obj.contains("image_refs")) {
                qa.image_refs = obj.at("image_refs").get<std::vector<std::string>>();
            }
            if (qa.question.find_first_not_of(" \t") == std::string::npos
                || qa.answer.find_first_not_of(" \t") == std::string::npos) {
                throw DataError(source, number, "empty question or answer");
            }
            pool.push_back(std::move(qa));
        } catch (json::exception const &e) {
            throw DataError(source, number, std::string("invalid QA record: ") + e.what());
        }
    });
    return pool;
}

void save_qa_pool(std::filesystem::path const &path, std::vector<SingleTurnQA> const &pool)
{
    std::string out;
    for (auto const &qa : pool) {
        out += json{{"topic_id", qa.topic_id},
                    {"facet_id", qa.facet_id},
                    {"question", qa.question},
                    {"image_refs", qa.image_refs},
                    {"answer", qa.answer}}
                   .dump();
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

ConversationStream::ConversationStream(std::vector<SingleTurnQA> const &pool, std::size_t turn_count)
    : turn_count_(turn_count)
{
    if (turn_count < 1 || turn_count > Conversation::kMaxTurns) {
        throw UsageError("turn count must be between 1 and " + std::to_string(Conversation::kMaxTurns));
    }
    std::map<std::string, std::vector<SingleTurnQA const *>> by_topic;
    for (auto const &qa : pool) {
        by_topic[qa.topic_id].push_back(&qa);
    }
    for (auto &[topic, qas] : by_topic) {
        if (qas.size() >= turn_count) {
            groups_.emplace_back(topic, std::move(qas));
        }
    }
}

bool ConversationStream::advance()
{
    while (group_ < groups_.size()) {
        auto const n = groups_[group_].second.size();
        if (!started_) {
            indices_.assign(turn_count_, 0);
            // Smallest selection of distinct indices: 0, 1, ..., k-1.
            for (std::size_t i = 0; i < turn_count_; ++i) {
                indices_[i] = i;
            }
            started_ = true;
            local_ = 0;
            return true;
        }
        // Odometer over the last position first, skipping repeated indices.
        for (std::size_t pos = turn_count_; pos-- > 0;) {
            auto used = [&](std::size_t v) {
                return std::find(indices_.begin(), indices_.begin() + static_cast<std::ptrdiff_t>(pos), v)
                       != indices_.begin() + static_cast<std::ptrdiff_t>(pos);
            };
            std::size_t v = indices_[pos] + 1;
            while (v < n && used(v)) {
                ++v;
            }
            if (v >= n) {
                continue;
            }
            indices_[pos] = v;
            // Refill the tail with the smallest unused indices.
            bool ok = true;
            for (std::size_t tail = pos + 1; tail < turn_count_; ++tail) {
                std::size_t w = 0;
                auto used_tail = [&](std::size_t x) {
                    return std::find(indices_.begin(), indices_.begin() + static_cast<std::ptrdiff_t>(tail), x)
                           != indices_.begin() + static_cast<std::ptrdiff_t>(tail);
                };
                while (w < n && used_tail(w)) {
                    ++w;
                }
                if (w >= n) {
                    ok = false;
                    break;
                }
                indices_[tail] = w;
            }
            if (ok) {
                ++local_;
                return true;
            }
        }
        ++group_;
        started_ = false;
    }
    return false;
}

std::optional<Conversation> ConversationStream::next()
{
    if (!advance()) {
        return std::nullopt;
    }
    auto const &[topic, qas] = groups_[group_];
    Conversation c;
    c.topic_id = topic;
    c.conversation_id = topic + "-k" + std::to_string(turn_count_) + "-" + std::to_string(local_);
    for (auto idx : indices_) {
        auto const *qa = qas[idx];
        c.turns.push_back({qa->question, qa->image_refs, qa->answer});
    }
    c.facet_id = qas[indices_.back()]->facet_id;
    ++emitted_;
    return c;
}

std::vector<Conversation> synthesize(std::vector<SingleTurnQA> const &pool, std::size_t turn_count)
{
    ConversationStream stream(pool, turn_count);
    std::vector<Conversation> out;
    while (auto c = stream.next()) {
        out.push_back(std::move(*c));
    }
    return out;
}

std::vector<Conversation> sample(ConversationStream &stream, std::size_t n, std::uint64_t seed)
{
    if (n == 0) {
        throw UsageError("sample size must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, Conversation>> reservoir;
    reservoir.reserve(n);
    std::size_t seen = 0;
    while (auto c = stream.next()) {
        if (reservoir.size() < n) {
            reservoir.emplace_back(seen, std::move(*c));
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, seen);
            auto const j = pick(rng);
            if (j < n) {
                reservoir[j] = {seen, std::move(*c)};
            }
        }
        ++seen;
    }
    std::sort(reservoir.begin(), reservoir.end(),
              [](auto const &a, auto const &b) { return a.first < b.first; });
    std::vector<Conversation> out;
    out.reserve(reservoir.size());
    for (auto &[idx, c] : reservoir) {
        out.push_back(std::move(c));
    }
    return out;
}

bool filter_duplicates(Conversation const &conversation, JudgeClient &judge)
{
    auto const &turns = conversation.turns;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        for (std::size_t j = i + 1; j < turns.size(); ++j) {
            if (judge.is_duplicate(turns[i], turns[j])) {
                return false;
            }
        }
    }
    return true;
}

Conversation truncate_on_reveal(Conversation const &conversation, Facet const &facet, JudgeClient &judge)
{
    auto const k = conversation.turns.size();
    for (std::size_t t = 0; t + 1 < k; ++t) {
        if (judge.reveals_intent(facet, conversation.turns[t])) {
            Conversation cut = conversation;
            cut.turns.resize(t + 1);
            cut.conversation_id += "-cut" + std::to_string(t + 1);
            return cut;
        }
    }
    return conversation;
}

RefineStage refine_stage(std::size_t t, std::size_t total)
{
    if (t == 1) {
        return RefineStage::Initial;
    }
    return t < total ? RefineStage::Partial : RefineStage::Final;
}

RefineResult refine(Conversation const &conversation, Facet const &facet, JudgeClient &judge)
{
    RefineResult result{conversation, true, {}};
    auto const total = conversation.turns.size();
    try {
        std::vector<std::string> answers;
        for (std::size_t t = 1; t <= total; ++t) {
            answers.push_back(judge.refine(refine_stage(t, total), facet, conversation.turns[t - 1]));
        }
        for (std::size_t i = 0; i < total; ++i) {
            result.conversation.turns[i].answer = std::move(answers[i]);
        }
    } catch (std::exception const &e) {
        result.conversation = conversation;
        result.refined = false;
        result.error = e.what();
    }
    return result;
}

std::size_t ForgeStats::total_in() const
{
    std::size_t n = 0;
    for (auto const &[k, s] : targets) {
        n += s.sampled;
    }
    return n;
}

std::size_t ForgeStats::total_out() const
{
    std::size_t n = 0;
    for (auto const &[k, c] : final_turn_histogram) {
        n += c;
    }
    return n;
}

std::size_t ForgeStats::total_rejected() const
{
    std::size_t n = 0;
    for (auto const &[k, s] : targets) {
        n += s.duplicates_rejected;
    }
    return n;
}

json ForgeStats::to_json() const
{
    json per_target = json::object();
    for (auto const &[k, s] : targets) {
        per_target[std::to_string(k)] = {
            {"synthesized", s.synthesized},
            {"sampled", s.sampled},
            {"duplicates_rejected", s.duplicates_rejected},
            {"truncated", s.truncated},
            {"refine_failures", s.refine_failures},
            {"emitted", s.emitted},
        };
    }
    json histogram = json::object();
    for (auto const &[k, c] : final_turn_histogram) {
        histogram[std::to_string(k)] = c;
    }
    return {
        {"stages", {"synthesize", "sample", "filter_duplicates", "truncate_on_reveal", "refine"}},
        {"targets", per_target},
        {"final_turn_histogram", histogram},
        {"total_in", total_in()},
        {"total_out", total_out()},
        {"total_rejected", total_rejected()},
        {"refine_failure_details", refine_failures},
    };
}

namespace {

/// Rethrows the active exception as a ForgeError tagged with `stage`.
[[noreturn]] void rethrow_in_stage(std::string const &stage, std::string const &context = {})
{
    try {
        throw;
    } catch (RemoteError const &e) {
        throw ForgeError(stage, context + e.what(), e.endpoint());
    } catch (std::exception const &e) {
        throw ForgeError(stage, context + e.what());
    }
}

} // namespace

ForgeResult run_pipeline(std::vector<SingleTurnQA> const &pool, TopicCatalog const &catalog,
                         ForgeConfig const &config, JudgeClient &judge)
{
    if (config.sample_size == 0) {
        throw UsageError("sample_size must be at least 1");
    }
    ForgeResult result;
    for (auto const target : config.turn_targets) {
        auto &stats = result.stats.targets[target];

        std::vector<Conversation> sampled;
        try {
            ConversationStream stream(pool, target);
            sampled = sample(stream, config.sample_size, config.seed + 0x9E3779B97F4A7C15ULL * target);
            stats.synthesized = stream.position();
        } catch (std::exception const &) {
            rethrow_in_stage("synthesize");
        }
        stats.sampled = sampled.size();

        // Judge calls run per conversation in parallel; tallies are folded in
        // sample order so the output does not depend on scheduling.
        enum class Outcome { Rejected, Kept };
        struct Slot {
            Outcome outcome = Outcome::Rejected;
            bool truncated = false;
            RefineResult refined;
        };
        std::vector<Slot> slots(sampled.size());
        parallel_for(sampled.size(), config.jobs, [&](std::size_t i) {
            auto const &c = sampled[i];
            Facet const *facet = nullptr;
            try {
                facet = &catalog.facet(c.topic_id, c.facet_id);
            } catch (std::exception const &) {
                rethrow_in_stage("synthesize", c.conversation_id + ": ");
            }
            bool accepted = false;
            try {
                accepted = filter_duplicates(c, judge);
            } catch (std::exception const &) {
                rethrow_in_stage("filter_duplicates", c.conversation_id + ": ");
            }
            if (!accepted) {
                return;
            }
            Conversation cut;
            try {
                cut = truncate_on_reveal(c, *facet, judge);
            } catch (std::exception const &) {
                rethrow_in_stage("truncate_on_reveal", c.conversation_id + ": ");
            }
            auto &slot = slots[i];
            slot.outcome = Outcome::Kept;
            slot.truncated = cut.turns.size() < c.turns.size();
            slot.refined = refine(cut, *facet, judge);
        });

        for (auto &slot : slots) {
            if (slot.outcome == Outcome::Rejected) {
                ++stats.duplicates_rejected;
                continue;
            }
            if (slot.truncated) {
                ++stats.truncated;
            }
            if (!slot.refined.refined) {
                ++stats.refine_failures;
                result.stats.refine_failures.push_back(slot.refined.conversation.conversation_id + ": "
                                                       + slot.refined.error);
            }
            ++stats.emitted;
            ++result.stats.final_turn_histogram[slot.refined.conversation.turns.size()];
            result.conversations.push_back(std::move(slot.refined.conversation));
        }
    }
    return result;
}

} // namespace clarion
