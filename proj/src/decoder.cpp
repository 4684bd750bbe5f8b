#include "clarion/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <json.hpp>

#include "clarion/errors.hpp"

namespace clarion {

namespace {

struct Beam {
    std::vector<TokenId> tokens;
    TrieCursor cursor;
    double logp = 0.0;

    [[nodiscard]] double normalized() const
    {
        return tokens.empty() ? 0.0 : logp / static_cast<double>(tokens.size());
    }
};

struct Expansion {
    TokenId token;
    double logp;
};

bool finished_before(Beam const &a, Beam const &b)
{
    auto sa = a.normalized();
    auto sb = b.normalized();
    if (sa != sb) {
        return sa > sb;
    }
    return std::lexicographical_compare(a.cursor.emitted().begin(), a.cursor.emitted().end(),
                                        b.cursor.emitted().begin(), b.cursor.emitted().end());
}

std::string describe(std::vector<std::optional<Beam>> const &beams)
{
    auto n = std::count_if(beams.begin(), beams.end(), [](auto const &b) { return b.has_value(); });
    std::string out = std::to_string(n) + " live beam(s)";
    for (auto const &b : beams) {
        if (b) {
            out += ", lead beam " + std::to_string(b->tokens.size()) + " token(s) / "
                   + std::to_string(b->cursor.emitted().size()) + " document(s)";
            break;
        }
    }
    return out;
}

void write_trace(std::ostream &os, std::size_t step, std::vector<std::optional<Beam>> const &slots,
                 std::size_t finished)
{
    nlohmann::json line;
    line["step"] = step;
    line["finished"] = finished;
    auto &arr = line["beams"] = nlohmann::json::array();
    for (auto const &slot : slots) {
        if (!slot) {
            continue;
        }
        auto const &b = *slot;
        arr.push_back({{"tokens", b.tokens}, {"logp", b.logp}, {"docs", b.cursor.emitted().size()}});
    }
    os << line.dump() << '\n';
}

} // namespace

RankedList complete_ranking(DecodingTrie const &trie, std::vector<std::uint32_t> const &generated)
{
    RankedList out;
    std::vector<bool> placed(trie.candidate_count(), false);
    std::vector<std::uint32_t> order;
    for (auto c : generated) {
        if (!placed.at(c)) {
            placed[c] = true;
            order.push_back(c);
        }
    }
    out.generated = order.size();
    for (std::uint32_t c = 0; c < trie.candidate_count(); ++c) {
        if (!placed[c]) {
            order.push_back(c);
        }
    }
    auto const n = static_cast<double>(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.docs.push_back({trie.doc_id(order[r]), n - static_cast<double>(r)});
    }
    return out;
}

RankedList beam_decode(DecodingTrie const &trie, Scorer const &scorer, ScorerContext const &context,
                       DecodeOptions const &options)
{
    if (options.beam_width == 0) {
        throw UsageError("beam width must be at least 1");
    }
    ConstraintOptions constraints;
    constraints.max_docs = options.max_docs == 0 ? trie.candidate_count()
                                                 : std::min(options.max_docs, trie.candidate_count());
    auto session = scorer.start(context);

    // Slots keep their index across steps (empty slots included) so that the
    // slots of a narrower beam are exactly the leading slots of a wider one.
    std::vector<std::optional<Beam>> live;
    live.emplace_back(Beam{{}, TrieCursor(trie, constraints), 0.0});
    std::vector<Beam> finished;
    std::size_t step = 0;

    auto any_live = [&] {
        return std::any_of(live.begin(), live.end(), [](auto const &b) { return b.has_value(); });
    };
    while (any_live()) {
        std::vector<std::vector<Expansion>> expansions(live.size());
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (!live[i]) {
                continue;
            }
            auto &beam = *live[i];
            auto allowed = beam.cursor.allowed();
            std::vector<double> logits;
            try {
                logits = session->next(beam.tokens);
            } catch (std::exception const &e) {
                throw Error(std::string("scorer failed at decoding step ") + std::to_string(step) + " ("
                            + describe(live) + "): " + e.what());
            }
            if (logits.size() != scorer.vocab_size()) {
                throw Error("scorer returned " + std::to_string(logits.size()) + " logits, expected "
                            + std::to_string(scorer.vocab_size()));
            }
            auto lp = masked_log_probs(logits, allowed);
            for (std::size_t a = 0; a < allowed.size(); ++a) {
                if (!std::isfinite(lp[a])) {
                    continue;
                }
                if (allowed[a] == Vocabulary::kEnd) {
                    Beam done{beam.tokens, beam.cursor, beam.logp + lp[a]};
                    done.tokens.push_back(Vocabulary::kEnd);
                    done.cursor.advance(Vocabulary::kEnd);
                    finished.push_back(std::move(done));
                } else {
                    expansions[i].push_back({allowed[a], lp[a]});
                }
            }
            std::stable_sort(expansions[i].begin(), expansions[i].end(),
                             [](Expansion const &x, Expansion const &y) { return x.logp > y.logp; });
        }

        // Slot j takes the best untaken expansion of slots 0..j.
        std::vector<std::size_t> head(live.size(), 0);
        std::vector<std::optional<Beam>> next(options.beam_width);
        for (std::size_t j = 0; j < options.beam_width; ++j) {
            std::size_t best = live.size();
            double best_lp = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i <= j && i < live.size(); ++i) {
                if (!live[i] || head[i] >= expansions[i].size()) {
                    continue;
                }
                double v = live[i]->logp + expansions[i][head[i]].logp;
                if (best == live.size() || v > best_lp) {
                    best = i;
                    best_lp = v;
                }
            }
            if (best == live.size()) {
                continue;
            }
            auto const &ex = expansions[best][head[best]++];
            Beam b{live[best]->tokens, live[best]->cursor, best_lp};
            b.tokens.push_back(ex.token);
            b.cursor.advance(ex.token);
            next[j] = std::move(b);
        }
        live = std::move(next);
        ++step;
        if (options.trace != nullptr) {
            write_trace(*options.trace, step, live, finished.size());
        }
    }

    if (finished.empty()) {
        throw Error("beam search finished no sequence");
    }
    auto best = std::min_element(finished.begin(), finished.end(), finished_before);
    auto out = complete_ranking(trie, best->cursor.emitted());
    out.tokens = best->tokens;
    out.score = best->normalized();
    return out;
}

double sequence_score(DecodingTrie const &trie, Scorer const &scorer, ScorerContext const &context,
                      std::vector<TokenId> const &tokens, ConstraintOptions constraints)
{
    if (tokens.empty()) {
        throw DataError("cannot score an empty sequence");
    }
    auto session = scorer.start(context);
    TrieCursor cursor(trie, constraints);
    double total = 0.0;
    std::vector<TokenId> prefix;
    for (auto tok : tokens) {
        auto allowed = cursor.allowed();
        auto logits = session->next(prefix);
        auto lp = masked_log_probs(logits, allowed);
        auto it = std::lower_bound(allowed.begin(), allowed.end(), tok);
        if (it == allowed.end() || *it != tok) {
            throw DataError("token " + std::to_string(tok) + " not allowed at step " + std::to_string(prefix.size()));
        }
        total += lp[static_cast<std::size_t>(it - allowed.begin())];
        cursor.advance(tok);
        prefix.push_back(tok);
    }
    return total / static_cast<double>(tokens.size());
}

} // namespace clarion
