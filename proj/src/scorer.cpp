#include "clarion/scorer.hpp"

#include <cmath>
#include <limits>

#include "clarion/errors.hpp"
#include "clarion/text.hpp"

namespace clarion {

std::vector<double> Scorer::score_next(ScorerContext const &context, std::span<TokenId const> prefix) const
{
    return start(context)->next(prefix);
}

namespace {

class LexicalSession final : public ScorerSession {
  public:
    LexicalSession(std::size_t vocab, ScorerContext const &context) : logits_(vocab, 0.0)
    {
        for (auto tok : context.text) {
            if (tok < vocab) {
                logits_[tok] += 1.0;
            }
        }
    }
    std::vector<double> next(std::span<TokenId const>) override { return logits_; }

  private:
    std::vector<double> logits_;
};

} // namespace

std::unique_ptr<ScorerSession> LexicalScorer::start(ScorerContext const &context) const
{
    return std::make_unique<LexicalSession>(vocab_size_, context);
}

std::vector<double> masked_log_probs(std::span<double const> logits, std::span<TokenId const> allowed)
{
    if (allowed.empty()) {
        throw DataError("masked step with an empty allowed set");
    }
    double top = -std::numeric_limits<double>::infinity();
    for (auto tok : allowed) {
        if (tok >= logits.size()) {
            throw DataError("allowed token " + std::to_string(tok) + " outside a vocabulary of "
                            + std::to_string(logits.size()));
        }
        if (std::isfinite(logits[tok])) {
            top = std::max(top, logits[tok]);
        }
    }
    if (!std::isfinite(top)) {
        throw DataError("no allowed token has a finite logit");
    }
    double sum = 0.0;
    for (auto tok : allowed) {
        if (std::isfinite(logits[tok])) {
            sum += std::exp(logits[tok] - top);
        }
    }
    double const log_z = top + std::log(sum);
    std::vector<double> out;
    out.reserve(allowed.size());
    for (auto tok : allowed) {
        out.push_back(std::isfinite(logits[tok]) ? logits[tok] - log_z
                                                 : -std::numeric_limits<double>::infinity());
    }
    return out;
}

std::vector<double> masked_step(std::span<double const> logits, std::span<TokenId const> allowed)
{
    auto lp = masked_log_probs(logits, allowed);
    std::vector<double> probs(logits.size(), 0.0);
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        probs[allowed[i]] = std::exp(lp[i]);
    }
    return probs;
}

std::vector<TokenId> context_tokens(Vocabulary const &vocabulary, std::string_view text)
{
    std::vector<TokenId> out;
    for (auto const &term : text::tokenize(text)) {
        out.push_back(vocabulary.lookup(term));
    }
    return out;
}

} // namespace clarion
