#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "clarion/corpus.hpp"

namespace clarion {

/// Re-ranker input: topic + inferred-query token ids and the feature vectors
/// of the conversation's images (empty for the text-only path).
struct ScorerContext {
    std::vector<TokenId> text;
    std::vector<std::vector<float>> images;
};

/// Per-context scoring state. Implementations may cache work derived from
/// the context across calls.
class ScorerSession {
  public:
    virtual ~ScorerSession() = default;
    /// Vocabulary-sized next-token logits after `prefix` generated tokens.
    virtual std::vector<double> next(std::span<TokenId const> prefix) = 0;
};

class Scorer {
  public:
    virtual ~Scorer() = default;
    [[nodiscard]] virtual std::size_t vocab_size() const = 0;
    /// Throws DataError on malformed contexts (e.g. image dimension mismatch).
    virtual std::unique_ptr<ScorerSession> start(ScorerContext const &context) const = 0;
    /// Whether concurrent sessions on one scorer are safe.
    [[nodiscard]] virtual bool concurrent() const { return true; }

    std::vector<double> score_next(ScorerContext const &context, std::span<TokenId const> prefix) const;
};

/// Baseline scorer: the logit of token v is the number of context text tokens
/// equal to v. Ignores images and the generated prefix.
class LexicalScorer final : public Scorer {
  public:
    explicit LexicalScorer(std::size_t vocab_size) : vocab_size_(vocab_size) {}
    [[nodiscard]] std::size_t vocab_size() const override { return vocab_size_; }
    std::unique_ptr<ScorerSession> start(ScorerContext const &context) const override;

  private:
    std::size_t vocab_size_;
};

/// Softmax restricted to `allowed`; every other entry is 0. Throws DataError
/// when `allowed` is empty, out of range, or has no finite logit.
std::vector<double> masked_step(std::span<double const> logits, std::span<TokenId const> allowed);

/// log-softmax values of the `allowed` entries, in `allowed` order.
std::vector<double> masked_log_probs(std::span<double const> logits, std::span<TokenId const> allowed);

/// Context token ids for `text` under `vocabulary` (unknown terms map to UNK).
std::vector<TokenId> context_tokens(Vocabulary const &vocabulary, std::string_view text);

} // namespace clarion
