#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clarion/corpus.hpp"
#include "clarion/evaluation.hpp"
#include "clarion/fusion.hpp"
#include "clarion/lexical_index.hpp"
#include "clarion/scorer.hpp"
#include "clarion/trie.hpp"

namespace clarion {

struct LossConfig {
    double margin = 2.0;
    double lambda_rank = 0.75;
    double learning_rate = 1e-4;
    std::size_t batch_size = 2;
};

/// max(0, m + l_pos - l_neg).
double rank_loss(double l_pos, double l_neg, double margin);

/// l_pos + lambda * rank_loss(l_pos, l_neg, m).
double combine_losses(double l_pos, double l_neg, LossConfig const &config);

/// -sum_t log P(y_t | y_<t, x) under softmax masked to the trie's allowed
/// set at each step. Throws DataError when a target token is not allowed.
double lm_loss(Scorer const &scorer, ScorerContext const &context, std::vector<TokenId> const &target,
               DecodingTrie const &trie, ConstraintOptions constraints = {});

/// Target tokens with the allowed set at every step.
MaskedTarget mask_target(DecodingTrie const &trie, std::vector<TokenId> const &target,
                         ConstraintOptions constraints = {});

struct TrainingExample {
    std::string id;
    ScorerContext context;
    std::shared_ptr<DecodingTrie const> trie;
    std::vector<TokenId> positive;
    std::vector<TokenId> negative;
};

/// Total loss with per-token mean LM losses feeding the ranking term.
double total_loss(TrainingExample const &example, Scorer const &scorer, LossConfig const &config,
                  ConstraintOptions constraints = {});

/// Loss and (optionally) accumulated gradient for the fusion model.
double total_loss(TrainingExample const &example, FusionModel const &model, LossConfig const &config,
                  ConstraintOptions constraints, FusionParameters *grad, double weight = 1.0);

struct TrainingInput {
    std::string id;            ///< e.g. conversation id
    std::string relevance_key; ///< qrels topic (facet id)
    ScorerContext context;
    CandidateSet candidates;
};

struct TrainingSetOptions {
    std::size_t max_positive = 10;
    std::size_t max_negative = 10;
};

struct TrainingSetReport {
    std::size_t examples = 0;
    std::size_t skipped_no_positive = 0;
    std::size_t skipped_no_negative = 0;
};

/// Positives: candidates graded > 0; negatives: graded <= 0 (or unjudged).
/// Both in first-phase order, truncated to the configured caps.
std::vector<TrainingExample> build_training_set(std::vector<TrainingInput> const &inputs, Qrels const &qrels,
                                                CorpusManifest const &manifest, TrainingSetReport *report = nullptr,
                                                TrainingSetOptions const &options = {});

struct TrainOptions {
    std::size_t epochs = 10;
    std::uint64_t seed = 42;
    LossConfig loss;
    ConstraintOptions constraints;
    std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
    std::vector<double> epoch_loss;  ///< mean total loss of each epoch
};

/// Mini-batch SGD on the total loss. Examples are shuffled each epoch with
/// a generator seeded from `seed`. Throws Error naming the example when a
/// loss becomes non-finite. Weights are rounded to float precision at the end.
TrainResult train(FusionModel &model, std::vector<TrainingExample> const &examples, TrainOptions const &options);

void write_loss_curve(std::filesystem::path const &path, std::vector<double> const &epoch_loss);

} // namespace clarion
