#include "clarion/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"

namespace clarion {

double rank_loss(double l_pos, double l_neg, double margin) { return std::max(0.0, margin + l_pos - l_neg); }

double combine_losses(double l_pos, double l_neg, LossConfig const &config)
{
    return l_pos + config.lambda_rank * rank_loss(l_pos, l_neg, config.margin);
}

MaskedTarget mask_target(DecodingTrie const &trie, std::vector<TokenId> const &target, ConstraintOptions constraints)
{
    if (target.empty()) {
        throw DataError("empty target sequence");
    }
    MaskedTarget out;
    out.tokens = target;
    TrieCursor cursor(trie, constraints);
    for (std::size_t t = 0; t < target.size(); ++t) {
        auto allowed = cursor.allowed();
        if (!std::binary_search(allowed.begin(), allowed.end(), target[t])) {
            throw DataError("target token " + std::to_string(target[t]) + " is not allowed at step " + std::to_string(t));
        }
        out.allowed.push_back(std::move(allowed));
        cursor.advance(target[t]);
    }
    return out;
}

double lm_loss(Scorer const &scorer, ScorerContext const &context, std::vector<TokenId> const &target,
               DecodingTrie const &trie, ConstraintOptions constraints)
{
    auto masked = mask_target(trie, target, constraints);
    auto session = scorer.start(context);
    double loss = 0.0;
    std::vector<TokenId> prefix;
    for (std::size_t t = 0; t < masked.tokens.size(); ++t) {
        auto const &allowed = masked.allowed[t];
        auto logits = session->next(prefix);
        auto lp = masked_log_probs(logits, allowed);
        auto pos = static_cast<std::size_t>(std::lower_bound(allowed.begin(), allowed.end(), masked.tokens[t])
                                            - allowed.begin());
        loss -= lp[pos];
        prefix.push_back(masked.tokens[t]);
    }
    return loss;
}

double total_loss(TrainingExample const &example, Scorer const &scorer, LossConfig const &config,
                  ConstraintOptions constraints)
{
    double pos = lm_loss(scorer, example.context, example.positive, *example.trie, constraints)
                 / static_cast<double>(example.positive.size());
    double neg = lm_loss(scorer, example.context, example.negative, *example.trie, constraints)
                 / static_cast<double>(example.negative.size());
    return combine_losses(pos, neg, config);
}

double total_loss(TrainingExample const &example, FusionModel const &model, LossConfig const &config,
                  ConstraintOptions constraints, FusionParameters *grad, double weight)
{
    auto pos_target = mask_target(*example.trie, example.positive, constraints);
    auto neg_target = mask_target(*example.trie, example.negative, constraints);
    auto const n_pos = static_cast<double>(example.positive.size());
    auto const n_neg = static_cast<double>(example.negative.size());
    double pos = model.nll(example.context, pos_target) / n_pos;
    double neg = model.nll(example.context, neg_target) / n_neg;
    double loss = combine_losses(pos, neg, config);
    if (grad != nullptr) {
        bool active = config.margin + pos - neg > 0.0;
        double pos_weight = 1.0 + (active ? config.lambda_rank : 0.0);
        model.nll(example.context, pos_target, grad, weight * pos_weight / n_pos);
        if (active && config.lambda_rank != 0.0) {
            model.nll(example.context, neg_target, grad, -weight * config.lambda_rank / n_neg);
        }
    }
    return loss;
}

std::vector<TrainingExample> build_training_set(std::vector<TrainingInput> const &inputs, Qrels const &qrels,
                                                CorpusManifest const &manifest, TrainingSetReport *report,
                                                TrainingSetOptions const &options)
{
    TrainingSetReport local;
    std::vector<TrainingExample> out;
    for (auto const &in : inputs) {
        std::vector<std::uint32_t> pos;
        std::vector<std::uint32_t> neg;
        for (std::uint32_t c = 0; c < in.candidates.docs.size(); ++c) {
            auto grade = qrels.grade(in.relevance_key, in.candidates.docs[c].doc_id);
            if (grade > 0) {
                if (pos.size() < options.max_positive) {
                    pos.push_back(c);
                }
            } else if (neg.size() < options.max_negative) {
                neg.push_back(c);
            }
        }
        if (pos.empty()) {
            ++local.skipped_no_positive;
            continue;
        }
        if (neg.empty()) {
            ++local.skipped_no_negative;
            continue;
        }
        auto trie = std::make_shared<DecodingTrie const>(DecodingTrie::build(in.candidates, manifest));
        TrainingExample ex;
        ex.id = in.id;
        ex.context = in.context;
        ex.positive = generation_tokens(*trie, pos);
        ex.negative = generation_tokens(*trie, neg);
        ex.trie = std::move(trie);
        out.push_back(std::move(ex));
    }
    local.examples = out.size();
    if (report != nullptr) {
        *report = local;
    }
    return out;
}

TrainResult train(FusionModel &model, std::vector<TrainingExample> const &examples, TrainOptions const &options)
{
    if (examples.empty()) {
        throw DataError("no training examples");
    }
    auto const &loss_cfg = options.loss;
    if (loss_cfg.batch_size == 0 || !(loss_cfg.margin > 0.0) || loss_cfg.lambda_rank < 0.0
        || !(loss_cfg.learning_rate > 0.0)) {
        throw UsageError("invalid loss configuration (need batch >= 1, margin > 0, lambda >= 0, lr > 0)");
    }
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(examples.size());
    TrainResult result;
    auto grad = FusionParameters::zeros(model.params().dims());
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += loss_cfg.batch_size) {
            auto const end = std::min(order.size(), start + loss_cfg.batch_size);
            auto const weight = 1.0 / static_cast<double>(end - start);
            for (auto &[name, t] : grad.tensors()) {
                t->setZero();
            }
            for (std::size_t i = start; i < end; ++i) {
                auto const &ex = examples[order[i]];
                double loss = total_loss(ex, model, loss_cfg, options.constraints, &grad, weight);
                if (!std::isfinite(loss)) {
                    throw Error("non-finite loss on training example '" + ex.id + "' in epoch "
                                + std::to_string(epoch + 1));
                }
                epoch_sum += loss;
            }
            model.params().add_scaled(grad, -loss_cfg.learning_rate);
            if (!model.params().all_finite()) {
                throw Error("parameters became non-finite after a batch containing example '"
                            + examples[order[start]].id + "'");
            }
        }
        double mean = epoch_sum / static_cast<double>(examples.size());
        result.epoch_loss.push_back(mean);
        if (options.on_epoch) {
            options.on_epoch(epoch + 1, mean);
        }
    }
    model.params().round_to_float();
    return result;
}

void write_loss_curve(std::filesystem::path const &path, std::vector<double> const &epoch_loss)
{
    std::string out = "epoch,mean_loss\n";
    for (std::size_t i = 0; i < epoch_loss.size(); ++i) {
        out += std::to_string(i + 1) + "," + io::format_double(epoch_loss[i]) + "\n";
    }
    io::write_file_atomic(path, out);
}

} // namespace clarion
