#pragma once

// Central finite-difference check of the fusion model's analytic gradient.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "clarion/fusion.hpp"
#include "clarion/training.hpp"
#include "decoder_oracles.hpp"
#include "support.hpp"

namespace clarion::testing {

struct GradCheckCase {
    FusionModel model;
    TrainingExample example;
    LossConfig loss;
};

/// Small random model and example. Weights are inflated beyond the usual
/// initialization so every tensor carries gradient.
inline GradCheckCase random_gradcheck_case(std::uint64_t seed)
{
    Gen gen(seed);
    std::size_t const alphabet = gen.uniform(3, 6);
    FusionDims dims{Vocabulary::kFirstTerm + alphabet, gen.uniform(2, 5), gen.coin(0.8) ? gen.uniform(1, 4) : 0,
                    gen.uniform(2, 5)};
    auto params = FusionParameters::random(dims, seed);
    for (auto &[name, t] : params.tensors()) {
        for (Eigen::Index i = 0; i < t->size(); ++i) {
            t->data()[i] += gen.real(-0.4, 0.4);
        }
    }
    auto const candidates = gen.uniform(2, 5);
    auto seqs = random_sequences(gen, candidates, alphabet, 1, 3);
    auto trie = std::make_shared<DecodingTrie const>(DecodingTrie::from_sequences(seqs));

    std::vector<std::uint32_t> order(candidates);
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), gen.engine());
    auto const split = gen.uniform(1, candidates - 1);
    std::vector<std::uint32_t> pos(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(split));
    std::vector<std::uint32_t> neg(order.begin() + static_cast<std::ptrdiff_t>(split), order.end());

    TrainingExample ex;
    ex.id = "grad-" + std::to_string(seed);
    auto const ctx_len = gen.uniform(1, 4);
    for (std::size_t i = 0; i < ctx_len; ++i) {
        ex.context.text.push_back(static_cast<TokenId>(gen.uniform(0, dims.vocab - 1)));
    }
    if (dims.image_dim > 0) {
        auto const images = gen.uniform(0, 3);
        for (std::size_t i = 0; i < images; ++i) {
            std::vector<float> v(dims.image_dim);
            for (auto &x : v) {
                x = static_cast<float>(gen.real(-1, 1));
            }
            ex.context.images.push_back(v);
        }
    }
    ex.positive = generation_tokens(*trie, pos);
    ex.negative = generation_tokens(*trie, neg);
    ex.trie = trie;

    LossConfig loss;
    loss.margin = gen.real(0.05, 3.0);
    loss.lambda_rank = gen.real(0.0, 1.5);
    return {FusionModel(std::move(params), seed), std::move(ex), loss};
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor) over every weight.
inline GradCheckResult gradient_check(GradCheckCase &c, double h = 1e-5, double floor = 1e-6)
{
    ConstraintOptions constraints;
    auto grad = FusionParameters::zeros(c.model.params().dims());
    total_loss(c.example, c.model, c.loss, constraints, &grad);

    GradCheckResult out;
    auto weights = c.model.params().tensors();
    auto analytic = grad.tensors();
    for (std::size_t t = 0; t < weights.size(); ++t) {
        auto &w = *weights[t].second;
        auto const &g = *analytic[t].second;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            double const keep = w.data()[i];
            w.data()[i] = keep + h;
            double const up = total_loss(c.example, c.model, c.loss, constraints, nullptr);
            w.data()[i] = keep - h;
            double const down = total_loss(c.example, c.model, c.loss, constraints, nullptr);
            w.data()[i] = keep;
            double const numeric = (up - down) / (2 * h);
            double const a = g.data()[i];
            double const denom = std::max({std::abs(a), std::abs(numeric), floor});
            out.max_relative_error = std::max(out.max_relative_error, std::abs(a - numeric) / denom);
            ++out.checked;
        }
    }
    return out;
}

} // namespace clarion::testing
