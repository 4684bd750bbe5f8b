#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "clarion/scorer.hpp"

namespace clarion {

struct FusionDims {
    std::size_t vocab = 0;
    std::size_t dim = 64;
    std::size_t image_dim = 0;
    std::size_t hidden = 64;

    friend bool operator==(FusionDims const &, FusionDims const &) = default;
};

/// Weights of the compact fusion scorer. Row-vector convention: a token row
/// x (1 x dim) is projected as x * Wq.
struct FusionParameters {
    Eigen::MatrixXd embed;     ///< vocab x dim, also the output projection
    Eigen::MatrixXd segment;   ///< 2 x dim: context rows, generated rows
    Eigen::MatrixXd image;     ///< image_dim x dim (W)
    Eigen::MatrixXd wq, wk, wv, wo;  ///< dim x dim
    Eigen::MatrixXd w1;        ///< dim x hidden
    Eigen::MatrixXd b1;        ///< 1 x hidden
    Eigen::MatrixXd w2;        ///< hidden x dim
    Eigen::MatrixXd b2;        ///< 1 x dim
    Eigen::MatrixXd out_bias;  ///< 1 x vocab

    static FusionParameters zeros(FusionDims const &dims);
    static FusionParameters random(FusionDims const &dims, std::uint64_t seed);

    [[nodiscard]] FusionDims dims() const;
    /// Named tensors in checkpoint order.
    std::vector<std::pair<char const *, Eigen::MatrixXd *>> tensors();
    std::vector<std::pair<char const *, Eigen::MatrixXd const *>> tensors() const;

    void add_scaled(FusionParameters const &other, double scale);
    [[nodiscard]] bool all_finite() const;
    /// Rounds every weight to the nearest float, matching checkpoint precision.
    void round_to_float();
};

/// One supervised sequence: the target tokens and the allowed set at each
/// step (the trie mask).
struct MaskedTarget {
    std::vector<TokenId> tokens;
    std::vector<std::vector<TokenId>> allowed;
};

/// Single-layer causal attention scorer over [context ; SEP ; generated]
/// token rows. Image features are projected by W and attended through a
/// second attention branch that shares the query, so a zero projection (or no
/// images) leaves the text path unchanged. Logits are tied to the token
/// embedding.
class FusionModel final : public Scorer {
  public:
    FusionModel(FusionParameters params, std::uint64_t seed = 0);
    static FusionModel create(FusionDims const &dims, std::uint64_t seed);

    [[nodiscard]] std::size_t vocab_size() const override { return static_cast<std::size_t>(params_.embed.rows()); }
    std::unique_ptr<ScorerSession> start(ScorerContext const &context) const override;

    /// Negative log-likelihood (summed over steps) of `target` under the
    /// masked softmax. When `grad` is set, adds `weight` * d(nll)/d(params).
    double nll(ScorerContext const &context, MaskedTarget const &target, FusionParameters *grad = nullptr,
               double weight = 1.0) const;

    [[nodiscard]] FusionParameters const &params() const noexcept { return params_; }
    FusionParameters &params() noexcept { return params_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// Binary checkpoint: one JSON header line (dims, vocab hash, seed,
    /// tensor shapes) followed by little-endian f32 tensors.
    void save(std::filesystem::path const &path, std::uint64_t vocab_hash) const;
    /// Throws DataError on malformed files or when `expected_vocab_hash` is
    /// nonzero and differs from the stored hash.
    static FusionModel load(std::filesystem::path const &path, std::uint64_t expected_vocab_hash = 0);

    /// Throws DataError when an image vector does not match image_dim.
    void check_context(ScorerContext const &context) const;

  private:
    FusionParameters params_;
    std::uint64_t seed_;
};

} // namespace clarion
