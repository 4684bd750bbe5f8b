#include "clarion/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"

namespace clarion {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

constexpr char const *kFormat = "clarion-fusion";
constexpr int kVersion = 1;

/// Portable normal draws (Box-Muller over raw 64-bit output).
class Gaussian {
  public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double operator()()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        } while (u1 <= 0.0);
        double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

void fill(MatrixXd &m, Gaussian &g, double stddev)
{
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = stddev * g();
    }
}

/// Row-wise softmax over the first `limit(i)` columns; the rest become 0.
template <typename Limit>
MatrixXd causal_softmax(MatrixXd const &scores, Limit limit)
{
    MatrixXd out = MatrixXd::Zero(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index n = limit(i);
        double top = scores.row(i).head(n).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = std::exp(scores(i, j) - top);
            sum += out(i, j);
        }
        out.row(i).head(n) /= sum;
    }
    return out;
}

/// d(softmax)/d(scores) applied to the upstream gradient, row by row.
MatrixXd softmax_backward(MatrixXd const &probs, MatrixXd const &dprobs)
{
    MatrixXd out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        double dot = probs.row(i).dot(dprobs.row(i));
        out.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
    }
    return out;
}

MatrixXd image_matrix(ScorerContext const &context, std::size_t image_dim)
{
    MatrixXd z(static_cast<Eigen::Index>(context.images.size()), static_cast<Eigen::Index>(image_dim));
    for (std::size_t m = 0; m < context.images.size(); ++m) {
        for (std::size_t k = 0; k < image_dim; ++k) {
            z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = context.images[m][k];
        }
    }
    return z;
}

RowVectorXd relu(RowVectorXd const &v) { return v.cwiseMax(0.0); }

class FusionSession final : public ScorerSession {
  public:
    FusionSession(FusionParameters const &p, ScorerContext const &context) : p_(p)
    {
        auto const d = p.embed.cols();
        scale_ = 1.0 / std::sqrt(static_cast<double>(d));
        auto const lc = static_cast<Eigen::Index>(context.text.size());
        MatrixXd xc(lc, d);
        for (Eigen::Index i = 0; i < lc; ++i) {
            xc.row(i) = p.embed.row(context.text[static_cast<std::size_t>(i)]) + p.segment.row(0);
        }
        kc_ = xc * p.wk;
        vc_ = xc * p.wv;
        if (!context.images.empty()) {
            MatrixXd proj = image_matrix(context, static_cast<std::size_t>(p.image.rows())) * p.image;
            ki_ = proj * p.wk;
            vi_ = proj * p.wv;
        }
    }

    std::vector<double> next(std::span<TokenId const> prefix) override
    {
        auto const d = p_.embed.cols();
        auto const lc = kc_.rows();
        auto const lg = static_cast<Eigen::Index>(prefix.size()) + 1;
        MatrixXd k(lc + lg, d);
        MatrixXd v(lc + lg, d);
        k.topRows(lc) = kc_;
        v.topRows(lc) = vc_;
        for (Eigen::Index t = 0; t < lg; ++t) {
            TokenId tok = t == 0 ? Vocabulary::kSep : prefix[static_cast<std::size_t>(t - 1)];
            auto const &rows = generated_rows(tok);
            k.row(lc + t) = rows.k;
            v.row(lc + t) = rows.v;
        }
        TokenId last = prefix.empty() ? Vocabulary::kSep : prefix.back();
        RowVectorXd x = p_.embed.row(last) + p_.segment.row(1);
        RowVectorXd q = x * p_.wq;

        RowVectorXd u = attend(q, k, v);
        if (ki_.rows() > 0) {
            u += attend(q, ki_, vi_);
        }
        RowVectorXd h = x + u * p_.wo;
        RowVectorXd r = relu(h * p_.w1 + p_.b1);
        RowVectorXd h2 = h + r * p_.w2 + p_.b2;
        RowVectorXd logits = h2 * p_.embed.transpose() + p_.out_bias;
        return {logits.data(), logits.data() + logits.size()};
    }

  private:
    struct Rows {
        RowVectorXd k;
        RowVectorXd v;
    };

    Rows const &generated_rows(TokenId tok)
    {
        auto it = cache_.find(tok);
        if (it == cache_.end()) {
            RowVectorXd x = p_.embed.row(tok) + p_.segment.row(1);
            it = cache_.emplace(tok, Rows{x * p_.wk, x * p_.wv}).first;
        }
        return it->second;
    }

    RowVectorXd attend(RowVectorXd const &q, MatrixXd const &k, MatrixXd const &v) const
    {
        RowVectorXd s = (q * k.transpose()) * scale_;
        double top = s.maxCoeff();
        RowVectorXd w = (s.array() - top).exp();
        w /= w.sum();
        return w * v;
    }

    FusionParameters const &p_;
    double scale_ = 1.0;
    MatrixXd kc_, vc_, ki_, vi_;
    std::unordered_map<TokenId, Rows> cache_;
};

} // namespace

FusionParameters FusionParameters::zeros(FusionDims const &dims)
{
    auto v = static_cast<Eigen::Index>(dims.vocab);
    auto d = static_cast<Eigen::Index>(dims.dim);
    auto di = static_cast<Eigen::Index>(dims.image_dim);
    auto h = static_cast<Eigen::Index>(dims.hidden);
    FusionParameters p;
    p.embed = MatrixXd::Zero(v, d);
    p.segment = MatrixXd::Zero(2, d);
    p.image = MatrixXd::Zero(di, d);
    p.wq = MatrixXd::Zero(d, d);
    p.wk = MatrixXd::Zero(d, d);
    p.wv = MatrixXd::Zero(d, d);
    p.wo = MatrixXd::Zero(d, d);
    p.w1 = MatrixXd::Zero(d, h);
    p.b1 = MatrixXd::Zero(1, h);
    p.w2 = MatrixXd::Zero(h, d);
    p.b2 = MatrixXd::Zero(1, d);
    p.out_bias = MatrixXd::Zero(1, v);
    return p;
}

FusionParameters FusionParameters::random(FusionDims const &dims, std::uint64_t seed)
{
    if (dims.vocab < Vocabulary::kFirstTerm || dims.dim == 0 || dims.hidden == 0) {
        throw UsageError("fusion model needs a vocabulary beyond the reserved tokens and nonzero widths");
    }
    auto p = zeros(dims);
    Gaussian g(seed);
    auto const d = static_cast<double>(dims.dim);
    fill(p.embed, g, 0.3);
    fill(p.segment, g, 0.1);
    if (dims.image_dim > 0) {
        fill(p.image, g, 0.1 / std::sqrt(static_cast<double>(dims.image_dim)));
    }
    fill(p.wq, g, 0.1 / std::sqrt(d));
    fill(p.wk, g, 0.1 / std::sqrt(d));
    fill(p.wv, g, 0.02);
    fill(p.wo, g, 0.02);
    p.wv += MatrixXd::Identity(p.wv.rows(), p.wv.cols());
    p.wo += MatrixXd::Identity(p.wo.rows(), p.wo.cols());
    fill(p.w1, g, 0.1 / std::sqrt(d));
    fill(p.w2, g, 0.1 / std::sqrt(static_cast<double>(dims.hidden)));
    return p;
}

FusionDims FusionParameters::dims() const
{
    return {static_cast<std::size_t>(embed.rows()), static_cast<std::size_t>(embed.cols()),
            static_cast<std::size_t>(image.rows()), static_cast<std::size_t>(w1.cols())};
}

std::vector<std::pair<char const *, Eigen::MatrixXd *>> FusionParameters::tensors()
{
    return {{"embed", &embed}, {"segment", &segment}, {"image", &image}, {"wq", &wq},  {"wk", &wk},
            {"wv", &wv},       {"wo", &wo},           {"w1", &w1},       {"b1", &b1},  {"w2", &w2},
            {"b2", &b2},       {"out_bias", &out_bias}};
}

std::vector<std::pair<char const *, Eigen::MatrixXd const *>> FusionParameters::tensors() const
{
    std::vector<std::pair<char const *, Eigen::MatrixXd const *>> out;
    for (auto [name, ptr] : const_cast<FusionParameters *>(this)->tensors()) {
        out.emplace_back(name, ptr);
    }
    return out;
}

void FusionParameters::add_scaled(FusionParameters const &other, double scale)
{
    auto mine = tensors();
    auto theirs = other.tensors();
    for (std::size_t i = 0; i < mine.size(); ++i) {
        *mine[i].second += scale * *theirs[i].second;
    }
}

bool FusionParameters::all_finite() const
{
    for (auto const &[name, t] : tensors()) {
        if (!t->allFinite()) {
            return false;
        }
    }
    return true;
}

void FusionParameters::round_to_float()
{
    for (auto &[name, t] : tensors()) {
        *t = t->cast<float>().cast<double>();
    }
}

FusionModel::FusionModel(FusionParameters params, std::uint64_t seed) : params_(std::move(params)), seed_(seed)
{
    auto d = params_.dims();
    auto check = [](bool ok, char const *what) {
        if (!ok) {
            throw DataError(std::string("inconsistent fusion parameters: ") + what);
        }
    };
    check(d.vocab >= Vocabulary::kFirstTerm && d.dim > 0 && d.hidden > 0, "empty dimensions");
    check(params_.segment.rows() == 2 && params_.segment.cols() == params_.embed.cols(), "segment");
    check(params_.image.cols() == params_.embed.cols(), "image projection");
    for (auto const *m : {&params_.wq, &params_.wk, &params_.wv, &params_.wo}) {
        check(m->rows() == params_.embed.cols() && m->cols() == params_.embed.cols(), "attention");
    }
    check(params_.w1.rows() == params_.embed.cols() && params_.b1.rows() == 1 && params_.b1.cols() == params_.w1.cols(),
          "feed-forward input");
    check(params_.w2.rows() == params_.w1.cols() && params_.w2.cols() == params_.embed.cols()
              && params_.b2.rows() == 1 && params_.b2.cols() == params_.embed.cols(),
          "feed-forward output");
    check(params_.out_bias.rows() == 1 && params_.out_bias.cols() == params_.embed.rows(), "output bias");
    check(params_.all_finite(), "non-finite weight");
}

FusionModel FusionModel::create(FusionDims const &dims, std::uint64_t seed)
{
    return FusionModel(FusionParameters::random(dims, seed), seed);
}

void FusionModel::check_context(ScorerContext const &context) const
{
    auto const vocab = vocab_size();
    for (auto tok : context.text) {
        if (tok >= vocab) {
            throw DataError("context token " + std::to_string(tok) + " outside the scorer vocabulary");
        }
    }
    auto const di = static_cast<std::size_t>(params_.image.rows());
    for (std::size_t m = 0; m < context.images.size(); ++m) {
        if (context.images[m].size() != di) {
            throw DataError("image feature " + std::to_string(m) + " has dimension "
                            + std::to_string(context.images[m].size()) + " but the projection expects "
                            + std::to_string(di));
        }
    }
}

std::unique_ptr<ScorerSession> FusionModel::start(ScorerContext const &context) const
{
    check_context(context);
    return std::make_unique<FusionSession>(params_, context);
}

double FusionModel::nll(ScorerContext const &context, MaskedTarget const &target, FusionParameters *grad,
                        double weight) const
{
    check_context(context);
    auto const &p = params_;
    auto const T = static_cast<Eigen::Index>(target.tokens.size());
    if (T == 0 || target.allowed.size() != target.tokens.size()) {
        throw DataError("masked target needs one allowed set per token");
    }
    auto const vocab = vocab_size();
    for (Eigen::Index t = 0; t < T; ++t) {
        auto const &allowed = target.allowed[static_cast<std::size_t>(t)];
        auto tok = target.tokens[static_cast<std::size_t>(t)];
        if (std::find(allowed.begin(), allowed.end(), tok) == allowed.end()) {
            throw DataError("target token " + std::to_string(tok) + " is outside the allowed set at step "
                            + std::to_string(t));
        }
        if (tok >= vocab) {
            throw DataError("target token outside the scorer vocabulary");
        }
    }

    auto const d = p.embed.cols();
    double const scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto const lc = static_cast<Eigen::Index>(context.text.size());
    auto const L = lc + T;

    // Row tokens and segments: context, then SEP, then target[0..T-2].
    std::vector<TokenId> row_tok(static_cast<std::size_t>(L));
    std::vector<int> row_seg(static_cast<std::size_t>(L));
    for (Eigen::Index i = 0; i < lc; ++i) {
        row_tok[static_cast<std::size_t>(i)] = context.text[static_cast<std::size_t>(i)];
        row_seg[static_cast<std::size_t>(i)] = 0;
    }
    for (Eigen::Index t = 0; t < T; ++t) {
        row_tok[static_cast<std::size_t>(lc + t)] = t == 0 ? Vocabulary::kSep : target.tokens[static_cast<std::size_t>(t - 1)];
        row_seg[static_cast<std::size_t>(lc + t)] = 1;
    }
    MatrixXd X(L, d);
    for (Eigen::Index i = 0; i < L; ++i) {
        X.row(i) = p.embed.row(row_tok[static_cast<std::size_t>(i)]) + p.segment.row(row_seg[static_cast<std::size_t>(i)]);
    }
    MatrixXd Xp = X.bottomRows(T);
    MatrixXd Q = Xp * p.wq;
    MatrixXd K = X * p.wk;
    MatrixXd V = X * p.wv;
    MatrixXd alpha = causal_softmax((Q * K.transpose()) * scale, [&](Eigen::Index t) { return lc + t + 1; });
    MatrixXd U = alpha * V;

    bool const has_images = !context.images.empty();
    MatrixXd Z, P, Ki, Vi, beta;
    if (has_images) {
        Z = image_matrix(context, static_cast<std::size_t>(p.image.rows()));
        P = Z * p.image;
        Ki = P * p.wk;
        Vi = P * p.wv;
        beta = causal_softmax((Q * Ki.transpose()) * scale, [&](Eigen::Index) { return Ki.rows(); });
        U += beta * Vi;
    }
    MatrixXd H = Xp + U * p.wo;
    MatrixXd G = (H * p.w1).rowwise() + p.b1.row(0);
    MatrixXd R = G.cwiseMax(0.0);
    MatrixXd H2 = H + R * p.w2;
    H2.rowwise() += p.b2.row(0);
    MatrixXd logits = H2 * p.embed.transpose();
    logits.rowwise() += p.out_bias.row(0);

    double loss = 0.0;
    MatrixXd dlogits;
    if (grad != nullptr) {
        dlogits = MatrixXd::Zero(T, logits.cols());
    }
    for (Eigen::Index t = 0; t < T; ++t) {
        auto const &allowed = target.allowed[static_cast<std::size_t>(t)];
        auto tok = target.tokens[static_cast<std::size_t>(t)];
        double top = -std::numeric_limits<double>::infinity();
        for (auto a : allowed) {
            top = std::max(top, logits(t, a));
        }
        double sum = 0.0;
        for (auto a : allowed) {
            sum += std::exp(logits(t, a) - top);
        }
        double log_z = top + std::log(sum);
        loss += log_z - logits(t, tok);
        if (grad != nullptr) {
            for (auto a : allowed) {
                dlogits(t, a) = weight * std::exp(logits(t, a) - log_z);
            }
            dlogits(t, tok) -= weight;
        }
    }
    if (grad == nullptr) {
        return loss;
    }

    auto &g = *grad;
    g.out_bias.row(0) += dlogits.colwise().sum();
    g.embed += dlogits.transpose() * H2;
    MatrixXd dH2 = dlogits * p.embed;
    MatrixXd dR = dH2 * p.w2.transpose();
    g.w2 += R.transpose() * dH2;
    g.b2.row(0) += dH2.colwise().sum();
    MatrixXd dG = dR.array() * (G.array() > 0.0).cast<double>();
    g.w1 += H.transpose() * dG;
    g.b1.row(0) += dG.colwise().sum();
    MatrixXd dH = dH2 + dG * p.w1.transpose();

    MatrixXd dXp = dH;
    MatrixXd dU = dH * p.wo.transpose();
    g.wo += U.transpose() * dH;

    MatrixXd dV = alpha.transpose() * dU;
    MatrixXd dS = softmax_backward(alpha, dU * V.transpose()) * scale;
    MatrixXd dQ = dS * K;
    MatrixXd dK = dS.transpose() * Q;
    if (has_images) {
        MatrixXd dVi = beta.transpose() * dU;
        MatrixXd dSi = softmax_backward(beta, dU * Vi.transpose()) * scale;
        dQ += dSi * Ki;
        MatrixXd dKi = dSi.transpose() * Q;
        g.wk += P.transpose() * dKi;
        g.wv += P.transpose() * dVi;
        MatrixXd dP = dKi * p.wk.transpose() + dVi * p.wv.transpose();
        g.image += Z.transpose() * dP;
    }
    g.wq += Xp.transpose() * dQ;
    dXp += dQ * p.wq.transpose();
    g.wk += X.transpose() * dK;
    g.wv += X.transpose() * dV;
    MatrixXd dX = dK * p.wk.transpose() + dV * p.wv.transpose();
    dX.bottomRows(T) += dXp;
    for (Eigen::Index i = 0; i < L; ++i) {
        g.embed.row(row_tok[static_cast<std::size_t>(i)]) += dX.row(i);
        g.segment.row(row_seg[static_cast<std::size_t>(i)]) += dX.row(i);
    }
    return loss;
}

void FusionModel::save(std::filesystem::path const &path, std::uint64_t vocab_hash) const
{
    auto dims = params_.dims();
    nlohmann::json header = {
        {"format", kFormat},
        {"version", kVersion},
        {"vocab", dims.vocab},
        {"dim", dims.dim},
        {"image_dim", dims.image_dim},
        {"hidden", dims.hidden},
        {"vocab_hash", vocab_hash},
        {"seed", seed_},
        {"dtype", "f32le"},
    };
    auto &shapes = header["tensors"] = nlohmann::json::array();
    for (auto const &[name, t] : params_.tensors()) {
        shapes.push_back({{"name", name}, {"rows", t->rows()}, {"cols", t->cols()}});
    }
    std::string out = header.dump() + '\n';
    for (auto const &[name, t] : params_.tensors()) {
        // Row-major f32 little-endian.
        for (Eigen::Index r = 0; r < t->rows(); ++r) {
            for (Eigen::Index c = 0; c < t->cols(); ++c) {
                auto bits = std::bit_cast<std::uint32_t>(static_cast<float>((*t)(r, c)));
                for (int b = 0; b < 4; ++b) {
                    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
                }
            }
        }
    }
    io::write_file_atomic(path, out);
}

FusionModel FusionModel::load(std::filesystem::path const &path, std::uint64_t expected_vocab_hash)
{
    auto const data = io::read_file(path);
    auto const source = path.string();
    auto nl = data.find('\n');
    if (nl == std::string::npos) {
        throw DataError(source, 1, "checkpoint header is not terminated");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(data.substr(0, nl));
    } catch (nlohmann::json::exception const &e) {
        throw DataError(source, 1, std::string("invalid checkpoint header: ") + e.what());
    }
    FusionDims dims;
    std::uint64_t vocab_hash = 0;
    std::uint64_t seed = 0;
    try {
        if (header.at("format").get<std::string>() != kFormat || header.at("version").get<int>() != kVersion) {
            throw DataError(source, 1, "not a version-1 fusion checkpoint");
        }
        dims.vocab = header.at("vocab").get<std::size_t>();
        dims.dim = header.at("dim").get<std::size_t>();
        dims.image_dim = header.at("image_dim").get<std::size_t>();
        dims.hidden = header.at("hidden").get<std::size_t>();
        vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
        seed = header.at("seed").get<std::uint64_t>();
    } catch (nlohmann::json::exception const &e) {
        throw DataError(source, 1, std::string("invalid checkpoint header: ") + e.what());
    }
    if (expected_vocab_hash != 0 && vocab_hash != expected_vocab_hash) {
        throw DataError(source + ": checkpoint was trained on a different vocabulary");
    }
    auto params = FusionParameters::zeros(dims);
    std::size_t offset = nl + 1;
    auto shapes = header.value("tensors", nlohmann::json::array());
    auto tensors = params.tensors();
    if (shapes.size() != tensors.size()) {
        throw DataError(source, 1, "unexpected tensor count");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto &[name, t] = tensors[i];
        if (shapes[i].value("name", "") != name || shapes[i].value("rows", -1) != t->rows()
            || shapes[i].value("cols", -1) != t->cols()) {
            throw DataError(source, 1, std::string("tensor '") + name + "' has an unexpected shape");
        }
        auto bytes = static_cast<std::size_t>(t->size()) * 4;
        if (offset + bytes > data.size()) {
            throw DataError(source + ": checkpoint is truncated in tensor '" + name + "'");
        }
        for (Eigen::Index r = 0; r < t->rows(); ++r) {
            for (Eigen::Index c = 0; c < t->cols(); ++c) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) {
                    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset++])) << (8 * b);
                }
                (*t)(r, c) = std::bit_cast<float>(bits);
            }
        }
    }
    if (offset != data.size()) {
        throw DataError(source + ": trailing bytes after the last tensor");
    }
    return FusionModel(std::move(params), seed);
}

} // namespace clarion
