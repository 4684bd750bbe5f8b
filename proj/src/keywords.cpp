#include "clarion/keywords.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "clarion/errors.hpp"
#include "clarion/text.hpp"

namespace clarion {

namespace {

struct TermStats {
    std::size_t tf = 0;
    std::size_t tf_upper = 0;
    std::size_t tf_acronym = 0;
    std::set<std::size_t> sentences;
    std::vector<std::string> left;
    std::vector<std::string> right;
};

struct Analysis {
    std::map<std::string, TermStats> terms;
    std::size_t sentence_count = 0;
};

std::size_t code_points(std::string const &s)
{
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

double median(std::set<std::size_t> const &values)
{
    std::vector<double> v(values.begin(), values.end());
    auto const n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double dispersion(std::vector<std::string> const &neighbours)
{
    if (neighbours.empty()) {
        return 0.0;
    }
    std::set<std::string> const distinct(neighbours.begin(), neighbours.end());
    return static_cast<double>(distinct.size()) / static_cast<double>(neighbours.size());
}

Analysis analyse(std::string_view raw)
{
    Analysis a;
    auto const sentences = text::segment(text::normalize(raw));
    a.sentence_count = sentences.size();
    for (std::size_t sid = 0; sid < sentences.size(); ++sid) {
        bool sentence_initial = true;
        for (auto const &chunk : sentences[sid].chunks) {
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                auto const &word = chunk[i];
                auto &st = a.terms[word.term];
                ++st.tf;
                st.sentences.insert(sid);
                if (text::is_acronym(word.surface)) {
                    ++st.tf_acronym;
                } else if (!sentence_initial && text::starts_upper(word.surface)) {
                    ++st.tf_upper;
                }
                sentence_initial = false;
                if (i > 0) {
                    auto const &prev = chunk[i - 1];
                    st.left.push_back(prev.term);
                    a.terms[prev.term].right.push_back(word.term);
                }
            }
        }
    }
    return a;
}

bool is_candidate(std::string const &term)
{
    if (code_points(term) < 3 || text::is_stopword(term)) {
        return false;
    }
    return std::none_of(term.begin(), term.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<TermFeatures> features_of(Analysis const &a)
{
    std::vector<std::string> candidates;
    std::size_t max_tf = 0;
    for (auto const &[term, st] : a.terms) {
        max_tf = std::max(max_tf, st.tf);
        if (is_candidate(term)) {
            candidates.push_back(term);
        }
    }
    if (candidates.empty()) {
        return {};
    }

    double mean = 0.0;
    for (auto const &t : candidates) {
        mean += static_cast<double>(a.terms.at(t).tf);
    }
    mean /= static_cast<double>(candidates.size());
    double var = 0.0;
    for (auto const &t : candidates) {
        double const d = static_cast<double>(a.terms.at(t).tf) - mean;
        var += d * d;
    }
    double const stddev = std::sqrt(var / static_cast<double>(candidates.size()));

    std::vector<TermFeatures> out;
    out.reserve(candidates.size());
    for (auto const &t : candidates) {
        auto const &st = a.terms.at(t);
        double const tf = static_cast<double>(st.tf);
        TermFeatures f;
        f.term = t;
        f.tf = st.tf;
        f.relatedness = 1.0
                        + (dispersion(st.left) + dispersion(st.right)) * tf
                              / static_cast<double>(max_tf);
        f.casing = static_cast<double>(std::max(st.tf_upper, st.tf_acronym)) / (1.0 + std::log(tf));
        f.position = std::log(std::log(3.0 + median(st.sentences)));
        f.frequency = tf / (mean + stddev);
        f.spread = static_cast<double>(st.sentences.size()) / static_cast<double>(a.sentence_count);
        f.term_score = (f.relatedness * f.position)
                       / (f.casing + f.frequency / f.relatedness + f.spread / f.relatedness);
        f.keyword_score = f.term_score / (tf * (1.0 + f.term_score));
        out.push_back(std::move(f));
    }
    std::sort(out.begin(), out.end(), [](TermFeatures const &x, TermFeatures const &y) {
        if (x.keyword_score != y.keyword_score) {
            return x.keyword_score < y.keyword_score;
        }
        return x.term < y.term;
    });
    return out;
}

} // namespace

std::vector<TermFeatures> keyword_feature_table(std::string_view text)
{
    return features_of(analyse(text));
}

std::vector<std::string> ranked_terms(std::string_view text)
{
    auto const a = analyse(text);
    std::vector<std::string> ranked;
    for (auto const &f : features_of(a)) {
        ranked.push_back(f.term);
    }
    std::vector<std::pair<std::size_t, std::string>> rest;
    for (auto const &[term, st] : a.terms) {
        if (!is_candidate(term)) {
            rest.emplace_back(st.tf, term);
        }
    }
    std::sort(rest.begin(), rest.end(), [](auto const &x, auto const &y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    for (auto &[tf, term] : rest) {
        ranked.push_back(std::move(term));
    }
    return ranked;
}

std::vector<std::string> extract_keywords(std::string_view text, std::size_t n)
{
    if (n == 0) {
        throw UsageError("extract_keywords: n must be at least 1");
    }
    auto ranked = ranked_terms(text);
    if (ranked.empty()) {
        throw DataError("extract_keywords: text has no terms to extract");
    }
    if (ranked.size() > n) {
        ranked.resize(n);
    }
    return ranked;
}

} // namespace clarion
