#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarion/lexical_index.hpp"

namespace clarion {

/// topic -> doc -> grade. Grades are clamped to >= 0 on read.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> grades;
    std::size_t clamped = 0;  ///< negative grades raised to 0 while reading

    [[nodiscard]] int grade(std::string const &topic, std::string const &doc) const;
    void set(std::string const &topic, std::string const &doc, int grade);
};

/// Whitespace-separated "topic iteration doc grade" lines.
Qrels read_qrels(std::filesystem::path const &path);
void write_qrels(std::filesystem::path const &path, Qrels const &qrels);

struct Run {
    std::string tag = "clarion";
    std::map<std::string, std::vector<ScoredDoc>> topics;  ///< rank order per topic
};

/// TREC six-column "topic Q0 doc rank score tag" lines; scores use the
/// shortest round-tripping decimal form, so write -> read -> write is
/// byte-identical.
std::string format_run(Run const &run);
void write_run(std::filesystem::path const &path, Run const &run);
Run read_run(std::filesystem::path const &path);
/// Throws DataError when a topic repeats a doc or scores increase with rank.
void validate_run(Run const &run);

struct EvalOptions {
    int relevance_threshold = 1;  ///< grade >= threshold counts as relevant for MRR and P@k
    /// Evaluation units mapped to their qrels topic (run topic -> qrels topic),
    /// e.g. conversation id -> facet id. When empty, the units are the qrels
    /// topics themselves.
    std::map<std::string, std::string> topic_key;
};

/// Mean over the evaluation units; units missing from the run score 0. Throws
/// DataError for an empty run or a run topic that is not an evaluation unit.
double mrr(Run const &run, Qrels const &qrels, EvalOptions const &options = {});
double precision_at(Run const &run, Qrels const &qrels, std::size_t k, EvalOptions const &options = {});
double ndcg_at(Run const &run, Qrels const &qrels, std::size_t k);
double ndcg_at(Run const &run, Qrels const &qrels, std::size_t k, EvalOptions const &options);

/// Per-topic values for one ranked list.
double reciprocal_rank(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades,
                       int threshold = 1);
double precision(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades, std::size_t k,
                 int threshold = 1);
double ndcg(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades, std::size_t k);

inline constexpr char const *kMetricNames[] = {"MRR", "P@1", "P@3", "P@5", "nDCG@1", "nDCG@3", "nDCG@5"};

struct MetricsReport {
    std::map<std::string, std::map<std::string, double>> per_topic;  ///< topic -> metric -> value
    std::map<std::string, double> mean;                              ///< metric -> value
    std::size_t topics = 0;
    std::size_t clamped_grades = 0;
    int relevance_threshold = 1;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_table() const;
};

MetricsReport evaluate(Run const &run, Qrels const &qrels, EvalOptions const &options = {});

struct MetricDelta {
    double baseline = 0.0;
    double system = 0.0;
    double absolute = 0.0;
    double relative = 0.0;  ///< (system - baseline) / baseline; 0 when both are 0
};

struct CompareReport {
    std::map<std::string, MetricDelta> metrics;
    std::size_t topics = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_table() const;
};

MetricDelta metric_delta(double baseline, double system);

/// Throws DataError listing topics present in one run but not the other.
CompareReport compare_runs(Run const &baseline, Run const &system, Qrels const &qrels,
                           EvalOptions const &options = {});

} // namespace clarion
