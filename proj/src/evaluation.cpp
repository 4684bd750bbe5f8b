#include "clarion/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"

namespace clarion {

namespace {

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

long long parse_int(std::string_view s, std::string const &source, std::size_t line, char const *what)
{
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError(source, line, std::string("invalid ") + what + " '" + std::string(s) + "'");
    }
    return v;
}

std::map<std::string, int> const &empty_grades()
{
    static std::map<std::string, int> const kEmpty;
    return kEmpty;
}

/// Evaluation units paired with their qrels topic.
std::vector<std::pair<std::string, std::string>> units(Run const &run, Qrels const &qrels,
                                                       EvalOptions const &options)
{
    if (run.topics.empty()) {
        throw DataError("cannot evaluate an empty run");
    }
    std::vector<std::pair<std::string, std::string>> out;
    if (options.topic_key.empty()) {
        for (auto const &[topic, docs] : run.topics) {
            if (!qrels.grades.count(topic)) {
                throw DataError("run topic '" + topic + "' has no relevance judgments");
            }
        }
        for (auto const &[topic, grades] : qrels.grades) {
            out.emplace_back(topic, topic);
        }
        return out;
    }
    for (auto const &[topic, docs] : run.topics) {
        if (!options.topic_key.count(topic)) {
            throw DataError("run topic '" + topic + "' is not an evaluation unit");
        }
    }
    for (auto const &[unit, key] : options.topic_key) {
        out.emplace_back(unit, key);
    }
    return out;
}

std::vector<ScoredDoc> const &ranking_of(Run const &run, std::string const &topic)
{
    static std::vector<ScoredDoc> const kEmpty;
    auto it = run.topics.find(topic);
    return it == run.topics.end() ? kEmpty : it->second;
}

std::map<std::string, int> const &grades_of(Qrels const &qrels, std::string const &topic)
{
    auto it = qrels.grades.find(topic);
    return it == qrels.grades.end() ? empty_grades() : it->second;
}

template <typename Metric>
double mean_metric(Run const &run, Qrels const &qrels, EvalOptions const &options, Metric metric)
{
    auto u = units(run, qrels, options);
    if (u.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (auto const &[unit, key] : u) {
        sum += metric(ranking_of(run, unit), grades_of(qrels, key));
    }
    return sum / static_cast<double>(u.size());
}

int grade_in(std::map<std::string, int> const &grades, std::string const &doc)
{
    auto it = grades.find(doc);
    return it == grades.end() ? 0 : it->second;
}

std::string pad(std::string s, std::size_t width, bool left = false)
{
    if (s.size() < width) {
        s = left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
    }
    return s;
}

std::string fixed(double v, int digits = 4)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

} // namespace

int Qrels::grade(std::string const &topic, std::string const &doc) const
{
    return grade_in(grades_of(*this, topic), doc);
}

void Qrels::set(std::string const &topic, std::string const &doc, int grade)
{
    if (grade < 0) {
        grade = 0;
        ++clamped;
    }
    grades[topic][doc] = grade;
}

Qrels read_qrels(std::filesystem::path const &path)
{
    Qrels q;
    auto const source = path.string();
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        auto f = split_ws(line);
        if (f.empty()) {
            return;
        }
        if (f.size() != 4) {
            throw DataError(source, number, "expected 'topic iteration doc grade'");
        }
        auto grade = parse_int(f[3], source, number, "grade");
        std::string topic(f[0]);
        std::string doc(f[2]);
        auto &topic_grades = q.grades[topic];
        if (topic_grades.count(doc)) {
            throw DataError(source, number, "duplicate judgment for (" + topic + ", " + doc + ")");
        }
        q.set(topic, doc, static_cast<int>(grade));
    });
    return q;
}

void write_qrels(std::filesystem::path const &path, Qrels const &qrels)
{
    std::string out;
    for (auto const &[topic, grades] : qrels.grades) {
        for (auto const &[doc, grade] : grades) {
            out += topic + " 0 " + doc + " " + std::to_string(grade) + "\n";
        }
    }
    io::write_file_atomic(path, out);
}

void validate_run(Run const &run)
{
    for (auto const &[topic, docs] : run.topics) {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (!seen.insert(docs[i].doc_id).second) {
                throw DataError("run topic '" + topic + "' lists '" + docs[i].doc_id + "' twice");
            }
            if (i > 0 && docs[i].score > docs[i - 1].score) {
                throw DataError("run topic '" + topic + "' has increasing scores at rank " + std::to_string(i + 1));
            }
        }
    }
}

std::string format_run(Run const &run)
{
    validate_run(run);
    if (run.tag.empty() || run.tag.find_first_of(" \t\n") != std::string::npos) {
        throw UsageError("run tag must be a single nonempty word");
    }
    std::string out;
    for (auto const &[topic, docs] : run.topics) {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            out += topic;
            out += " Q0 ";
            out += docs[i].doc_id;
            out += ' ';
            out += std::to_string(i + 1);
            out += ' ';
            out += io::format_double(docs[i].score);
            out += ' ';
            out += run.tag;
            out += '\n';
        }
    }
    return out;
}

void write_run(std::filesystem::path const &path, Run const &run) { io::write_file_atomic(path, format_run(run)); }

Run read_run(std::filesystem::path const &path)
{
    Run run;
    run.tag.clear();
    auto const source = path.string();
    std::map<std::string, std::vector<std::pair<long long, ScoredDoc>>> rows;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        auto f = split_ws(line);
        if (f.size() != 6) {
            throw DataError(source, number, "expected 'topic Q0 doc rank score tag'");
        }
        auto rank = parse_int(f[3], source, number, "rank");
        double score = 0.0;
        try {
            score = io::parse_double(f[4]);
        } catch (std::exception const &) {
            throw DataError(source, number, "invalid score '" + std::string(f[4]) + "'");
        }
        if (run.tag.empty()) {
            run.tag = std::string(f[5]);
        }
        rows[std::string(f[0])].push_back({rank, {std::string(f[2]), score}});
    });
    if (run.tag.empty()) {
        run.tag = "clarion";
    }
    for (auto &[topic, list] : rows) {
        std::stable_sort(list.begin(), list.end(), [](auto const &a, auto const &b) { return a.first < b.first; });
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i].first == list[i - 1].first) {
                throw DataError(source + ": topic '" + topic + "' repeats rank " + std::to_string(list[i].first));
            }
        }
        auto &docs = run.topics[topic];
        for (auto &[rank, doc] : list) {
            docs.push_back(std::move(doc));
        }
    }
    try {
        validate_run(run);
    } catch (DataError const &e) {
        throw DataError(source + ": " + e.what());
    }
    return run;
}

double reciprocal_rank(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades,
                       int threshold)
{
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (grade_in(grades, ranking[i].doc_id) >= threshold) {
            return 1.0 / static_cast<double>(i + 1);
        }
    }
    return 0.0;
}

double precision(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades, std::size_t k,
                 int threshold)
{
    if (k == 0) {
        throw UsageError("precision cutoff must be at least 1");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
        if (grade_in(grades, ranking[i].doc_id) >= threshold) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

double ndcg(std::vector<ScoredDoc> const &ranking, std::map<std::string, int> const &grades, std::size_t k)
{
    if (k == 0) {
        throw UsageError("nDCG cutoff must be at least 1");
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
        dcg += grade_in(grades, ranking[i].doc_id) / std::log2(static_cast<double>(i + 2));
    }
    std::vector<int> ideal;
    for (auto const &[doc, g] : grades) {
        if (g > 0) {
            ideal.push_back(g);
        }
    }
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size() && i < k; ++i) {
        idcg += ideal[i] / std::log2(static_cast<double>(i + 2));
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr(Run const &run, Qrels const &qrels, EvalOptions const &options)
{
    return mean_metric(run, qrels, options, [&](auto const &r, auto const &g) {
        return reciprocal_rank(r, g, options.relevance_threshold);
    });
}

double precision_at(Run const &run, Qrels const &qrels, std::size_t k, EvalOptions const &options)
{
    return mean_metric(run, qrels, options,
                       [&](auto const &r, auto const &g) { return precision(r, g, k, options.relevance_threshold); });
}

double ndcg_at(Run const &run, Qrels const &qrels, std::size_t k)
{
    return ndcg_at(run, qrels, k, EvalOptions{});
}

double ndcg_at(Run const &run, Qrels const &qrels, std::size_t k, EvalOptions const &options)
{
    return mean_metric(run, qrels, options, [&](auto const &r, auto const &g) { return ndcg(r, g, k); });
}

MetricsReport evaluate(Run const &run, Qrels const &qrels, EvalOptions const &options)
{
    MetricsReport report;
    report.relevance_threshold = options.relevance_threshold;
    report.clamped_grades = qrels.clamped;
    auto u = units(run, qrels, options);
    report.topics = u.size();
    for (auto const *name : kMetricNames) {
        report.mean[name] = 0.0;
    }
    for (auto const &[unit, key] : u) {
        auto const &r = ranking_of(run, unit);
        auto const &g = grades_of(qrels, key);
        auto &m = report.per_topic[unit];
        m["MRR"] = reciprocal_rank(r, g, options.relevance_threshold);
        for (std::size_t k : {1, 3, 5}) {
            m["P@" + std::to_string(k)] = precision(r, g, k, options.relevance_threshold);
            m["nDCG@" + std::to_string(k)] = ndcg(r, g, k);
        }
        for (auto const &[name, v] : m) {
            report.mean[name] += v;
        }
    }
    if (!u.empty()) {
        for (auto &[name, v] : report.mean) {
            v /= static_cast<double>(u.size());
        }
    }
    return report;
}

nlohmann::json MetricsReport::to_json() const
{
    nlohmann::json j;
    j["topics"] = topics;
    j["relevance_threshold"] = relevance_threshold;
    j["clamped_negative_grades"] = clamped_grades;
    j["mean"] = mean;
    j["per_topic"] = per_topic;
    return j;
}

std::string MetricsReport::to_table() const
{
    std::string out = pad("metric", 8, true) + pad("mean", 10) + "\n";
    for (auto const *name : kMetricNames) {
        auto it = mean.find(name);
        out += pad(name, 8, true) + pad(fixed(it == mean.end() ? 0.0 : it->second), 10) + "\n";
    }
    out += "topics: " + std::to_string(topics) + ", relevant grade >= " + std::to_string(relevance_threshold);
    if (clamped_grades > 0) {
        out += ", clamped negative grades: " + std::to_string(clamped_grades);
    }
    out += "\n";
    return out;
}

MetricDelta metric_delta(double baseline, double system)
{
    MetricDelta d{baseline, system, system - baseline, 0.0};
    if (baseline != 0.0) {
        d.relative = (system - baseline) / baseline;
    } else if (system != 0.0) {
        d.relative = std::numeric_limits<double>::infinity();
    }
    return d;
}

CompareReport compare_runs(Run const &baseline, Run const &system, Qrels const &qrels, EvalOptions const &options)
{
    std::vector<std::string> missing;
    for (auto const &[topic, docs] : baseline.topics) {
        if (!system.topics.count(topic)) {
            missing.push_back(topic + " (system)");
        }
    }
    for (auto const &[topic, docs] : system.topics) {
        if (!baseline.topics.count(topic)) {
            missing.push_back(topic + " (baseline)");
        }
    }
    if (!missing.empty()) {
        std::string msg = "runs cover different topics; missing:";
        for (auto const &m : missing) {
            msg += " " + m;
        }
        throw DataError(msg);
    }
    auto base = evaluate(baseline, qrels, options);
    auto sys = evaluate(system, qrels, options);
    CompareReport report;
    report.topics = base.topics;
    for (auto const *name : kMetricNames) {
        report.metrics[name] = metric_delta(base.mean[name], sys.mean[name]);
    }
    return report;
}

nlohmann::json CompareReport::to_json() const
{
    nlohmann::json j;
    j["topics"] = topics;
    for (auto const &[name, d] : metrics) {
        j["metrics"][name] = {{"baseline", d.baseline},
                              {"system", d.system},
                              {"absolute", d.absolute},
                              {"relative", std::isfinite(d.relative) ? nlohmann::json(d.relative) : nlohmann::json()}};
    }
    return j;
}

std::string CompareReport::to_table() const
{
    std::string out = pad("metric", 8, true) + pad("baseline", 10) + pad("system", 10) + pad("abs", 10)
                      + pad("rel %", 10) + "\n";
    for (auto const *name : kMetricNames) {
        auto it = metrics.find(name);
        if (it == metrics.end()) {
            continue;
        }
        auto const &d = it->second;
        out += pad(name, 8, true) + pad(fixed(d.baseline), 10) + pad(fixed(d.system), 10)
               + pad((d.absolute >= 0 ? "+" : "") + fixed(d.absolute), 10)
               + pad(std::isfinite(d.relative) ? (d.relative >= 0 ? "+" : "") + fixed(100.0 * d.relative, 2) : "n/a",
                     10)
               + "\n";
    }
    return out;
}

} // namespace clarion
