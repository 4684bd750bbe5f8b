#include "clarion/conversation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clarion/errors.hpp"
#include "clarion/io.hpp"
#include "clarion/remote.hpp"
#include "clarion/text.hpp"

namespace clarion {

using nlohmann::json;

namespace {

constexpr std::string_view kNegators[] = {"no", "not", "never", "don't", "doesn't"};

bool is_negator(std::string const &term)
{
    return std::find(std::begin(kNegators), std::end(kNegators), term) != std::end(kNegators);
}

std::vector<std::string> content_terms(std::string_view s)
{
    std::vector<std::string> out;
    for (auto &t : text::tokenize(text::normalize(s))) {
        if (!text::is_stopword(t) && !is_negator(t)) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::string string_field(json const &obj, char const *key, std::string const &source, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw DataError(source, line, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
}

bool blank(std::string const &s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

} // namespace

Facet const *Topic::find_facet(std::string const &facet_id) const
{
    auto it = std::find_if(facets.begin(), facets.end(),
                           [&](Facet const &f) { return f.facet_id == facet_id; });
    return it == facets.end() ? nullptr : &*it;
}

void TopicCatalog::add(Topic topic)
{
    if (topic.topic_id.empty()) {
        throw DataError("topic with empty topic_id");
    }
    if (topic.facets.empty()) {
        throw DataError("topic '" + topic.topic_id + "' has no facets");
    }
    for (auto const &f : topic.facets) {
        if (blank(f.description)) {
            throw DataError("facet '" + f.facet_id + "' of topic '" + topic.topic_id
                            + "' has an empty description");
        }
    }
    auto id = topic.topic_id;
    if (!topics_.emplace(id, std::move(topic)).second) {
        throw DataError("duplicate topic_id '" + id + "'");
    }
}

Topic const *TopicCatalog::find(std::string const &topic_id) const
{
    auto it = topics_.find(topic_id);
    return it == topics_.end() ? nullptr : &it->second;
}

Topic const &TopicCatalog::get(std::string const &topic_id) const
{
    if (auto const *t = find(topic_id)) {
        return *t;
    }
    throw DataError("unknown topic_id '" + topic_id + "'");
}

Facet const &TopicCatalog::facet(std::string const &topic_id, std::string const &facet_id) const
{
    if (auto const *f = get(topic_id).find_facet(facet_id)) {
        return *f;
    }
    throw DataError("topic '" + topic_id + "' has no facet '" + facet_id + "'");
}

TopicCatalog TopicCatalog::load(std::filesystem::path const &path)
{
    TopicCatalog catalog;
    auto const source = path.string();
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        json obj;
        try {
            obj = json::parse(line);
        } catch (json::parse_error const &e) {
            throw DataError(source, number, std::string("invalid JSON: ") + e.what());
        }
        Topic topic;
        topic.topic_id = string_field(obj, "topic_id", source, number);
        topic.query = string_field(obj, "query", source, number);
        auto it = obj.find("facets");
        if (it == obj.end() || !it->is_array()) {
            throw DataError(source, number, "missing array field 'facets'");
        }
        for (auto const &f : *it) {
            topic.facets.push_back({string_field(f, "facet_id", source, number),
                                    string_field(f, "description", source, number)});
        }
        try {
            catalog.add(std::move(topic));
        } catch (DataError const &e) {
            throw DataError(source, number, e.what());
        }
    });
    return catalog;
}

void TopicCatalog::save(std::filesystem::path const &path) const
{
    std::string out;
    for (auto const &[id, topic] : topics_) {
        json facets = json::array();
        for (auto const &f : topic.facets) {
            facets.push_back({{"facet_id", f.facet_id}, {"description", f.description}});
        }
        out += json{{"topic_id", topic.topic_id}, {"query", topic.query}, {"facets", facets}}.dump();
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

void validate(Conversation const &c, TopicCatalog const *catalog)
{
    if (c.turns.empty() || c.turns.size() > Conversation::kMaxTurns) {
        throw DataError("conversation '" + c.conversation_id + "' has " + std::to_string(c.turns.size())
                        + " turns; expected 1 to " + std::to_string(Conversation::kMaxTurns));
    }
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
        if (blank(c.turns[i].question) || blank(c.turns[i].answer)) {
            throw DataError("conversation '" + c.conversation_id + "' turn " + std::to_string(i + 1)
                            + " has an empty question or answer");
        }
    }
    if (catalog != nullptr) {
        auto const *topic = catalog->find(c.topic_id);
        if (topic == nullptr) {
            throw DataError("conversation '" + c.conversation_id + "' references unknown topic '"
                            + c.topic_id + "'");
        }
        if (topic->find_facet(c.facet_id) == nullptr) {
            throw DataError("conversation '" + c.conversation_id + "' references unknown facet '"
                            + c.facet_id + "' of topic '" + c.topic_id + "'");
        }
    }
}

std::vector<Conversation> load_conversations(std::filesystem::path const &path, TopicCatalog const *catalog)
{
    std::vector<Conversation> out;
    auto const source = path.string();
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        json obj;
        try {
            obj = json::parse(line);
        } catch (json::parse_error const &e) {
            throw DataError(source, number, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw DataError(source, number, "expected a JSON object");
        }
        Conversation c;
        c.topic_id = string_field(obj, "topic_id", source, number);
        c.facet_id = string_field(obj, "facet_id", source, number);
        if (obj.contains("conversation_id")) {
            c.conversation_id = string_field(obj, "conversation_id", source, number);
        } else {
            c.conversation_id = c.facet_id + "@" + std::to_string(number);
        }
        auto turns = obj.find("turns");
        if (turns == obj.end() || !turns->is_array()) {
            throw DataError(source, number, "missing array field 'turns'");
        }
        for (auto const &t : *turns) {
            Turn turn;
            turn.question = string_field(t, "question", source, number);
            turn.answer = string_field(t, "answer", source, number);
            if (auto refs = t.find("image_refs"); refs != t.end()) {
                if (!refs->is_array()) {
                    throw DataError(source, number, "field 'image_refs' must be an array");
                }
                for (auto const &r : *refs) {
                    if (!r.is_string()) {
                        throw DataError(source, number, "image_refs entries must be strings");
                    }
                    turn.image_refs.push_back(r.get<std::string>());
                }
            }
            c.turns.push_back(std::move(turn));
        }
        try {
            validate(c, catalog);
        } catch (DataError const &e) {
            throw DataError(source, number, e.what());
        }
        out.push_back(std::move(c));
    });
    return out;
}

std::string conversation_to_json_line(Conversation const &c)
{
    json turns = json::array();
    for (auto const &t : c.turns) {
        turns.push_back({{"question", t.question}, {"image_refs", t.image_refs}, {"answer", t.answer}});
    }
    return json{{"conversation_id", c.conversation_id},
                {"topic_id", c.topic_id},
                {"facet_id", c.facet_id},
                {"turns", turns}}
        .dump();
}

void save_conversations(std::filesystem::path const &path, std::span<Conversation const> conversations)
{
    std::string out;
    for (auto const &c : conversations) {
        out += conversation_to_json_line(c);
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

ImageFeatureStore::ImageFeatureStore(std::size_t dim, std::string provenance)
    : dim_(dim), provenance_(std::move(provenance))
{
}

void ImageFeatureStore::add(std::string image_id, std::vector<float> vector)
{
    if (vector.size() != dim_) {
        throw DataError("image '" + image_id + "' has dimension " + std::to_string(vector.size())
                        + ", store expects " + std::to_string(dim_));
    }
    if (std::any_of(vector.begin(), vector.end(), [](float v) { return !std::isfinite(v); })) {
        throw DataError("image '" + image_id + "' has a non-finite feature value");
    }
    auto id = image_id;
    if (!vectors_.emplace(std::move(image_id), std::move(vector)).second) {
        throw DataError("duplicate image_id '" + id + "'");
    }
}

std::vector<float> const *ImageFeatureStore::find(std::string const &image_id) const
{
    auto it = vectors_.find(image_id);
    return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<float> const &ImageFeatureStore::get(std::string const &image_id) const
{
    if (auto const *v = find(image_id)) {
        return *v;
    }
    throw DataError("image '" + image_id + "' is not in the feature store");
}

ImageFeatureStore ImageFeatureStore::load(std::filesystem::path const &path)
{
    auto const source = path.string();
    std::optional<ImageFeatureStore> store;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (!store) {
            if (line.substr(0, 4) != "dim=") {
                throw DataError(source, number, "expected header 'dim=<D>'");
            }
            double const dim = io::parse_double(line.substr(4));
            if (dim < 1 || dim != std::floor(dim)) {
                throw DataError(source, number, "invalid dimension");
            }
            store.emplace(static_cast<std::size_t>(dim));
            return;
        }
        if (line.front() == '#') {
            constexpr std::string_view tag = "# provenance:";
            if (line.substr(0, tag.size()) == tag) {
                auto p = std::string(line.substr(tag.size()));
                p.erase(0, p.find_first_not_of(' '));
                store->provenance_ = p;
            }
            return;
        }
        auto const tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) {
            throw DataError(source, number, "expected 'image_id<TAB>values'");
        }
        std::vector<float> values;
        auto rest = line.substr(tab + 1);
        try {
            while (true) {
                auto comma = rest.find(',');
                values.push_back(static_cast<float>(io::parse_double(rest.substr(0, comma))));
                if (comma == std::string_view::npos) {
                    break;
                }
                rest = rest.substr(comma + 1);
            }
            store->add(std::string(line.substr(0, tab)), std::move(values));
        } catch (DataError const &e) {
            throw DataError(source, number, e.what());
        }
    });
    if (!store) {
        throw DataError(source, 1, "empty feature store");
    }
    return std::move(*store);
}

void ImageFeatureStore::save(std::filesystem::path const &path) const
{
    std::string out = "dim=" + std::to_string(dim_) + "\n";
    if (!provenance_.empty()) {
        out += "# provenance: " + provenance_ + "\n";
    }
    for (auto const &[id, v] : vectors_) {
        out += id;
        out += '\t';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i > 0) {
                out += ',';
            }
            out += io::format_double(static_cast<double>(v[i]));
        }
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

std::vector<std::vector<float>> conversation_images(Conversation const &c, ImageFeatureStore const &store)
{
    std::vector<std::vector<float>> out;
    for (auto const &turn : c.turns) {
        for (auto const &ref : turn.image_refs) {
            out.push_back(store.get(ref));
        }
    }
    return out;
}

bool is_affirmative(std::string_view answer)
{
    for (auto const &t : text::tokenize(text::normalize(answer))) {
        if (is_negator(t)) {
            return false;
        }
        if (!text::is_stopword(t)) {
            return true;
        }
    }
    return true;
}

std::string KeywordSummarizer::summarize(Conversation const &conversation, Topic const &topic)
{
    std::vector<std::string> base;
    {
        auto terms = content_terms(topic.query);
        if (terms.empty()) {
            terms = text::tokenize(text::normalize(topic.query));
        }
        std::set<std::string> seen;
        for (auto &t : terms) {
            if (seen.insert(t).second) {
                base.push_back(std::move(t));
            }
        }
    }

    // Latest mention wins: true = affirmed, false = retracted.
    std::map<std::string, bool> state;
    std::vector<std::string> affirmed_order;
    for (auto const &turn : conversation.turns) {
        if (is_affirmative(turn.answer)) {
            for (auto &t : content_terms(turn.answer)) {
                if (std::find(affirmed_order.begin(), affirmed_order.end(), t) == affirmed_order.end()) {
                    affirmed_order.push_back(t);
                }
                state[t] = true;
            }
        } else {
            for (auto &t : content_terms(turn.question)) {
                state[t] = false;
            }
            for (auto &t : content_terms(turn.answer)) {
                state[t] = false;
            }
        }
    }

    std::string out;
    auto append = [&](std::string const &t) {
        if (!out.empty()) {
            out += ' ';
        }
        out += t;
    };
    for (auto const &t : base) {
        append(t);
    }
    for (auto const &t : affirmed_order) {
        if (state[t] && std::find(base.begin(), base.end(), t) == base.end()) {
            append(t);
        }
    }
    return out;
}

std::string intent_prompt(Conversation const &conversation, Topic const &topic)
{
    std::ostringstream conv;
    conv << "Query: " << topic.query;
    for (std::size_t i = 0; i < conversation.turns.size(); ++i) {
        auto const &t = conversation.turns[i];
        conv << "\nQuestion " << i + 1 << ": " << t.question;
        if (!t.image_refs.empty()) {
            conv << " [images:";
            for (auto const &r : t.image_refs) {
                conv << ' ' << r;
            }
            conv << ']';
        }
        conv << "\nAnswer " << i + 1 << ": " << t.answer;
    }
    return "Extract the user's intent based on the conversation.\n"
           "Only mention what they are interested in.\n"
           "Conversation: "
           + conv.str();
}

std::string RemoteSummarizer::summarize(Conversation const &conversation, Topic const &topic)
{
    auto reply = client_.complete(intent_prompt(conversation, topic));
    std::string line;
    bool space = false;
    for (char c : reply) {
        if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
            space = !line.empty();
            continue;
        }
        if (space) {
            line += ' ';
            space = false;
        }
        line += c;
    }
    return line;
}

std::string infer_query(Conversation const &conversation, Topic const &topic, Summarizer &summarizer)
{
    if (conversation.turns.empty()) {
        throw DataError("conversation '" + conversation.conversation_id + "' has no turns");
    }
    auto const context = "conversation '" + conversation.conversation_id + "' ("
                         + std::to_string(conversation.turns.size()) + " turns): ";
    try {
        return summarizer.summarize(conversation, topic);
    } catch (RemoteError const &e) {
        throw RemoteError(e.endpoint(), context + e.what());
    } catch (DataError const &e) {
        throw DataError(context + e.what());
    }
}

} // namespace clarion
