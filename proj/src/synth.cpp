#include "clarion/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "clarion/errors.hpp"

namespace clarion {

namespace {

constexpr std::array kTopics = {"sofa",   "lamp",    "backpack", "jacket", "mug",     "chair",    "rug",
                                "kettle", "blanket", "teapot",   "vase",   "scarf",   "boots",    "tent",
                                "bicycle", "umbrella", "curtain", "pillow", "basket", "clock",   "desk",
                                "wallet", "helmet",  "bench"};
constexpr std::array kColors = {"red", "blue", "green", "yellow", "black", "white"};
constexpr std::array kMaterials = {"leather", "wool", "cotton", "bamboo", "steel", "velvet", "linen", "oak"};
constexpr std::array kFiller = {
    "sturdy",   "frame",    "walnut",   "compact",  "handle",   "stitching", "vintage",  "modern",   "rustic",
    "elegant",  "durable",  "padded",   "folding",  "curved",   "glossy",    "matte",    "brushed",  "woven",
    "knitted",  "polished", "rounded",  "slim",     "heavy",    "light",     "spacious", "cozy",     "classic",
    "minimal",  "ornate",   "striped",  "quilted",  "tapered",  "sleek",     "chunky",   "airy",     "plush",
    "rugged",   "delicate", "portable", "washable", "handmade", "textured",  "layered",  "studded",  "riveted",
    "beveled",  "carved",   "etched",   "printed",  "embossed", "trimmed",   "lined",    "zipped",   "buttoned",
    "hooked",   "strapped", "wrapped",  "braided",  "flared",   "pleated",   "ribbed",   "hinged",   "stacked",
    "nested",   "angled",   "arched",   "domed",    "fluted",   "grooved",   "hammered", "lacquered", "waxed",
    "oiled",    "stained",  "painted",  "dyed",     "bleached", "faded",     "distressed", "weathered", "antique",
    "retro",    "coastal",  "urban",    "alpine",   "desert",   "tropical",  "nordic",   "tuscan",   "meadow",
    "harbor",   "canyon",   "prairie",  "orchard",  "lantern",  "compass",   "anchor",   "feather",  "pebble",
    "willow",   "cedar",    "maple",    "aspen",    "juniper",  "saffron",   "clover",   "thistle",  "meridian"};

std::string capitalize(std::string s)
{
    if (!s.empty()) {
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    }
    return s;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    double gaussian()
    {
        double u1 = 0.0;
        do {
            u1 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        } while (u1 <= 0.0);
        double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    template <typename T>
    void shuffle(std::vector<T> &v)
    {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
};

std::string two_digits(std::size_t i) { return (i < 10 ? "0" : "") + std::to_string(i); }

struct FacetSpec {
    std::string facet_id;
    std::size_t color;
    std::size_t material;
    std::vector<std::string> images;
};

} // namespace

Benchmark make_benchmark(BenchmarkConfig const &config)
{
    if (config.topics == 0 || config.topics > kTopics.size()) {
        throw UsageError("benchmark topic count must be between 1 and " + std::to_string(kTopics.size()));
    }
    constexpr std::size_t kTopicColors = 4;
    constexpr std::size_t kTopicMaterials = 3;
    if (config.docs_per_topic == 0 || config.docs_per_topic > kTopicColors * kTopicMaterials) {
        throw UsageError("docs_per_topic must be between 1 and 12");
    }
    if (config.facets_per_topic == 0 || config.facets_per_topic > config.docs_per_topic) {
        throw UsageError("facets_per_topic must be between 1 and docs_per_topic");
    }
    if (config.image_dim == 0 || config.variants_per_facet == 0) {
        throw UsageError("image_dim and variants_per_facet must be positive");
    }

    Rng rng(config.seed);
    Benchmark bench;
    bench.images = ImageFeatureStore(config.image_dim, "synthetic gaussian color clusters");

    std::vector<std::vector<double>> centers(kColors.size(), std::vector<double>(config.image_dim));
    for (auto &c : centers) {
        for (auto &x : c) {
            x = rng.gaussian();
        }
    }
    std::size_t image_counter = 0;
    auto make_image = [&](std::string const &prefix, std::size_t color) {
        std::vector<float> v(config.image_dim);
        for (std::size_t k = 0; k < config.image_dim; ++k) {
            v[k] = static_cast<float>(centers[color][k] + config.image_noise * rng.gaussian());
        }
        auto id = prefix + "-" + std::to_string(image_counter++);
        bench.images.add(id, std::move(v));
        return id;
    };

    for (std::size_t t = 0; t < config.topics; ++t) {
        std::string const topic_name = kTopics[t];
        std::string const topic_id = "t" + two_digits(t + 1);

        std::vector<std::size_t> colors(kColors.size());
        std::vector<std::size_t> materials(kMaterials.size());
        for (std::size_t i = 0; i < colors.size(); ++i) {
            colors[i] = i;
        }
        for (std::size_t i = 0; i < materials.size(); ++i) {
            materials[i] = i;
        }
        rng.shuffle(colors);
        rng.shuffle(materials);
        colors.resize(kTopicColors);
        materials.resize(kTopicMaterials);

        std::vector<std::pair<std::size_t, std::size_t>> combos;
        for (auto c : colors) {
            for (auto m : materials) {
                combos.emplace_back(c, m);
            }
        }
        rng.shuffle(combos);
        combos.resize(config.docs_per_topic);

        std::vector<std::string> doc_ids;
        for (std::size_t d = 0; d < combos.size(); ++d) {
            auto [c, m] = combos[d];
            std::string const color = kColors[c];
            std::string const material = kMaterials[m];
            auto filler = [&] { return std::string(kFiller[rng.below(kFiller.size())]); };
            Document doc;
            doc.doc_id = "d" + two_digits(t) + std::to_string(d);
            doc.title = capitalize(color) + " " + capitalize(material) + " " + capitalize(topic_name);
            doc.body = "This " + color + " " + topic_name + " is made of " + material + " with a " + filler() + " "
                       + filler() + ". The " + material + " finish suits a " + color + " room with " + filler()
                       + " " + filler() + " details.";
            auto extra = rng.below(3);
            for (std::size_t e = 0; e < extra; ++e) {
                doc.body += " It has a " + filler() + " " + filler() + " look.";
            }
            doc_ids.push_back(doc.doc_id);
            bench.corpus.add_document(std::move(doc));
        }

        Topic topic;
        topic.topic_id = topic_id;
        topic.query = topic_name;
        // Facets form a 2 x 2 grid of (color, material) pairs present in the
        // topic, so neither attribute alone identifies a facet.
        std::vector<std::size_t> facet_docs;
        {
            auto has = [&](std::size_t c, std::size_t m) {
                return std::find(combos.begin(), combos.end(), std::pair{c, m}) != combos.end();
            };
            std::vector<std::array<std::size_t, 4>> grids;
            for (std::size_t c1 = 0; c1 < colors.size(); ++c1) {
                for (std::size_t c2 = c1 + 1; c2 < colors.size(); ++c2) {
                    for (std::size_t m1 = 0; m1 < materials.size(); ++m1) {
                        for (std::size_t m2 = m1 + 1; m2 < materials.size(); ++m2) {
                            std::array<std::pair<std::size_t, std::size_t>, 4> cells = {
                                std::pair{colors[c1], materials[m1]}, std::pair{colors[c1], materials[m2]},
                                std::pair{colors[c2], materials[m1]}, std::pair{colors[c2], materials[m2]}};
                            if (std::all_of(cells.begin(), cells.end(),
                                            [&](auto const &cell) { return has(cell.first, cell.second); })) {
                                std::array<std::size_t, 4> idx{};
                                for (std::size_t i = 0; i < 4; ++i) {
                                    idx[i] = static_cast<std::size_t>(
                                        std::find(combos.begin(), combos.end(), cells[i]) - combos.begin());
                                }
                                grids.push_back(idx);
                            }
                        }
                    }
                }
            }
            if (grids.empty()) {
                for (std::size_t i = 0; i < combos.size(); ++i) {
                    facet_docs.push_back(i);
                }
                rng.shuffle(facet_docs);
            } else {
                auto const &g = grids[rng.below(grids.size())];
                facet_docs.assign(g.begin(), g.end());
            }
            facet_docs.resize(std::min(facet_docs.size(), config.facets_per_topic));
        }
        std::vector<FacetSpec> facets;
        for (std::size_t f = 0; f < facet_docs.size(); ++f) {
            auto [c, m] = combos[facet_docs[f]];
            FacetSpec spec{topic_id + "-f" + std::to_string(f + 1), c, m, {}};
            for (std::size_t i = 0; i < 4; ++i) {
                spec.images.push_back(make_image("img-" + spec.facet_id, c));
            }
            topic.facets.push_back({spec.facet_id, std::string(kColors[c]) + " " + kMaterials[m] + " " + topic_name});
            for (std::size_t d = 0; d < combos.size(); ++d) {
                if (combos[d].first == c) {
                    bench.qrels.set(spec.facet_id, doc_ids[d], combos[d].second == m ? 2 : 1);
                } else {
                    bench.qrels.set(spec.facet_id, doc_ids[d], 0);
                }
            }
            facets.push_back(std::move(spec));
        }
        bench.catalog.add(topic);

        for (auto const &spec : facets) {
            std::string const material = kMaterials[spec.material];
            std::vector<std::string> other_materials;
            for (auto m : materials) {
                if (m != spec.material) {
                    other_materials.push_back(kMaterials[m]);
                }
            }
            auto material_turn = [&]() -> Turn {
                static constexpr std::array templates = {"Are you interested in a {m} {t}?",
                                                         "Should the {t} be {m}?", "Do you prefer {m}?"};
                std::string q = templates[rng.below(templates.size())];
                q.replace(q.find("{m}"), 3, material);
                if (auto p = q.find("{t}"); p != std::string::npos) {
                    q.replace(p, 3, topic_name);
                }
                return {q, {}, "yes, " + material + " please"};
            };
            auto negative_turn = [&]() -> Turn {
                auto const &other = other_materials[rng.below(other_materials.size())];
                return {"Would a " + other + " " + topic_name + " work for you?", {}, "no, not " + other};
            };
            auto image_turn = [&](std::size_t which) -> Turn {
                static constexpr std::array templates = {"Does this {t} look right?", "Is this the style you want?",
                                                         "How about this one?"};
                std::string q = templates[rng.below(templates.size())];
                if (auto p = q.find("{t}"); p != std::string::npos) {
                    q.replace(p, 3, topic_name);
                }
                return {q, {spec.images[which % spec.images.size()]}, "yes, exactly like this"};
            };

            bench.qa_pool.push_back({topic_id, spec.facet_id, material_turn().question, {}, "yes, " + material + " please"});
            auto neg = negative_turn();
            bench.qa_pool.push_back({topic_id, spec.facet_id, neg.question, {}, neg.answer});
            auto img = image_turn(0);
            bench.qa_pool.push_back({topic_id, spec.facet_id, img.question, img.image_refs, img.answer});

            for (std::size_t v = 0; v < config.variants_per_facet; ++v) {
                for (std::size_t k = 1; k <= Conversation::kMaxTurns; ++k) {
                    Conversation conv;
                    conv.topic_id = topic_id;
                    conv.facet_id = spec.facet_id;
                    conv.conversation_id = spec.facet_id + "-k" + std::to_string(k) + "-v" + std::to_string(v);
                    auto first_image = rng.below(spec.images.size());
                    switch (k) {
                    case 1:
                        conv.turns = {material_turn()};
                        break;
                    case 2:
                        conv.turns = {material_turn(), image_turn(first_image)};
                        break;
                    case 3:
                        conv.turns = {negative_turn(), material_turn(), image_turn(first_image)};
                        break;
                    default:
                        conv.turns = {negative_turn(), material_turn(), image_turn(first_image),
                                      image_turn(first_image + 1)};
                        break;
                    }
                    bench.conversations.push_back(std::move(conv));
                }
            }
        }
    }
    return bench;
}

void write_benchmark(std::filesystem::path const &dir, Benchmark const &benchmark)
{
    std::filesystem::create_directories(dir);
    save_corpus(dir / "corpus.jsonl", benchmark.corpus);
    benchmark.catalog.save(dir / "topics.jsonl");
    save_conversations(dir / "conversations.jsonl", benchmark.conversations);
    write_qrels(dir / "qrels.txt", benchmark.qrels);
    benchmark.images.save(dir / "features.tsv");
    save_qa_pool(dir / "qa_pool.jsonl", benchmark.qa_pool);
}

} // namespace clarion
