// Writes the planted-signal benchmark files into a directory.

#include <iostream>

#include <CLI11.hpp>

#include "clarion/errors.hpp"
#include "clarion/synth.hpp"

int main(int argc, char **argv)
{
    CLI::App app{"Generate the synthetic planted-signal benchmark"};
    std::string out;
    clarion::BenchmarkConfig config;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--seed", config.seed, "Generator seed")->capture_default_str();
    app.add_option("--topics", config.topics, "Topics")->capture_default_str();
    app.add_option("--variants", config.variants_per_facet, "Conversations per facet and turn count")
        ->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const &e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        auto bench = clarion::make_benchmark(config);
        clarion::write_benchmark(out, bench);
        std::cout << "wrote " << bench.corpus.size() << " documents, " << bench.conversations.size()
                  << " conversations, " << bench.images.size() << " images to " << out << "\n";
    } catch (clarion::UsageError const &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
