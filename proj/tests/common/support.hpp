#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace clarion::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir()
    {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path()
                / ("clarion-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(TempDir const &) = delete;
    TempDir &operator=(TempDir const &) = delete;

    [[nodiscard]] std::filesystem::path const &path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(std::string const &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline void write_text(std::filesystem::path const &path, std::string const &content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_text(std::filesystem::path const &path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Seeded generator helpers for property tests.
class Gen {
  public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    /// Uniform integer in [lo, hi].
    std::size_t uniform(std::size_t lo, std::size_t hi)
    {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    template <typename T>
    T const &pick(std::vector<T> const &items)
    {
        return items[uniform(0, items.size() - 1)];
    }

    /// Lowercase pseudo-word over a small alphabet, so collisions happen.
    std::string word(std::size_t min_len = 3, std::size_t max_len = 6)
    {
        static constexpr char kLetters[] = "abcdefghik";
        std::string w;
        auto const n = uniform(min_len, max_len);
        for (std::size_t i = 0; i < n; ++i) {
            w += kLetters[uniform(0, 9)];
        }
        return w;
    }

    std::mt19937_64 &engine() noexcept { return rng_; }

  private:
    std::mt19937_64 rng_;
};

} // namespace clarion::testing
