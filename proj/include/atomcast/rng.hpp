#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace atomcast {

// Deterministic random stream. All stochastic pieces of the pipeline
// (initial velocities, batch shuffling, pair sampling) draw from an
// explicitly seeded RngStream so that a fixed config reproduces bit-identical
// artifacts. std::mt19937_64 is used as the engine; the distributions are
// hand-rolled because libstdc++'s std::normal_distribution is
// implementation-defined.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return (next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range [lo, hi]
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal via Box-Muller; the spare value is cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stdev) { return mean + stdev * normal(); }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // First m entries of a random permutation of [0, n). Used for sampling
    // atom pairs without replacement.
    std::vector<int> sample_without_replacement(int n, int m);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Splitting rule for deriving per-component seeds from a global one:
// splitmix64 over (base ^ fnv1a(label) ^ index). Cells of experiment grids,
// thermostat noise, pair samplers etc. each get their own stream so adding a
// consumer never perturbs another one.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

} // namespace atomcast
