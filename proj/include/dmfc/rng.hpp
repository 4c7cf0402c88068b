#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dmfc {

// Seeded generator with a hand-rolled Box-Muller normal so that draws are
// identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // (0, 1)
        return std::uniform_real_distribution<double>(
            std::nextafter(0.0, 1.0), 1.0)(engine_);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t integer() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dmfc
