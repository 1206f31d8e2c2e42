#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace ffrelay {

// Counter-based generator: output n of stream key K is splitmix64(K + n*gamma).
// Streams are keyed by hashing (seed, ids...), so any (trial, frame, draw)
// stream can be regenerated without replaying the others.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {
        for (auto id : ids) {
            key_ = mix(key_ ^ mix(id + 0x9e3779b97f4a7c15ULL));
        }
    }

    std::uint64_t next() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    // uniform on (0, 1), never exactly 0
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // circularly symmetric complex Gaussian with E|z|^2 = var
    std::complex<double> cnormal(double var = 1.0) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-var * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        return {rad * std::cos(ang), rad * std::sin(ang)};
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace ffrelay
