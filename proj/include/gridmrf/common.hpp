#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace gridmrf {

// Floor for log-domain quantities. Values at or below this behave as
// "impossible" (probability exactly zero after exponentiation) while the
// arithmetic stays finite.
inline constexpr double kLogFloor = -1e300;

inline double clamp_log(double v) { return v < kLogFloor ? kLogFloor : v; }

inline double log_sum_exp(std::span<const double> v) {
    double m = kLogFloor;
    for (double x : v)
        if (x > m) m = x;
    if (m <= kLogFloor) return kLogFloor;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Canonical 53-bit uniform in [0,1). Hand-rolled so that a given seed
// produces the same stream on every platform.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draw an index proportional to exp(logw[i]). Labels whose weight
// underflows to zero are never selected.
inline int sample_from_log_weights(std::span<const double> logw, std::mt19937_64& rng) {
    double m = kLogFloor;
    for (double x : logw)
        if (x > m) m = x;
    if (m <= kLogFloor) throw std::runtime_error("sample_from_log_weights: all weights are zero");
    double total = 0.0;
    for (double x : logw) total += std::exp(x - m);
    const double u = uniform01(rng) * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(logw.size()); ++i) {
        const double w = std::exp(logw[i] - m);
        if (w > 0.0) last_positive = i;
        cum += w;
        if (u < cum && w > 0.0) return i;
    }
    return last_positive;
}

inline int sample_from_probs(std::span<const double> p, std::mt19937_64& rng) {
    double total = 0.0;
    for (double x : p) total += x;
    if (!(total > 0.0)) throw std::runtime_error("sample_from_probs: degenerate distribution");
    const double u = uniform01(rng) * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        if (p[i] > 0.0) last_positive = i;
        cum += p[i];
        if (u < cum && p[i] > 0.0) return i;
    }
    return last_positive;
}

inline void softmax_from_log(std::span<const double> logw, std::span<double> out) {
    double m = kLogFloor;
    for (double x : logw)
        if (x > m) m = x;
    double s = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        out[i] = std::exp(logw[i] - m);
        s += out[i];
    }
    for (std::size_t i = 0; i < logw.size(); ++i) out[i] /= s;
}

// splitmix64 finalizer (Vigna). Used for seed derivation only.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Trial-seed splitting rule: FNV-1a over the label bytes folded with the
// master seed and index, finished with splitmix64. Stable across platforms;
// recorded in experiment metadata.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master) ^ splitmix64(h) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

}  // namespace gridmrf
