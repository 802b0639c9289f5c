#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "actangle/chart.hpp"
#include "actangle/symplectic.hpp"

namespace actangle::testing {

inline constexpr double kPi = std::numbers::pi;

// Deterministic generator for randomized cases.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }
    Vec vec(int n, double lo, double hi) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = uniform(lo, hi);
        return v;
    }
    template <class T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(integer(0, static_cast<int>(items.size()) - 1))];
    }

private:
    std::mt19937_64 rng_;
};

inline Vec vec_of(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Distance between angles on the circle.
inline double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

inline double max_angle_gap(const Vec& a, const Vec& b) {
    double worst = 0.0;
    for (int k = 0; k < a.size(); ++k) worst = std::max(worst, angle_gap(a[k], b[k]));
    return worst;
}

inline double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace actangle::testing
