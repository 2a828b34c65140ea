#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace planguard {

// 1.4826 is 1 / Phi^{-1}(3/4): scales the median absolute deviation to the
// standard deviation of a normal distribution.
inline constexpr double kMadConsistency = 1.4826;

inline double median(std::vector<double> values) {
    if (values.empty()) throw UsageError("median of empty sample");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

// Raw median absolute deviation, no consistency factor.
inline double median_absolute_deviation(const std::vector<double>& values) {
    const double med = median(values);
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - med);
    return median(std::move(dev));
}

inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw UsageError("quantile of empty sample");
    if (q < 0.0 || q > 1.0) throw UsageError("quantile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    if (q == 0.0) return values.front();
    if (q == 1.0) return values.back();
    // Linear interpolation between order statistics.
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

inline double mean(const std::vector<double>& values) {
    if (values.empty()) throw UsageError("mean of empty sample");
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

inline double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace planguard
