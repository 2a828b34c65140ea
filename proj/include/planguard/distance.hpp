#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "errors.hpp"

namespace planguard {

enum class TrajectoryMetric { L1, L2, Dtw };

inline const char* metric_name(TrajectoryMetric m) {
    switch (m) {
        case TrajectoryMetric::L1: return "l1";
        case TrajectoryMetric::L2: return "l2";
        case TrajectoryMetric::Dtw: return "dtw";
    }
    return "l1";
}

namespace detail {

inline void check_steps(const std::vector<Action>& a, const std::vector<Action>& b) {
    if (a.empty() || b.empty())
        throw UsageError("trajectory distance: empty sequence");
    for (const auto& s : a)
        if (s.size() != a.front().size())
            throw UsageError("trajectory distance: ragged sequence");
    for (const auto& s : b)
        if (s.size() != a.front().size())
            throw UsageError("trajectory distance: step dimensions differ");
}

inline double step_l1(const Action& x, const Action& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc;
}

}  // namespace detail

// Distances between equal-role action (or feature) sequences.
//  - L1: sum over steps of per-step L1 distance; lengths must match.
//  - L2: square root of the summed squared per-step Euclidean distances;
//    lengths must match.
//  - DTW: unconstrained dynamic time warping with per-step Euclidean ground
//    cost; lengths may differ.
inline double trajectory_distance(const std::vector<Action>& a, const std::vector<Action>& b,
                                  TrajectoryMetric metric) {
    detail::check_steps(a, b);
    if (metric != TrajectoryMetric::Dtw && a.size() != b.size())
        throw UsageError("trajectory distance: length mismatch for a step-wise metric");

    switch (metric) {
        case TrajectoryMetric::L1: {
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += detail::step_l1(a[i], b[i]);
            return acc;
        }
        case TrajectoryMetric::L2: {
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += squared_distance(a[i], b[i]);
            return std::sqrt(acc);
        }
        case TrajectoryMetric::Dtw:
            break;
    }

    // Suffix-ordered table: cell (i, j) holds the cheapest alignment of the
    // sequence tails starting there, mirroring the natural recursion so the
    // floating-point evaluation order matches a reference recursion exactly.
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> next(m), cur(m);
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            const double cost = euclidean_distance(a[i], b[j]);
            double best = 0.0;
            if (i + 1 < n && j + 1 < m)
                best = std::min({next[j], cur[j + 1], next[j + 1]});
            else if (i + 1 < n)
                best = next[j];
            else if (j + 1 < m)
                best = cur[j + 1];
            cur[j] = cost + best;
        }
        std::swap(next, cur);
    }
    return next[0];
}

}  // namespace planguard
