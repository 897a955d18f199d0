#pragma once

#include <cstdint>

namespace evolve::eval {

/// (2·correct + partial) / (2·total). Throws std::invalid_argument when
/// total is zero or correct + partial exceeds total.
double score_accuracy(std::int64_t correct, std::int64_t partial, std::int64_t total);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval for a binomial proportion, clamped to [0, 1].
Interval wilson_interval(std::int64_t successes, std::int64_t n, double z = 1.96);

}  // namespace evolve::eval
