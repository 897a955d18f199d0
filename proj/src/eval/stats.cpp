#include "evolve/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evolve::eval {

double score_accuracy(std::int64_t correct, std::int64_t partial, std::int64_t total) {
    if (total <= 0) throw std::invalid_argument("score_accuracy needs total > 0");
    if (correct < 0 || partial < 0 || correct + partial > total)
        throw std::invalid_argument("score_accuracy counts out of range");
    return static_cast<double>(2 * correct + partial) / static_cast<double>(2 * total);
}

Interval wilson_interval(std::int64_t successes, std::int64_t n, double z) {
    if (n <= 0) throw std::invalid_argument("wilson_interval needs n > 0");
    if (successes < 0 || successes > n) throw std::invalid_argument("wilson_interval successes out of range");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    Interval out{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
    // Exact endpoints at the extremes; the formula lands within rounding of them.
    if (successes == 0) out.lo = 0.0;
    if (successes == n) out.hi = 1.0;
    return out;
}

}  // namespace evolve::eval
