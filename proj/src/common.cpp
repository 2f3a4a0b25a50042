#include "rdae/errors.hpp"
#include "rdae/rng.hpp"
#include "rdae/types.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rdae {

void require_points(const PointMatrix& X, Eigen::Index min_rows, const char* what) {
    if (X.rows() < min_rows)
        throw UsageError(std::string(what) + ": need at least " + std::to_string(min_rows) +
                         " rows, got " + std::to_string(X.rows()));
    if (X.cols() < 1) throw UsageError(std::string(what) + ": need at least one column");
    if (!X.allFinite()) throw UsageError(std::string(what) + ": non-finite entry");
}

double CounterRng::normal(std::uint64_t m) const noexcept {
    const std::uint64_t base = m & ~std::uint64_t{1};
    const double u1 = uniform(base);
    const double u2 = uniform(base + 1);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (m & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
}

}  // namespace rdae
