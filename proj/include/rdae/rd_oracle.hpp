#pragma once

#include "rdae/types.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace rdae {

/// Reverse water-filling solution for independent Gaussian components
/// under squared-error distortion.
struct WaterfillResult {
    double rate_bits = 0.0;
    std::vector<double> per_component_distortion;  // Dᵢ = min(λ, γᵢ²)
    double water_level = 0.0;                      // λ
};

/// Solves Σ min(λ, γᵢ²) = D for λ by bisection and reports
/// R = Σ_{Dᵢ<γᵢ²} ½·log₂(γᵢ²/Dᵢ). Throws UsageError for D ≤ 0 or a
/// non-positive variance.
WaterfillResult waterfill(std::span<const double> variances, double distortion);

struct PcaBasis {
    Vector eigenvalues;  // sample covariance spectrum, descending
    Matrix directions;   // column k pairs with eigenvalues[k]
    bool degenerate = false;  // N ≤ d: covariance is rank deficient
};

/// PCA of the mean-centered rows of X (covariance normalized by N−1).
/// Each direction is signed so its largest-magnitude entry is positive.
PcaBasis pca(const PointMatrix& X);

struct RdCurvePoint {
    double distortion;
    double rate_bits;
    double water_level;
};

/// `steps` evenly spaced distortions from lo to hi inclusive.
std::vector<RdCurvePoint> rd_curve(std::span<const double> variances, double lo, double hi, int steps);

/// CSV with header "D,rate_bits,water_level".
void write_rd_curve_csv(std::ostream& os, std::span<const RdCurvePoint> curve);

}  // namespace rdae
