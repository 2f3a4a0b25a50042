#include "rdae/rd_oracle.hpp"

#include "rdae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace rdae {

namespace {

double allocated(std::span<const double> variances, double level) {
    double sum = 0.0;
    for (double v : variances) sum += std::min(level, v);
    return sum;
}

}  // namespace

WaterfillResult waterfill(std::span<const double> variances, double distortion) {
    if (variances.empty()) throw UsageError("waterfill: no components");
    for (double v : variances)
        if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("waterfill: variances must be positive and finite");
    if (!(distortion > 0.0) || !std::isfinite(distortion)) throw UsageError("waterfill: distortion must be positive");

    const double total = std::accumulate(variances.begin(), variances.end(), 0.0);
    const double largest = *std::max_element(variances.begin(), variances.end());

    WaterfillResult out;
    if (distortion >= total) {
        out.water_level = largest;
    } else {
        double lo = 0.0, hi = largest;
        double level = 0.5 * (lo + hi);
        for (int iter = 0; iter < 2000; ++iter) {
            level = 0.5 * (lo + hi);
            const double gap = allocated(variances, level) - distortion;
            if (std::abs(gap) < 1e-12 || level == lo || level == hi) break;
            (gap < 0.0 ? lo : hi) = level;
        }
        out.water_level = level;
    }

    out.per_component_distortion.reserve(variances.size());
    for (double v : variances) {
        const double di = std::min(out.water_level, v);
        out.per_component_distortion.push_back(di);
        if (di < v) out.rate_bits += 0.5 * std::log2(v / di);
    }
    return out;
}

PcaBasis pca(const PointMatrix& X) {
    require_points(X, 2, "pca");
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const Vector mean = X.colwise().mean().transpose();
    const Matrix centered = X.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (cov + cov.transpose()));
    if (solver.info() != Eigen::Success) throw NumericalError("pca: eigensolver did not converge");

    PcaBasis out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.directions = solver.eigenvectors().rowwise().reverse();
    out.degenerate = n <= d;
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::Index at = 0;
        out.directions.col(k).cwiseAbs().maxCoeff(&at);
        if (out.directions(at, k) < 0.0) out.directions.col(k) *= -1.0;
    }
    return out;
}

std::vector<RdCurvePoint> rd_curve(std::span<const double> variances, double lo, double hi, int steps) {
    if (steps < 1) throw UsageError("rd_curve: steps must be >= 1");
    if (!(lo > 0.0) || !(hi >= lo)) throw UsageError("rd_curve: need 0 < lo <= hi");
    std::vector<RdCurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const double D = steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
        const WaterfillResult r = waterfill(variances, D);
        curve.push_back({D, r.rate_bits, r.water_level});
    }
    return curve;
}

void write_rd_curve_csv(std::ostream& os, std::span<const RdCurvePoint> curve) {
    os << "D,rate_bits,water_level\n";
    char buf[96];
    for (const auto& pt : curve) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", pt.distortion, pt.rate_bits, pt.water_level);
        os << buf;
    }
}

}  // namespace rdae
