#include "rdae/gram_kernel.hpp"

#include "rdae/errors.hpp"

#include <cmath>
#include <string>

namespace rdae {

void KernelSpec::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("kernel sigma must be positive and finite");
    if (!(n >= 1.0)) throw UsageError("kernel normalization count must be >= 1");
}

double gaussian_kernel(const Eigen::Ref<const Vector>& xi, const Eigen::Ref<const Vector>& xj,
                       const KernelSpec& spec) {
    spec.validate();
    if (xi.size() != xj.size())
        throw UsageError("gaussian_kernel: dimension mismatch " + std::to_string(xi.size()) + " vs " +
                         std::to_string(xj.size()));
    if (!xi.allFinite() || !xj.allFinite()) throw UsageError("gaussian_kernel: non-finite input");
    double dist2 = 0.0;
    for (Eigen::Index k = 0; k < xi.size(); ++k) {
        const double diff = xi[k] - xj[k];
        dist2 += diff * diff;
    }
    return std::exp(-dist2 / (2.0 * spec.sigma * spec.sigma)) / spec.n;
}

NormalizedGram normalized_gram(const PointMatrix& X, double sigma) {
    require_points(X, 2, "normalized_gram");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("normalized_gram: sigma must be positive");

    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

    // one point per column so the coordinate loop runs over contiguous memory
    const Matrix P = X.transpose();
    Matrix A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, i) = inv_n;
        const double* xi = P.col(i).data();
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double* xj = P.col(j).data();
            double dist2 = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double diff = xi[k] - xj[k];
                dist2 += diff * diff;
            }
            const double v = inv_n * std::exp(-dist2 * inv_two_sigma2);
            A(i, j) = v;
            A(j, i) = v;
        }
    }
    return NormalizedGram(std::move(A));
}

NormalizedGram hadamard_joint(const NormalizedGram& A, const NormalizedGram& B) {
    if (A.size() != B.size())
        throw UsageError("hadamard_joint: size mismatch " + std::to_string(A.size()) + " vs " +
                         std::to_string(B.size()));
    const Eigen::Index n = A.size();
    double trace = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) trace += A(i, i) * B(i, i);
    if (!(trace > 0.0)) throw InternalError("hadamard_joint: non-positive trace of A∘B");

    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix C(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        C(i, i) = inv_n;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = A(i, j) * B(i, j) / trace;
            C(i, j) = v;
            C(j, i) = v;
        }
    }
    return NormalizedGram(std::move(C));
}

NormalizedGram NormalizedGram::from_matrix(Matrix m) {
    if (m.rows() != m.cols() || m.rows() < 1) throw UsageError("NormalizedGram: matrix must be square");
    if (!m.allFinite()) throw UsageError("NormalizedGram: non-finite entry");
    const Eigen::Index n = m.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(m(i, i) - inv_n) > 1e-12) throw UsageError("NormalizedGram: diagonal must equal 1/N");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (m(i, j) != m(j, i)) throw UsageError("NormalizedGram: matrix must be symmetric");
            if (m(i, j) < 0.0 || m(i, j) > inv_n + 1e-12)
                throw UsageError("NormalizedGram: entries must lie in [0, 1/N]");
        }
    }
    return NormalizedGram(std::move(m));
}

}  // namespace rdae
