#include "rdae/matrix_entropy.hpp"

#include "rdae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rdae {

namespace {

constexpr double kNegativeEigenTolerance = 1e-8;

void require_square(const Eigen::Ref<const Matrix>& A, const char* what) {
    if (A.rows() != A.cols() || A.rows() < 1) throw UsageError(std::string(what) + ": matrix must be square");
    if (!A.allFinite()) throw UsageError(std::string(what) + ": non-finite entry");
}

// Clips one eigenvalue into [0, 1], zeroing anything under the floor.
double effective_eigenvalue(double lambda, const EntropySpec& spec) {
    if (lambda < -kNegativeEigenTolerance) {
        std::ostringstream msg;
        msg << "matrix is not positive semidefinite: eigenvalue " << lambda;
        throw NumericalError(msg.str());
    }
    lambda = std::min(lambda, 1.0);
    if (lambda <= 0.0 || lambda < spec.eig_floor) return 0.0;
    return lambda;
}

double power_trace(const Vector& eigenvalues, const EntropySpec& spec) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        const double lam = effective_eigenvalue(eigenvalues[i], spec);
        if (lam > 0.0) sum += std::pow(lam, spec.alpha);
    }
    return sum;
}

}  // namespace

void EntropySpec::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("entropy alpha must be positive");
    if (alpha == 1.0) throw UsageError("entropy alpha must differ from 1");
    if (!(eig_floor >= 0.0)) throw UsageError("eigenvalue floor must be >= 0");
}

EigenDecomposition symmetric_eigen(const Eigen::Ref<const Matrix>& M, bool vectors) {
    require_square(M, "symmetric_eigen");
    const Matrix sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");

    // Eigen returns ascending order.
    EigenDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    if (vectors) out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

double spectral_entropy(const Eigen::Ref<const Matrix>& A, const EntropySpec& spec) {
    spec.validate();
    const EigenDecomposition eig = symmetric_eigen(A, false);
    const double trace_power = power_trace(eig.eigenvalues, spec);
    if (!(trace_power > 0.0)) throw NumericalError("tr(A^alpha) is not positive; matrix has no spectrum above the floor");
    return std::log2(trace_power) / (1.0 - spec.alpha);
}

Matrix spectral_entropy_gradient(const Eigen::Ref<const Matrix>& A, const EntropySpec& spec) {
    spec.validate();
    const EigenDecomposition eig = symmetric_eigen(A, true);
    const Eigen::Index n = eig.eigenvalues.size();

    Vector weights(n);
    double trace_power = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = effective_eigenvalue(eig.eigenvalues[i], spec);
        if (lam > 0.0) {
            trace_power += std::pow(lam, spec.alpha);
            weights[i] = std::pow(lam, spec.alpha - 1.0);
        } else {
            if (spec.alpha < 1.0 && spec.eig_floor == 0.0)
                throw NumericalError("zero eigenvalue with alpha < 1 and no eigenvalue floor: lambda^(alpha-1) diverges");
            weights[i] = 0.0;
        }
    }
    if (!(trace_power > 0.0)) throw NumericalError("tr(A^alpha) is not positive; matrix has no spectrum above the floor");

    const double coef = spec.alpha / ((1.0 - spec.alpha) * trace_power * std::numbers::ln2);
    const Matrix& U = eig.eigenvectors;
    Matrix G = U * (coef * weights).asDiagonal() * U.transpose();
    return 0.5 * (G + G.transpose());
}

double renyi_entropy(const NormalizedGram& A, const EntropySpec& spec) {
    return spectral_entropy(A.matrix(), spec);
}

double joint_entropy(const NormalizedGram& A, const NormalizedGram& B, const EntropySpec& spec) {
    return renyi_entropy(hadamard_joint(A, B), spec);
}

double conditional_entropy(const NormalizedGram& A, const NormalizedGram& B, const EntropySpec& spec) {
    return joint_entropy(A, B, spec) - renyi_entropy(B, spec);
}

Matrix marginal_entropy_gradient(const NormalizedGram& B, const EntropySpec& spec) {
    return spectral_entropy_gradient(B.matrix(), spec);
}

Matrix joint_entropy_gradient(const NormalizedGram& A_x, const NormalizedGram& B, const EntropySpec& spec) {
    if (A_x.size() != B.size()) throw UsageError("joint_entropy_gradient: size mismatch");
    const double n = static_cast<double>(B.size());
    const Matrix dS_dC = spectral_entropy_gradient(hadamard_joint(A_x, B).matrix(), spec);
    return (n * A_x.matrix()).cwiseProduct(dS_dC);
}

}  // namespace rdae
