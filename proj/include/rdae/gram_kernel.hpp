#pragma once

#include "rdae/types.hpp"

namespace rdae {

/// Gaussian kernel bandwidth together with the 1/n normalization count.
struct KernelSpec {
    double sigma = 1.0;
    double n = 1.0;

    void validate() const;
};

/// N×N symmetric, trace-one, PSD similarity matrix with every diagonal
/// entry exactly 1/N. Only produced by the factories below, or by
/// `from_matrix` which checks the invariants.
class NormalizedGram {
public:
    const Matrix& matrix() const noexcept { return m_; }
    Eigen::Index size() const noexcept { return m_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// Wraps an arbitrary matrix after checking symmetry, unit trace,
    /// diagonal 1/N and entry range. Throws UsageError otherwise.
    static NormalizedGram from_matrix(Matrix m);

private:
    explicit NormalizedGram(Matrix m) : m_(std::move(m)) {}
    Matrix m_;

    friend NormalizedGram normalized_gram(const PointMatrix&, double);
    friend NormalizedGram hadamard_joint(const NormalizedGram&, const NormalizedGram&);
};

/// (1/n)·exp(−‖xi−xj‖²/(2σ²)).
double gaussian_kernel(const Eigen::Ref<const Vector>& xi, const Eigen::Ref<const Vector>& xj,
                       const KernelSpec& spec);

/// A_ij = (1/N)·exp(−‖xi−xj‖²/(2σ²)); diagonal written as exactly 1/N.
/// Distances are accumulated coordinate-wise, never through the
/// ‖a‖²+‖b‖²−2a·b expansion.
NormalizedGram normalized_gram(const PointMatrix& X, double sigma);

/// (A∘B)/tr(A∘B), the Gram matrix of the product kernel.
NormalizedGram hadamard_joint(const NormalizedGram& A, const NormalizedGram& B);

}  // namespace rdae
