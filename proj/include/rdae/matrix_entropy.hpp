#pragma once

#include "rdae/gram_kernel.hpp"
#include "rdae/types.hpp"

namespace rdae {

struct EntropySpec {
    double alpha = 1.01;
    /// Eigenvalues below this are treated as exact zeros.
    double eig_floor = 1e-12;

    void validate() const;
};

/// Eigenvalues in descending order with matching orthonormal columns.
struct EigenDecomposition {
    Vector eigenvalues;
    Matrix eigenvectors;
};

/// Symmetrizes M as (M+Mᵀ)/2 and decomposes it. With `vectors == false`
/// the eigenvector matrix is left empty.
EigenDecomposition symmetric_eigen(const Eigen::Ref<const Matrix>& M, bool vectors = true);

/// (1/(1−α))·log₂ Σ λᵢ^α for any symmetric trace-one PSD matrix, in bits.
/// Eigenvalues are clipped to [0, 1]; a value below −1e−8 raises
/// NumericalError naming it.
double spectral_entropy(const Eigen::Ref<const Matrix>& A, const EntropySpec& spec);

/// ∂S/∂A = α/((1−α)·tr(A^α)·ln 2) · U Λ^(α−1) Uᵀ, exactly symmetric.
Matrix spectral_entropy_gradient(const Eigen::Ref<const Matrix>& A, const EntropySpec& spec);

double renyi_entropy(const NormalizedGram& A, const EntropySpec& spec);
double joint_entropy(const NormalizedGram& A, const NormalizedGram& B, const EntropySpec& spec);
/// joint_entropy(A, B) − renyi_entropy(B).
double conditional_entropy(const NormalizedGram& A, const NormalizedGram& B, const EntropySpec& spec);

/// Gradient of renyi_entropy(B) with respect to the entries of B.
Matrix marginal_entropy_gradient(const NormalizedGram& B, const EntropySpec& spec);

/// Gradient of S(N·A_x∘B) with respect to the entries of B:
/// N·A_x ∘ ∂S/∂C evaluated at C = N·A_x∘B.
Matrix joint_entropy_gradient(const NormalizedGram& A_x, const NormalizedGram& B, const EntropySpec& spec);

}  // namespace rdae
