#pragma once

#include "rdae/gram_kernel.hpp"
#include "rdae/matrix_entropy.hpp"
#include "rdae/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace rdae {

enum class Activation { linear, relu, logsig, satlu, softplus };

std::string_view to_string(Activation kind) noexcept;
/// Throws UsageError listing the accepted names.
Activation parse_activation(std::string_view name);

inline constexpr Activation kAllActivations[] = {Activation::linear, Activation::relu, Activation::logsig,
                                                 Activation::satlu, Activation::softplus};

/// Encoder ẑ = g(Wx + c), decoder x̂ = Aẑ + b. Encoder and decoder weights
/// are independent (no tying).
struct AutoEncoderParams {
    Matrix W;  // p×d
    Vector c;  // p
    Matrix A;  // d×p
    Vector b;  // d
    Activation activation = Activation::linear;

    Eigen::Index input_dim() const noexcept { return W.cols(); }
    Eigen::Index hidden_units() const noexcept { return W.rows(); }

    /// Checks mutual shape consistency and finiteness.
    void validate() const;
    bool operator==(const AutoEncoderParams&) const = default;
};

/// W and A uniform in ±√(6/(d+p)), zero biases; a pure function of the seed.
AutoEncoderParams glorot_uniform_params(Eigen::Index d, Eigen::Index p, Activation kind, std::uint64_t seed);

struct ForwardPass {
    Matrix Z;       // N×p, XWᵀ + 1cᵀ
    Matrix Zhat;    // N×p, g(Z)
    Matrix Gprime;  // N×p, g′(Z)
    Matrix Xhat;    // N×d, ẐAᵀ + 1bᵀ
};

struct ParamGrads {
    Matrix dW;
    Vector dc;
    Matrix dA;
    Vector db;

    static ParamGrads zeros_like(const AutoEncoderParams& params);
    ParamGrads& operator+=(const ParamGrads& other);
    ParamGrads& operator-=(const ParamGrads& other);
    ParamGrads& operator*=(double s);
    bool all_finite() const;
};

struct LaplacianWeights {
    Matrix M;  // affinity
    Matrix L;  // diag(M·1) − M
};

/// Elementwise g(Z) and g′(Z). Kinks take derivative 0 (relu at 0, satlu
/// at 0 and 1).
void activation_apply(Activation kind, const Matrix& Z, Matrix& Zhat, Matrix& Gprime);

ForwardPass forward(const PointMatrix& X, const AutoEncoderParams& params);

/// (1/N)·Σᵢ‖xᵢ − x̂ᵢ‖².
double empirical_distortion(const PointMatrix& X, const Matrix& Xhat);

/// Gradients of the empirical distortion. `fp` must come from forward(X, params).
ParamGrads distortion_gradients(const PointMatrix& X, const AutoEncoderParams& params, const ForwardPass& fp);

/// Same with a separate encoder input, for corrupted-input training:
/// `fp` = forward(input, params), the residual is taken against `target`.
ParamGrads distortion_gradients(const PointMatrix& input, const PointMatrix& target, const AutoEncoderParams& params,
                                const ForwardPass& fp);

/// M = dS_dK ∘ K̂/(2σ̂²), L = D(M) − M.
LaplacianWeights laplacian_weights(const Matrix& dS_dK, const NormalizedGram& K_hat, double sigma_hat);

/// Chain rule from a matrix-level entropy gradient (folded into L) to the
/// parameters. db is identically zero.
ParamGrads entropy_parameter_gradients(const PointMatrix& X, const AutoEncoderParams& params, const ForwardPass& fp,
                                       const LaplacianWeights& L);

struct KernelBandwidths {
    double sigma_x = 1.0;
    double sigma_xhat = 1.0;

    void validate() const;
};

/// The three pieces of the objective plus their combination
/// value = joint − marginal − μ·distortion.
struct LagrangianTerms {
    double joint = 0.0;       // S_α(N·K_X∘K_X̂)
    double marginal = 0.0;    // S_α(K_X̂)
    double distortion = 0.0;  // D_emp
    double value = 0.0;
};

/// The kernel on reconstructions is evaluated on ẐAᵀ; the decoder bias
/// cancels in every pairwise difference.
NormalizedGram reconstruction_gram(const ForwardPass& fp, const AutoEncoderParams& params, double sigma_hat);

LagrangianTerms lagrangian_terms(const PointMatrix& X, const AutoEncoderParams& params, double mu,
                                 const EntropySpec& entropy, const KernelBandwidths& kernel);
/// Variant reusing a precomputed input Gram K_X = normalized_gram(X, σ_x).
LagrangianTerms lagrangian_terms(const PointMatrix& X, const NormalizedGram& K_x, const AutoEncoderParams& params,
                                 double mu, const EntropySpec& entropy, const KernelBandwidths& kernel);

double lagrangian(const PointMatrix& X, const AutoEncoderParams& params, double mu, const EntropySpec& entropy,
                  const KernelBandwidths& kernel);

ParamGrads lagrangian_gradients(const PointMatrix& X, const AutoEncoderParams& params, double mu,
                                const EntropySpec& entropy, const KernelBandwidths& kernel);
ParamGrads lagrangian_gradients(const PointMatrix& X, const NormalizedGram& K_x, const AutoEncoderParams& params,
                                double mu, const EntropySpec& entropy, const KernelBandwidths& kernel);

/// θ ← θ + step·g for every block.
void apply_step(AutoEncoderParams& params, const ParamGrads& grads, double step);

// Checkpoint text format:
//   RDAE1
//   d p activation
//   W rows (p lines, d values) / --- / c (1 line) / --- / A rows (d lines, p values) / --- / b (1 line)
// Values are written with 17 significant digits.
void write_checkpoint(std::ostream& os, const AutoEncoderParams& params);
AutoEncoderParams read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const AutoEncoderParams& params);
AutoEncoderParams load_checkpoint(const std::string& path);

}  // namespace rdae
