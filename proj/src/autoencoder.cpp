#include "rdae/autoencoder.hpp"

#include "rdae/errors.hpp"
#include "rdae/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rdae {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_forward_shapes(const PointMatrix& X, const AutoEncoderParams& params, const ForwardPass& fp) {
    const auto n = X.rows();
    const auto p = params.hidden_units();
    const auto d = params.input_dim();
    if (X.cols() != d || fp.Z.rows() != n || fp.Z.cols() != p || fp.Zhat.rows() != n || fp.Zhat.cols() != p ||
        fp.Gprime.rows() != n || fp.Gprime.cols() != p || fp.Xhat.rows() != n || fp.Xhat.cols() != d)
        throw UsageError("forward pass shapes do not match data " + shape(X) + " and " + std::to_string(p) +
                         " hidden units");
}

}  // namespace

std::string_view to_string(Activation kind) noexcept {
    switch (kind) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::logsig: return "logsig";
        case Activation::satlu: return "satlu";
        case Activation::softplus: return "softplus";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    for (Activation kind : kAllActivations)
        if (to_string(kind) == name) return kind;
    throw UsageError("unknown activation '" + std::string(name) + "' (expected linear|relu|logsig|satlu|softplus)");
}

void AutoEncoderParams::validate() const {
    const auto p = W.rows();
    const auto d = W.cols();
    if (p < 1 || d < 1) throw UsageError("parameters: empty encoder matrix");
    if (c.size() != p || A.rows() != d || A.cols() != p || b.size() != d)
        throw UsageError("parameters: inconsistent shapes W " + shape(W) + ", c " + std::to_string(c.size()) +
                         ", A " + shape(A) + ", b " + std::to_string(b.size()));
    if (!W.allFinite() || !c.allFinite() || !A.allFinite() || !b.allFinite())
        throw UsageError("parameters: non-finite entry");
}

AutoEncoderParams glorot_uniform_params(Eigen::Index d, Eigen::Index p, Activation kind, std::uint64_t seed) {
    if (d < 1 || p < 1) throw UsageError("glorot_uniform_params: dimensions must be positive");
    const double r = std::sqrt(6.0 / static_cast<double>(d + p));
    const CounterRng rng(seed, 0x1417);
    const CounterRng enc = rng.split(0), dec = rng.split(1);

    AutoEncoderParams params;
    params.activation = kind;
    params.W.resize(p, d);
    params.A.resize(d, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            params.W(i, j) = r * (2.0 * enc.uniform(static_cast<std::uint64_t>(i * d + j)) - 1.0);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            params.A(i, j) = r * (2.0 * dec.uniform(static_cast<std::uint64_t>(i * p + j)) - 1.0);
    params.c = Vector::Zero(p);
    params.b = Vector::Zero(d);
    return params;
}

ParamGrads ParamGrads::zeros_like(const AutoEncoderParams& params) {
    return {Matrix::Zero(params.W.rows(), params.W.cols()), Vector::Zero(params.c.size()),
            Matrix::Zero(params.A.rows(), params.A.cols()), Vector::Zero(params.b.size())};
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& o) {
    dW += o.dW;
    dc += o.dc;
    dA += o.dA;
    db += o.db;
    return *this;
}

ParamGrads& ParamGrads::operator-=(const ParamGrads& o) {
    dW -= o.dW;
    dc -= o.dc;
    dA -= o.dA;
    db -= o.db;
    return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
    dW *= s;
    dc *= s;
    dA *= s;
    db *= s;
    return *this;
}

bool ParamGrads::all_finite() const {
    return dW.allFinite() && dc.allFinite() && dA.allFinite() && db.allFinite();
}

void activation_apply(Activation kind, const Matrix& Z, Matrix& Zhat, Matrix& Gprime) {
    if (!Z.allFinite()) throw UsageError("activation_apply: non-finite pre-activation");
    Zhat.resize(Z.rows(), Z.cols());
    Gprime.resize(Z.rows(), Z.cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        for (Eigen::Index i = 0; i < Z.rows(); ++i) {
            const double z = Z(i, j);
            double g = 0.0, dg = 0.0;
            switch (kind) {
                case Activation::linear:
                    g = z;
                    dg = 1.0;
                    break;
                case Activation::relu:
                    g = z > 0.0 ? z : 0.0;
                    dg = z > 0.0 ? 1.0 : 0.0;
                    break;
                case Activation::logsig: {
                    const double s = logistic(z);
                    g = s;
                    dg = s * (1.0 - s);
                    break;
                }
                case Activation::satlu:
                    g = std::max(0.0, z) - std::max(0.0, z - 1.0);
                    dg = (z > 0.0 && z < 1.0) ? 1.0 : 0.0;
                    break;
                case Activation::softplus:
                    g = softplus(z);
                    dg = logistic(z);
                    break;
                default: throw UsageError("activation_apply: unknown activation kind");
            }
            Zhat(i, j) = g;
            Gprime(i, j) = dg;
        }
    }
}

ForwardPass forward(const PointMatrix& X, const AutoEncoderParams& params) {
    params.validate();
    require_points(X, 1, "forward");
    if (X.cols() != params.input_dim())
        throw UsageError("forward: data has " + std::to_string(X.cols()) + " columns, encoder expects " +
                         std::to_string(params.input_dim()));
    ForwardPass fp;
    fp.Z = X * params.W.transpose();
    fp.Z.rowwise() += params.c.transpose();
    activation_apply(params.activation, fp.Z, fp.Zhat, fp.Gprime);
    fp.Xhat = fp.Zhat * params.A.transpose();
    fp.Xhat.rowwise() += params.b.transpose();
    return fp;
}

double empirical_distortion(const PointMatrix& X, const Matrix& Xhat) {
    if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols())
        throw UsageError("empirical_distortion: shape mismatch " + shape(X) + " vs " + shape(Xhat));
    if (X.rows() == 0) throw UsageError("empirical_distortion: empty data");
    return (X - Xhat).squaredNorm() / static_cast<double>(X.rows());
}

ParamGrads distortion_gradients(const PointMatrix& X, const AutoEncoderParams& params, const ForwardPass& fp) {
    return distortion_gradients(X, X, params, fp);
}

ParamGrads distortion_gradients(const PointMatrix& input, const PointMatrix& target, const AutoEncoderParams& params,
                                const ForwardPass& fp) {
    require_forward_shapes(input, params, fp);
    if (target.rows() != input.rows() || target.cols() != input.cols())
        throw UsageError("distortion_gradients: target shape " + shape(target) + " differs from input " + shape(input));

    const double scale = -2.0 / static_cast<double>(input.rows());
    const Matrix residual = target - fp.Xhat;                                 // N×d
    const Matrix back = (residual * params.A).cwiseProduct(fp.Gprime);        // N×p

    ParamGrads g;
    g.dA = scale * residual.transpose() * fp.Zhat;
    g.db = scale * residual.colwise().sum().transpose();
    g.dW = scale * back.transpose() * input;
    g.dc = scale * back.colwise().sum().transpose();
    return g;
}

LaplacianWeights laplacian_weights(const Matrix& dS_dK, const NormalizedGram& K_hat, double sigma_hat) {
    if (dS_dK.rows() != K_hat.size() || dS_dK.cols() != K_hat.size())
        throw UsageError("laplacian_weights: gradient " + shape(dS_dK) + " does not match Gram size " +
                         std::to_string(K_hat.size()));
    if (!(sigma_hat > 0.0)) throw UsageError("laplacian_weights: sigma must be positive");

    const Eigen::Index n = K_hat.size();
    const double scale = 1.0 / (2.0 * sigma_hat * sigma_hat);
    LaplacianWeights out;
    out.M = dS_dK.cwiseProduct(scale * K_hat.matrix());
    out.L = -out.M;
    for (Eigen::Index i = 0; i < n; ++i) {
        double degree = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) degree += out.M(i, j);
        // Self-loops cancel in D(M) − M.
        out.L(i, i) = degree;
    }
    return out;
}

ParamGrads entropy_parameter_gradients(const PointMatrix& X, const AutoEncoderParams& params, const ForwardPass& fp,
                                       const LaplacianWeights& L) {
    require_forward_shapes(X, params, fp);
    if (L.L.rows() != X.rows() || L.L.cols() != X.rows())
        throw UsageError("entropy_parameter_gradients: Laplacian size does not match batch");

    const Matrix zl = fp.Zhat.transpose() * L.L;                                        // p×N
    const Matrix back = ((params.A.transpose() * params.A) * zl).cwiseProduct(fp.Gprime.transpose());  // p×N

    ParamGrads g;
    g.dA = -4.0 * params.A * (zl * fp.Zhat);
    g.db = Vector::Zero(params.input_dim());
    g.dW = -4.0 * back * X;
    g.dc = -4.0 * back.rowwise().sum();
    return g;
}

void KernelBandwidths::validate() const {
    if (!(sigma_x > 0.0) || !std::isfinite(sigma_x)) throw UsageError("sigma_x must be positive");
    if (!(sigma_xhat > 0.0) || !std::isfinite(sigma_xhat)) throw UsageError("sigma_xhat must be positive");
}

NormalizedGram reconstruction_gram(const ForwardPass& fp, const AutoEncoderParams& params, double sigma_hat) {
    const Matrix offset_free = fp.Zhat * params.A.transpose();
    return normalized_gram(offset_free, sigma_hat);
}

LagrangianTerms lagrangian_terms(const PointMatrix& X, const AutoEncoderParams& params, double mu,
                                 const EntropySpec& entropy, const KernelBandwidths& kernel) {
    kernel.validate();
    return lagrangian_terms(X, normalized_gram(X, kernel.sigma_x), params, mu, entropy, kernel);
}

LagrangianTerms lagrangian_terms(const PointMatrix& X, const NormalizedGram& K_x, const AutoEncoderParams& params,
                                 double mu, const EntropySpec& entropy, const KernelBandwidths& kernel) {
    if (!(mu >= 0.0)) throw UsageError("lagrangian: mu must be >= 0");
    kernel.validate();
    entropy.validate();
    const ForwardPass fp = forward(X, params);
    const NormalizedGram K_hat = reconstruction_gram(fp, params, kernel.sigma_xhat);

    LagrangianTerms t;
    t.joint = joint_entropy(K_x, K_hat, entropy);
    t.marginal = renyi_entropy(K_hat, entropy);
    t.distortion = empirical_distortion(X, fp.Xhat);
    t.value = t.joint - t.marginal - mu * t.distortion;
    return t;
}

double lagrangian(const PointMatrix& X, const AutoEncoderParams& params, double mu, const EntropySpec& entropy,
                  const KernelBandwidths& kernel) {
    return lagrangian_terms(X, params, mu, entropy, kernel).value;
}

ParamGrads lagrangian_gradients(const PointMatrix& X, const AutoEncoderParams& params, double mu,
                                const EntropySpec& entropy, const KernelBandwidths& kernel) {
    kernel.validate();
    return lagrangian_gradients(X, normalized_gram(X, kernel.sigma_x), params, mu, entropy, kernel);
}

ParamGrads lagrangian_gradients(const PointMatrix& X, const NormalizedGram& K_x, const AutoEncoderParams& params,
                                double mu, const EntropySpec& entropy, const KernelBandwidths& kernel) {
    if (!(mu >= 0.0)) throw UsageError("lagrangian_gradients: mu must be >= 0");
    kernel.validate();
    entropy.validate();
    const ForwardPass fp = forward(X, params);
    const NormalizedGram K_hat = reconstruction_gram(fp, params, kernel.sigma_xhat);

    const LaplacianWeights P = laplacian_weights(marginal_entropy_gradient(K_hat, entropy), K_hat, kernel.sigma_xhat);
    const LaplacianWeights Q = laplacian_weights(joint_entropy_gradient(K_x, K_hat, entropy), K_hat, kernel.sigma_xhat);

    ParamGrads grads = entropy_parameter_gradients(X, params, fp, Q);
    grads -= entropy_parameter_gradients(X, params, fp, P);
    if (mu != 0.0) {
        ParamGrads dist = distortion_gradients(X, params, fp);
        dist *= mu;
        grads -= dist;
    }
    return grads;
}

void apply_step(AutoEncoderParams& params, const ParamGrads& grads, double step) {
    params.W += step * grads.dW;
    params.c += step * grads.dc;
    params.A += step * grads.dA;
    params.b += step * grads.db;
}

// --- checkpoint -------------------------------------------------------------

namespace {

void write_row(std::ostream& os, const double* values, Eigen::Index count, Eigen::Index stride) {
    char buf[32];
    for (Eigen::Index k = 0; k < count; ++k) {
        if (k) os << ',';
        std::snprintf(buf, sizeof buf, "%.17g", values[k * stride]);
        os << buf;
    }
    os << '\n';
}

void write_matrix(std::ostream& os, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) write_row(os, m.data() + i, m.cols(), m.rows());
}

std::vector<double> parse_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string field = line.substr(pos, end - pos);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
            throw FormatError("checkpoint line " + std::to_string(line_no) + ": bad number '" + field + "'");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

class LineReader {
public:
    explicit LineReader(std::istream& is) : is_(is) {}
    std::string next(const char* expecting) {
        std::string line;
        if (!std::getline(is_, line)) throw FormatError(std::string("checkpoint truncated, expected ") + expecting);
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
    std::size_t line_no() const { return line_no_; }

private:
    std::istream& is_;
    std::size_t line_no_ = 0;
};

Matrix read_block(LineReader& in, Eigen::Index rows, Eigen::Index cols, const char* name) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const std::string line = in.next(name);
        const auto values = parse_csv_line(line, in.line_no());
        if (static_cast<Eigen::Index>(values.size()) != cols)
            throw FormatError(std::string("checkpoint block ") + name + ": expected " + std::to_string(cols) +
                              " values, got " + std::to_string(values.size()));
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(j)];
    }
    return m;
}

void expect_separator(LineReader& in) {
    if (in.next("---") != "---") throw FormatError("checkpoint: missing '---' block separator");
}

}  // namespace

void write_checkpoint(std::ostream& os, const AutoEncoderParams& params) {
    params.validate();
    os << "RDAE1\n" << params.input_dim() << ' ' << params.hidden_units() << ' ' << to_string(params.activation) << '\n';
    write_matrix(os, params.W);
    os << "---\n";
    write_row(os, params.c.data(), params.c.size(), 1);
    os << "---\n";
    write_matrix(os, params.A);
    os << "---\n";
    write_row(os, params.b.data(), params.b.size(), 1);
}

AutoEncoderParams read_checkpoint(std::istream& is) {
    LineReader in(is);
    if (in.next("magic") != "RDAE1") throw FormatError("checkpoint: missing RDAE1 magic line");
    std::istringstream header(in.next("dimensions"));
    long long d = 0, p = 0;
    std::string act;
    if (!(header >> d >> p >> act) || d < 1 || p < 1) throw FormatError("checkpoint: bad 'd p activation' line");

    AutoEncoderParams params;
    try {
        params.activation = parse_activation(act);
    } catch (const UsageError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    params.W = read_block(in, p, d, "W");
    expect_separator(in);
    params.c = read_block(in, 1, p, "c").row(0).transpose();
    expect_separator(in);
    params.A = read_block(in, d, p, "A");
    expect_separator(in);
    params.b = read_block(in, 1, d, "b").row(0).transpose();
    std::string rest;
    while (std::getline(is, rest))
        if (rest.find_first_not_of(" \t\r") != std::string::npos) throw FormatError("checkpoint: trailing content after b");
    return params;
}

void save_checkpoint(const std::string& path, const AutoEncoderParams& params) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_checkpoint(os, params);
    if (!os) throw IoError("write failed for '" + path + "'");
}

AutoEncoderParams load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(is);
}

}  // namespace rdae
