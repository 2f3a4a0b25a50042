#include "rdae/autoencoder.hpp"
#include "rdae/errors.hpp"
#include "rdae/gram_kernel.hpp"
#include "rdae/matrix_entropy.hpp"
#include "rdae/training.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace rdae;

namespace {

AutoEncoderParams random_params(Eigen::Index d, Eigen::Index p, Activation kind, std::uint64_t seed) {
    return make_check_instance(4, d, p, kind, seed).params;
}

AutoEncoderParams identity_params(Eigen::Index d) {
    AutoEncoderParams p;
    p.W = Matrix::Identity(d, d);
    p.c = Vector::Zero(d);
    p.A = Matrix::Identity(d, d);
    p.b = Vector::Zero(d);
    p.activation = Activation::linear;
    return p;
}

double naive_activation(Activation kind, double z) {
    switch (kind) {
        case Activation::linear: return z;
        case Activation::relu: return z > 0 ? z : 0.0;
        case Activation::logsig: return 1.0 / (1.0 + std::exp(-z));
        case Activation::satlu: return z < 0 ? 0.0 : (z > 1 ? 1.0 : z);
        case Activation::softplus: return std::log(1.0 + std::exp(z));
    }
    return 0.0;
}

// every parameter entry, in W, c, A, b order
std::vector<double*> entries(AutoEncoderParams& p) {
    std::vector<double*> out;
    for (Eigen::Index i = 0; i < p.W.size(); ++i) out.push_back(p.W.data() + i);
    for (Eigen::Index i = 0; i < p.c.size(); ++i) out.push_back(p.c.data() + i);
    for (Eigen::Index i = 0; i < p.A.size(); ++i) out.push_back(p.A.data() + i);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) out.push_back(p.b.data() + i);
    return out;
}

std::vector<double> flatten(const ParamGrads& g) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < g.dW.size(); ++i) out.push_back(g.dW.data()[i]);
    for (Eigen::Index i = 0; i < g.dc.size(); ++i) out.push_back(g.dc.data()[i]);
    for (Eigen::Index i = 0; i < g.dA.size(); ++i) out.push_back(g.dA.data()[i]);
    for (Eigen::Index i = 0; i < g.db.size(); ++i) out.push_back(g.db.data()[i]);
    return out;
}

template <class F>
std::vector<double> central_differences(AutoEncoderParams p, F&& f, double h) {
    std::vector<double> out;
    for (double* e : entries(p)) {
        const double keep = *e;
        *e = keep + h;
        const double up = f(p);
        *e = keep - h;
        const double down = f(p);
        *e = keep;
        out.push_back((up - down) / (2 * h));
    }
    return out;
}

double worst_relative(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], f = numeric[i];
        const double err = std::abs(a) < 1e-8 ? std::abs(a - f) * 1e3 : std::abs(a - f) / std::max(std::abs(a), std::abs(f));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

TEST_CASE("activation values") {
    Matrix z(1, 1), zh, gp;
    z << 0.0;
    activation_apply(Activation::logsig, z, zh, gp);
    CHECK(zh(0, 0) == 0.5);
    CHECK(gp(0, 0) == 0.25);
    z << -3.0;
    activation_apply(Activation::relu, z, zh, gp);
    CHECK(zh(0, 0) == 0.0);
    CHECK(gp(0, 0) == 0.0);
    z << 0.4;
    activation_apply(Activation::satlu, z, zh, gp);
    CHECK(zh(0, 0) == 0.4);
    CHECK(gp(0, 0) == 1.0);
    z << 1.7;
    activation_apply(Activation::satlu, z, zh, gp);
    CHECK(zh(0, 0) == 1.0);
    CHECK(gp(0, 0) == 0.0);
    // kinks take derivative zero
    z << 0.0;
    activation_apply(Activation::relu, z, zh, gp);
    CHECK(gp(0, 0) == 0.0);
    activation_apply(Activation::satlu, z, zh, gp);
    CHECK(gp(0, 0) == 0.0);
    z << 1.0;
    activation_apply(Activation::satlu, z, zh, gp);
    CHECK(gp(0, 0) == 0.0);
    // softplus stays finite far out
    z << 800.0;
    activation_apply(Activation::softplus, z, zh, gp);
    CHECK(zh(0, 0) == 800.0);
    CHECK(gp(0, 0) == 1.0);
    z << -800.0;
    activation_apply(Activation::softplus, z, zh, gp);
    CHECK(zh(0, 0) >= 0.0);
    CHECK(std::isfinite(zh(0, 0)));
}

TEST_CASE("activation derivatives match finite differences away from kinks") {
    const double h = 1e-6;
    for (Activation kind : kAllActivations)
        for (double z0 : {-2.3, -0.6, 0.3, 0.77, 2.9}) {
            Matrix z(1, 3), zh, gp;
            z << z0 - h, z0, z0 + h;
            activation_apply(kind, z, zh, gp);
            CHECK(zh(0, 1) == doctest::Approx(naive_activation(kind, z0)).epsilon(1e-14));
            CHECK(gp(0, 1) == doctest::Approx((zh(0, 2) - zh(0, 0)) / (2 * h)).epsilon(1e-7));
        }
}

TEST_CASE("activation names round trip") {
    for (Activation kind : kAllActivations) CHECK(parse_activation(to_string(kind)) == kind);
    CHECK_THROWS_AS(parse_activation("tanh"), UsageError);
}

TEST_CASE("forward hand cases") {
    const PointMatrix X = test::normal_points(6, 3, 1);
    AutoEncoderParams zero;
    zero.W = Matrix::Zero(4, 3);
    zero.c = Vector::Zero(4);
    zero.A = Matrix::Zero(3, 4);
    zero.b = Vector::Zero(3);
    zero.activation = Activation::logsig;
    const ForwardPass fz = forward(X, zero);
    CHECK((fz.Zhat.array() == 0.5).all());
    CHECK((fz.Xhat.array() == 0.0).all());

    CHECK(forward(X, identity_params(3)).Xhat == X);
}

TEST_CASE("forward matches a naive loop") {
    for (Activation kind : kAllActivations) {
        const PointMatrix X = test::normal_points(7, 3, 2);
        const AutoEncoderParams p = random_params(3, 5, kind, 9);
        const ForwardPass fp = forward(X, p);
        for (Eigen::Index i = 0; i < 7; ++i)
            for (Eigen::Index k = 0; k < 3; ++k) {
                double xhat = p.b[k];
                for (Eigen::Index j = 0; j < 5; ++j) {
                    double z = p.c[j];
                    for (Eigen::Index m = 0; m < 3; ++m) z += p.W(j, m) * X(i, m);
                    xhat += p.A(k, j) * naive_activation(kind, z);
                }
                CHECK(std::abs(fp.Xhat(i, k) - xhat) < 1e-12);
            }
    }
}

TEST_CASE("forward is deterministic and checks shapes") {
    const PointMatrix X = test::normal_points(9, 2, 3);
    const AutoEncoderParams p = random_params(2, 4, Activation::softplus, 1);
    const ForwardPass a = forward(X, p), b = forward(X, p);
    CHECK(a.Z == b.Z);
    CHECK(a.Zhat == b.Zhat);
    CHECK(a.Gprime == b.Gprime);
    CHECK(a.Xhat == b.Xhat);
    CHECK_THROWS_AS(forward(test::normal_points(3, 5, 1), p), UsageError);
    AutoEncoderParams bad = p;
    bad.c = Vector::Zero(3);
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("empirical distortion") {
    const PointMatrix X = test::normal_points(5, 2, 4);
    CHECK(empirical_distortion(X, X) == 0.0);
    PointMatrix one(1, 1), zero(1, 1);
    one << 2.0;
    zero << 0.0;
    CHECK(empirical_distortion(one, zero) == 4.0);
    PointMatrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0, 1, 3, 1;
    CHECK(empirical_distortion(a, b) == 5.5);
    CHECK_THROWS_AS(empirical_distortion(a, PointMatrix(3, 2)), UsageError);
}

TEST_CASE("distortion gradients") {
    SUBCASE("perfect reconstruction gives exact zeros") {
        const PointMatrix X = test::normal_points(6, 3, 5);
        const AutoEncoderParams p = identity_params(3);
        const ParamGrads g = distortion_gradients(X, p, forward(X, p));
        CHECK((g.dW.array() == 0.0).all());
        CHECK((g.dc.array() == 0.0).all());
        CHECK((g.dA.array() == 0.0).all());
        CHECK((g.db.array() == 0.0).all());
    }
    SUBCASE("finite differences") {
        for (Activation kind : kAllActivations) {
            const CheckInstance inst = make_check_instance(8, 2, 3, kind, 21);
            auto f = [&](const AutoEncoderParams& q) { return empirical_distortion(inst.X, forward(inst.X, q).Xhat); };
            const auto an = flatten(distortion_gradients(inst.X, inst.params, forward(inst.X, inst.params)));
            CHECK(worst_relative(an, central_differences(inst.params, f, 1e-5)) < 1e-6);
        }
    }
    SUBCASE("single linear sample") {
        PointMatrix x(1, 2);
        x << 0.7, -1.3;
        const AutoEncoderParams p = random_params(2, 3, Activation::linear, 3);
        const Vector xv = x.row(0).transpose();
        const Vector z = p.W * xv + p.c;
        const Vector r = xv - (p.A * z + p.b);
        const ParamGrads g = distortion_gradients(x, p, forward(x, p));
        CHECK((g.db - (-2.0 * r)).norm() < 1e-14);
        CHECK((g.dA - (-2.0 * r * z.transpose())).norm() < 1e-14);
        CHECK((g.dc - (-2.0 * p.A.transpose() * r)).norm() < 1e-14);
        CHECK((g.dW - (-2.0 * p.A.transpose() * r * xv.transpose())).norm() < 1e-14);
    }
}

TEST_CASE("laplacian weights") {
    Matrix kh(2, 2);
    kh << 0.5, 0.2, 0.2, 0.5;
    const NormalizedGram K = NormalizedGram::from_matrix(kh);
    const LaplacianWeights zero = laplacian_weights(Matrix::Zero(2, 2), K, 0.7);
    CHECK((zero.M.array() == 0.0).all());
    CHECK((zero.L.array() == 0.0).all());

    Matrix g(2, 2);
    g << 1.5, -0.8, -0.8, 2.5;
    const double sigma = 0.7;
    const LaplacianWeights lw = laplacian_weights(g, K, sigma);
    const double m12 = -0.8 * 0.2 / (2 * sigma * sigma);
    CHECK(lw.M(0, 1) == doctest::Approx(m12).epsilon(1e-15));
    CHECK(lw.L(0, 0) == doctest::Approx(m12).epsilon(1e-15));
    CHECK(lw.L(1, 1) == doctest::Approx(m12).epsilon(1e-15));
    CHECK(lw.L(0, 1) == doctest::Approx(-m12).epsilon(1e-15));
    CHECK(lw.L(1, 0) == doctest::Approx(-m12).epsilon(1e-15));

    for (std::uint64_t s = 0; s < 20; ++s) {
        const NormalizedGram R = normalized_gram(test::normal_points(12, 2, s), 0.9);
        const LaplacianWeights l = laplacian_weights(marginal_entropy_gradient(R, {1.01, 1e-12}), R, 0.9);
        CHECK((l.L * Vector::Ones(12)).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK_THROWS_AS(laplacian_weights(Matrix::Zero(3, 3), K, 0.7), UsageError);
}

TEST_CASE("entropy parameter gradients") {
    const double sigma = 1.0;
    const EntropySpec spec{1.01, 1e-12};
    for (Activation kind : kAllActivations) {
        const CheckInstance inst = make_check_instance(8, 2, 3, kind, 31);
        auto marginal = [&](const AutoEncoderParams& q) {
            const ForwardPass fp = forward(inst.X, q);
            return renyi_entropy(reconstruction_gram(fp, q, sigma), spec);
        };
        const ForwardPass fp = forward(inst.X, inst.params);
        const NormalizedGram K = reconstruction_gram(fp, inst.params, sigma);
        const LaplacianWeights L = laplacian_weights(marginal_entropy_gradient(K, spec), K, sigma);
        const ParamGrads g = entropy_parameter_gradients(inst.X, inst.params, fp, L);
        CHECK((g.db.array() == 0.0).all());
        CHECK(worst_relative(flatten(g), central_differences(inst.params, marginal, 1e-5)) < 1e-4);
    }
}

TEST_CASE("collapsed code rows give zero entropy gradients") {
    PointMatrix X(6, 2);
    X.rowwise() = Eigen::RowVector2d(0.3, -0.9);
    const AutoEncoderParams p = random_params(2, 3, Activation::logsig, 2);
    const ForwardPass fp = forward(X, p);
    const NormalizedGram K = reconstruction_gram(fp, p, 0.5);
    const LaplacianWeights L = laplacian_weights(marginal_entropy_gradient(K, {2.0, 1e-12}), K, 0.5);
    const ParamGrads g = entropy_parameter_gradients(X, p, fp, L);
    CHECK(g.dW.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.dc.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.dA.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.db.array() == 0.0).all());
}

TEST_CASE("lagrangian hand cases") {
    const EntropySpec spec{1.01, 1e-12};
    const KernelBandwidths kb{0.8, 0.8};
    const PointMatrix X = test::normal_points(10, 2, 6);
    const NormalizedGram KX = normalized_gram(X, 0.8);

    // collapsed reconstruction: every output equal
    AutoEncoderParams flat = random_params(2, 3, Activation::linear, 4);
    flat.W.setZero();
    const LagrangianTerms t0 = lagrangian_terms(X, flat, 0.0, spec, kb);
    CHECK(t0.joint == doctest::Approx(renyi_entropy(KX, spec)).epsilon(1e-12));
    CHECK(std::abs(t0.marginal) < 1e-12);
    CHECK(t0.value == doctest::Approx(renyi_entropy(KX, spec)).epsilon(1e-12));

    // perfect reconstruction
    const AutoEncoderParams id = identity_params(2);
    const LagrangianTerms t1 = lagrangian_terms(X, id, 0.5, spec, kb);
    const Matrix H = KX.matrix().cwiseProduct(KX.matrix());
    CHECK(t1.distortion == 0.0);
    CHECK(t1.joint == doctest::Approx(spectral_entropy(H / H.trace(), spec)).epsilon(1e-12));
    CHECK(t1.marginal == doctest::Approx(renyi_entropy(KX, spec)).epsilon(1e-12));
    CHECK(t1.value == doctest::Approx(t1.joint - t1.marginal).epsilon(1e-14));

    // linear in mu, strictly decreasing when D > 0
    const AutoEncoderParams p = random_params(2, 3, Activation::logsig, 8);
    const double l1 = lagrangian(X, p, 0.5, spec, kb), l2 = lagrangian(X, p, 1.5, spec, kb);
    const LagrangianTerms t = lagrangian_terms(X, p, 0.5, spec, kb);
    CHECK(t.distortion > 0.0);
    CHECK(l2 < l1);
    CHECK(l1 - l2 == doctest::Approx(t.distortion).epsilon(1e-10));

    // cached input Gram gives the same bits
    const LagrangianTerms tc = lagrangian_terms(X, KX, p, 0.5, spec, kb);
    CHECK(tc.value == t.value);
}

TEST_CASE("entropy terms ignore the decoder bias") {
    const EntropySpec spec{1.01, 1e-12};
    const KernelBandwidths kb{0.6, 0.9};
    const PointMatrix X = test::normal_points(12, 2, 7);
    for (Activation kind : kAllActivations) {
        AutoEncoderParams p = random_params(2, 4, kind, 12);
        const LagrangianTerms before = lagrangian_terms(X, p, 0.5, spec, kb);
        p.b += Vector::Constant(2, 3.1415926);
        const LagrangianTerms after = lagrangian_terms(X, p, 0.5, spec, kb);
        CHECK(before.joint == after.joint);
        CHECK(before.marginal == after.marginal);
    }
}

TEST_CASE("lagrangian gradients") {
    const EntropySpec spec{1.01, 1e-12};
    const KernelBandwidths kb{1.0, 1.0};
    SUBCASE("finite differences, every activation") {
        for (Activation kind : kAllActivations)
            for (double mu : {0.0, 0.5, 5.0}) {
                const CheckInstance inst = make_check_instance(8, 2, 3, kind, 41);
                auto f = [&](const AutoEncoderParams& q) { return lagrangian(inst.X, q, mu, spec, kb); };
                const auto an = flatten(lagrangian_gradients(inst.X, inst.params, mu, spec, kb));
                CHECK(worst_relative(an, central_differences(inst.params, f, 1e-5)) < 1e-4);
            }
    }
    SUBCASE("db is the distortion part alone") {
        const CheckInstance inst = make_check_instance(8, 2, 3, Activation::softplus, 42);
        const double mu = 0.7;
        const ParamGrads g = lagrangian_gradients(inst.X, inst.params, mu, spec, kb);
        const ParamGrads d = distortion_gradients(inst.X, inst.params, forward(inst.X, inst.params));
        CHECK(g.db == Vector(-mu * d.db));
    }
    SUBCASE("large mu points along the negative distortion gradient") {
        const CheckInstance inst = make_check_instance(8, 2, 3, Activation::logsig, 43);
        const auto g = flatten(lagrangian_gradients(inst.X, inst.params, 1e6, spec, kb));
        const auto d = flatten(distortion_gradients(inst.X, inst.params, forward(inst.X, inst.params)));
        double dot = 0, ng = 0, nd = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            dot += g[i] * d[i];
            ng += g[i] * g[i];
            nd += d[i] * d[i];
        }
        CHECK(-dot / std::sqrt(ng * nd) >= 0.999);
    }
    SUBCASE("cached input Gram gives the same gradients") {
        const CheckInstance inst = make_check_instance(9, 2, 3, Activation::relu, 44);
        const ParamGrads a = lagrangian_gradients(inst.X, inst.params, 0.5, spec, kb);
        const ParamGrads b = lagrangian_gradients(inst.X, normalized_gram(inst.X, 1.0), inst.params, 0.5, spec, kb);
        CHECK(flatten(a) == flatten(b));
    }
}

TEST_CASE("apply_step and gradient arithmetic") {
    AutoEncoderParams p = random_params(2, 3, Activation::linear, 5);
    const AutoEncoderParams start = p;
    ParamGrads g = ParamGrads::zeros_like(p);
    g.dW.setConstant(1.0);
    g.db.setConstant(-2.0);
    apply_step(p, g, 0.5);
    CHECK(p.W == Matrix(start.W.array() + 0.5));
    CHECK(p.b == Vector(start.b.array() - 1.0));
    CHECK(p.c == start.c);
    apply_step(p, g, 0.0);
    CHECK(p.W == Matrix(start.W.array() + 0.5));

    ParamGrads h = g;
    h += g;
    h *= 0.5;
    CHECK(flatten(h) == flatten(g));
    h -= g;
    for (double v : flatten(h)) CHECK(v == 0.0);
    CHECK(h.all_finite());
    h.dc[0] = std::nan("");
    CHECK_FALSE(h.all_finite());
}

TEST_CASE("glorot initialisation") {
    const AutoEncoderParams p = glorot_uniform_params(784, 100, Activation::logsig, 3);
    const double r = std::sqrt(6.0 / 884.0);
    CHECK(p.W.rows() == 100);
    CHECK(p.A.rows() == 784);
    CHECK(p.W.cwiseAbs().maxCoeff() <= r);
    CHECK(p.A.cwiseAbs().maxCoeff() <= r);
    CHECK((p.c.array() == 0.0).all());
    CHECK((p.b.array() == 0.0).all());
    CHECK(p == glorot_uniform_params(784, 100, Activation::logsig, 3));
    CHECK_FALSE(p == glorot_uniform_params(784, 100, Activation::logsig, 4));
}

TEST_CASE("checkpoint round trip") {
    for (Activation kind : kAllActivations) {
        AutoEncoderParams p = make_check_instance(4, 3, 5, kind, 77).params;
        p.W(0, 0) = 1.0 / 3.0;
        p.b[1] = -1e-300;
        std::stringstream ss;
        write_checkpoint(ss, p);
        const std::string text = ss.str();
        CHECK(text.rfind("RDAE1\n3 5 " + std::string(to_string(kind)) + "\n", 0) == 0);
        const AutoEncoderParams q = read_checkpoint(ss);
        CHECK(q == p);
        std::stringstream again;
        write_checkpoint(again, q);
        CHECK(again.str() == text);
    }
}

TEST_CASE("checkpoint rejects malformed input") {
    std::stringstream good;
    write_checkpoint(good, make_check_instance(4, 2, 2, Activation::relu, 1).params);
    const std::string text = good.str();
    auto fails = [](const std::string& s) {
        std::istringstream in(s);
        CHECK_THROWS_AS(read_checkpoint(in), FormatError);
    };
    fails("");
    fails("RDAE2" + text.substr(5));
    fails(text.substr(0, text.size() / 2));
    std::string bad_act = text;
    bad_act.replace(bad_act.find("relu"), 4, "tanh");
    fails(bad_act);
    std::string bad_num = text;
    bad_num.replace(bad_num.find("---") - 3, 1, "x");
    fails(bad_num);
    std::string no_sep = text;
    no_sep.erase(no_sep.find("---"), 4);
    fails(no_sep);
    fails(text + "1,2\n");
}
