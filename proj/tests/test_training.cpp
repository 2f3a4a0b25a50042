#include "rdae/data_io.hpp"
#include "rdae/errors.hpp"
#include "rdae/training.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace rdae;

namespace {

bool is_partition(const BatchPlan& plan, Eigen::Index n) {
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    for (const auto& batch : plan) {
        if (batch.empty()) return false;
        for (Eigen::Index i : batch) {
            if (i < 0 || i >= n) return false;
            ++seen[static_cast<std::size_t>(i)];
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.sigma_x = cfg.sigma_xhat = 1.0;
    cfg.epochs = 5;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), UsageError);
    };
    bad([](TrainConfig& c) { c.epochs = 0; });
    bad([](TrainConfig& c) { c.mu = -1.0; });
    bad([](TrainConfig& c) { c.step_size = -0.1; });
    bad([](TrainConfig& c) { c.alpha = 1.0; });
    bad([](TrainConfig& c) { c.sigma_x = 0.0; });
    bad([](TrainConfig& c) { c.clusters = -2; });
}

TEST_CASE("pre-clustered batches") {
    const PointMatrix X = test::normal_points(60, 2, 8);
    const BatchPlan one = precluster_minibatches(X, 1, 4);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 60);
    CHECK(is_partition(one, 60));

    for (int k : {2, 5, 17, 60}) {
        const BatchPlan plan = precluster_minibatches(X, k, 9);
        CHECK(is_partition(plan, 60));
        CHECK(plan.size() <= static_cast<std::size_t>(k));
        for (const auto& b : plan) CHECK(std::is_sorted(b.begin(), b.end()));
        CHECK(plan == precluster_minibatches(X, k, 9));
    }
    CHECK(is_partition(full_batch_plan(7), 7));
    CHECK_THROWS_AS(precluster_minibatches(X, 61, 1), UsageError);
    CHECK_THROWS_AS(precluster_minibatches(X, 0, 1), UsageError);
}

TEST_CASE("pre-clustering recovers well separated blobs") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const LabeledSample s = sample_gmm_labeled(blobs_preset(), 300, seed);
        const BatchPlan plan = precluster_minibatches(s.points, 3, seed + 10);
        REQUIRE(plan.size() == 3);
        // ground truth by nearest true center
        const MixtureSpec spec = blobs_preset();
        for (const auto& batch : plan) {
            std::set<int> labels;
            for (Eigen::Index i : batch) {
                int best = 0;
                double bd = INFINITY;
                for (int c = 0; c < 3; ++c) {
                    const double dd = (s.points.row(i).transpose() - spec.components[static_cast<std::size_t>(c)].mean).squaredNorm();
                    if (dd < bd) bd = dd, best = c;
                }
                CHECK(best == s.component[static_cast<std::size_t>(i)]);
                labels.insert(best);
            }
            CHECK(labels.size() == 1);
        }
    }
}

TEST_CASE("zero step returns the initial parameters") {
    const CheckInstance inst = make_check_instance(20, 2, 4, Activation::logsig, 1);
    TrainConfig cfg = small_config();
    cfg.step_size = 0.0;
    const TrainResult r = train(inst.X, inst.params, cfg);
    CHECK(r.params == inst.params);
    REQUIRE(r.history.epochs.size() == 5);
    for (const EpochRecord& e : r.history.epochs) {
        CHECK(e.lagrangian == r.history.initial.lagrangian);
        CHECK(e.distortion == r.history.initial.distortion);
    }
}

TEST_CASE("history bookkeeping") {
    const CheckInstance inst = make_check_instance(30, 2, 4, Activation::softplus, 2);
    TrainConfig cfg = small_config();
    cfg.epochs = 4;
    const TrainResult r = train(inst.X, inst.params, cfg);
    REQUIRE(r.history.epochs.size() == 4);
    const EpochRecord ev = evaluate(inst.X, r.params, cfg);
    const EpochRecord& last = r.history.epochs.back();
    CHECK(ev.lagrangian == last.lagrangian);
    CHECK(ev.distortion == last.distortion);
    for (const EpochRecord& e : r.history.epochs) {
        CHECK(std::isfinite(e.lagrangian));
        CHECK(e.lagrangian == doctest::Approx(e.joint_entropy - e.marginal_entropy - cfg.mu * e.distortion).epsilon(1e-12));
    }
    // full batch ascent never lowers the objective
    double prev = r.history.initial.lagrangian;
    for (const EpochRecord& e : r.history.epochs) {
        CHECK(e.lagrangian >= prev);
        prev = e.lagrangian;
    }

    std::ostringstream os;
    write_history_csv(os, r.history);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,lagrangian,joint_entropy,marginal_entropy,distortion");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("plain linear auto-encoder reaches near-zero distortion") {
    const PointMatrix X = test::normal_points(50, 2, 12);
    TrainConfig cfg = small_config();
    cfg.objective = ObjectiveKind::plain;
    cfg.epochs = 2000;
    cfg.step_size = 0.05;
    const TrainResult r = train(X, glorot_uniform_params(2, 3, Activation::linear, 5), cfg);
    CHECK(r.history.epochs.back().distortion < 1e-3);

    double prev = r.history.initial.distortion;
    bool monotone = true;
    for (const EpochRecord& e : r.history.epochs) {
        monotone = monotone && e.distortion <= prev;
        prev = e.distortion;
    }
    CHECK(monotone);
}

TEST_CASE("training is reproducible") {
    const PointMatrix X = sample_gmm(gmm3_preset(), 80, 4);
    TrainConfig cfg = small_config();
    cfg.clusters = 3;
    cfg.epochs = 6;
    for (ObjectiveKind kind : {ObjectiveKind::rdae, ObjectiveKind::plain, ObjectiveKind::denoising}) {
        cfg.objective = kind;
        const AutoEncoderParams init = glorot_uniform_params(2, 5, Activation::softplus, 6);
        const TrainResult a = train(X, init, cfg), b = train(X, init, cfg);
        CHECK(a.params == b.params);
        CHECK(a.plan == b.plan);
        CHECK(a.history.epochs.back().lagrangian == b.history.epochs.back().lagrangian);
    }
}

TEST_CASE("denoising with zero noise is the plain objective") {
    const PointMatrix X = test::normal_points(40, 2, 14);
    TrainConfig cfg = small_config();
    cfg.epochs = 8;
    cfg.objective = ObjectiveKind::plain;
    const AutoEncoderParams init = glorot_uniform_params(2, 4, Activation::relu, 7);
    const TrainResult plain = train(X, init, cfg);
    cfg.objective = ObjectiveKind::denoising;
    cfg.noise_sigma = 0.0;
    const TrainResult den = train(X, init, cfg);
    CHECK(plain.params == den.params);
}

TEST_CASE("denoising noise follows the seed") {
    const PointMatrix X = test::normal_points(30, 2, 15);
    TrainConfig cfg = small_config();
    cfg.objective = ObjectiveKind::denoising;
    cfg.step_size = 0.01;
    cfg.epochs = 3;
    const AutoEncoderParams a = glorot_uniform_params(2, 4, Activation::logsig, 1);
    const TrainResult r1 = train(X, a, cfg), r2 = train(X, a, cfg);
    CHECK(r1.params == r2.params);
    cfg.seed = 99;
    const TrainResult r3 = train(X, a, cfg);
    CHECK_FALSE(r3.params == r1.params);
}

TEST_CASE("training aborts on non-finite values") {
    PointMatrix X = test::normal_points(10, 2, 16);
    X(3, 0) = 1e200;
    TrainConfig cfg = small_config();
    cfg.objective = ObjectiveKind::plain;
    try {
        train(X, glorot_uniform_params(2, 3, Activation::linear, 1), cfg);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
    CHECK_THROWS_AS(train(test::normal_points(10, 3, 1), glorot_uniform_params(2, 3, Activation::linear, 1), cfg),
                    UsageError);
}

TEST_CASE("gradient check") {
    TrainConfig cfg = small_config();
    for (Activation kind : {Activation::linear, Activation::logsig}) {
        const CheckInstance inst = make_check_instance(8, 2, 3, kind, 1);
        CHECK(gradient_check(inst.X, inst.params, cfg, 1e-5) < 1e-4);
    }
    cfg.mu = 0.0;
    const CheckInstance inst = make_check_instance(8, 2, 3, Activation::logsig, 2);
    CHECK(gradient_check(inst.X, inst.params, cfg, 1e-5) < 1e-4);

    const GradientCheckReport bad = gradient_check_report(inst.X, inst.params, cfg, 1e-5, 1e-3);
    CHECK(bad.max_error() > 1e-4);
    CHECK(bad.worst().max_error == bad.max_error());

    CHECK(gradient_entry_error(1.0, 1.0) == 0.0);
    CHECK(gradient_entry_error(2.0, 1.0) == 0.5);
    CHECK(gradient_entry_error(0.0, 1e-8) == doctest::Approx(1e-5));
    CHECK(gradient_entry_error(0.0, 2e-7) > 1e-4);
}

TEST_CASE("energy landscape") {
    AutoEncoderParams id;
    id.W = Matrix::Identity(2, 2);
    id.c = Vector::Zero(2);
    id.A = Matrix::Identity(2, 2);
    id.b = Vector::Zero(2);
    const GridSpec g{-1.0, 2.0, -3.0, 1.0, 7};
    const EnergyGrid e = energy_landscape(id, g);
    CHECK(e.energy.rows() == 7);
    CHECK((e.energy.array() == 0.0).all());
    CHECK(e.x_at(0) == -1.0);
    CHECK(e.x_at(6) == 2.0);
    CHECK(e.y_at(6) == 1.0);

    AutoEncoderParams zero = id;
    zero.W.setZero();
    zero.A.setZero();
    const EnergyGrid z = energy_landscape(zero, g);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c)
            CHECK(z.energy(r, c) == doctest::Approx(e.x_at(c) * e.x_at(c) + e.y_at(r) * e.y_at(r)).epsilon(1e-15));

    CHECK(energy_landscape(id, {0, 1, 0, 1, 2}).energy.size() == 4);
    CHECK_THROWS_AS(energy_landscape(id, {0, 1, 0, 1, 1}), UsageError);
    CHECK_THROWS_AS(energy_landscape(glorot_uniform_params(3, 2, Activation::linear, 1), g), UsageError);

    const PointMatrix pts = test::normal_points(5, 2, 3);
    const Vector re = reconstruction_energy(zero, pts);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(re[i] == doctest::Approx(pts.row(i).squaredNorm()).epsilon(1e-15));
}
