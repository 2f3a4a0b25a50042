#include "rdae/training.hpp"

#include "rdae/errors.hpp"
#include "rdae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace rdae {

namespace {

constexpr std::uint64_t kKmeansStream = 0x4b4d;
constexpr std::uint64_t kNoiseStream = 0xd0e5;
constexpr int kKmeansMaxIterations = 100;

// points and centers are stored one per column
double squared_distance(const Matrix& P, Eigen::Index i, const Matrix& C, Eigen::Index c) {
    const double* x = P.col(i).data();
    const double* m = C.col(c).data();
    double s = 0.0;
    for (Eigen::Index k = 0; k < P.rows(); ++k) {
        const double diff = x[k] - m[k];
        s += diff * diff;
    }
    return s;
}

struct Batch {
    PointMatrix X;
    std::optional<NormalizedGram> K_x;  // rdae batches of size >= 2
};

std::vector<Batch> materialize(const PointMatrix& X, const BatchPlan& plan, const TrainConfig& cfg) {
    std::vector<Batch> batches;
    batches.reserve(plan.size());
    for (const auto& idx : plan) {
        Batch b;
        b.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) b.X.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
        if (cfg.objective == ObjectiveKind::rdae && b.X.rows() >= 2) b.K_x = normalized_gram(b.X, cfg.sigma_x);
        batches.push_back(std::move(b));
    }
    return batches;
}

Matrix corruption(const TrainConfig& cfg, int epoch, std::size_t batch, Eigen::Index rows, Eigen::Index cols) {
    const CounterRng rng =
        CounterRng(cfg.seed, kNoiseStream).split(static_cast<std::uint64_t>(epoch)).split(static_cast<std::uint64_t>(batch));
    Matrix noise(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
            noise(i, k) = cfg.noise_sigma * rng.normal(static_cast<std::uint64_t>(i * cols + k));
    return noise;
}

double batch_objective(const Batch& b, const AutoEncoderParams& params, const TrainConfig& cfg, const Matrix* noise) {
    switch (cfg.objective) {
        case ObjectiveKind::rdae:
            if (b.K_x) return lagrangian_terms(b.X, *b.K_x, params, cfg.mu, cfg.entropy(), cfg.kernel()).value;
            return -cfg.mu * empirical_distortion(b.X, forward(b.X, params).Xhat);
        case ObjectiveKind::plain: return -empirical_distortion(b.X, forward(b.X, params).Xhat);
        case ObjectiveKind::denoising: {
            const PointMatrix input = b.X + *noise;
            return -empirical_distortion(b.X, forward(input, params).Xhat);
        }
    }
    throw InternalError("unhandled objective kind");
}

ParamGrads batch_gradient(const Batch& b, const AutoEncoderParams& params, const TrainConfig& cfg,
                          const Matrix* noise) {
    switch (cfg.objective) {
        case ObjectiveKind::rdae: {
            if (b.K_x) return lagrangian_gradients(b.X, *b.K_x, params, cfg.mu, cfg.entropy(), cfg.kernel());
            ParamGrads g = distortion_gradients(b.X, params, forward(b.X, params));
            g *= -cfg.mu;
            return g;
        }
        case ObjectiveKind::plain: {
            ParamGrads g = distortion_gradients(b.X, params, forward(b.X, params));
            g *= -1.0;
            return g;
        }
        case ObjectiveKind::denoising: {
            const PointMatrix input = b.X + *noise;
            ParamGrads g = distortion_gradients(input, b.X, params, forward(input, params));
            g *= -1.0;
            return g;
        }
    }
    throw InternalError("unhandled objective kind");
}

std::string diagnostic(const char* what, int epoch, std::size_t batch, const AutoEncoderParams& p) {
    std::ostringstream msg;
    msg << what << " at epoch " << epoch << ", batch " << batch << " (|W|=" << p.W.norm() << ", |c|=" << p.c.norm()
        << ", |A|=" << p.A.norm() << ", |b|=" << p.b.norm() << ")";
    return msg.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw UsageError("mu must be >= 0");
    entropy().validate();
    kernel().validate();
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw UsageError("step size must be >= 0");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (clusters < 0) throw UsageError("cluster count must be >= 1");
    if (objective == ObjectiveKind::denoising && !(noise_sigma >= 0.0))
        throw UsageError("denoising noise sigma must be >= 0");
    if (max_halvings < 0) throw UsageError("max_halvings must be >= 0");
}

void write_history_csv(std::ostream& os, const TrainHistory& history) {
    os << "epoch,lagrangian,joint_entropy,marginal_entropy,distortion\n";
    char buf[160];
    auto row = [&](std::size_t epoch, const EpochRecord& r) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", epoch, r.lagrangian, r.joint_entropy,
                      r.marginal_entropy, r.distortion);
        os << buf;
    };
    row(0, history.initial);
    for (std::size_t e = 0; e < history.epochs.size(); ++e) row(e + 1, history.epochs[e]);
}

BatchPlan full_batch_plan(Eigen::Index n) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return {std::move(all)};
}

BatchPlan precluster_minibatches(const PointMatrix& X, int k, std::uint64_t seed) {
    require_points(X, 1, "precluster_minibatches");
    const Eigen::Index n = X.rows();
    if (k < 1) throw UsageError("precluster_minibatches: k must be >= 1");
    if (k > n) throw UsageError("precluster_minibatches: k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
    if (k == 1) return full_batch_plan(n);

    // k-means++ seeding.
    const CounterRng rng(seed, kKmeansStream);
    std::uint64_t draw = 0;
    const Matrix P = X.transpose();
    Matrix centers(X.cols(), k);
    const auto first = std::min<Eigen::Index>(static_cast<Eigen::Index>(rng.uniform(draw++) * static_cast<double>(n)), n - 1);
    centers.col(0) = P.col(first);
    Vector nearest(n);
    for (Eigen::Index i = 0; i < n; ++i) nearest[i] = squared_distance(P, i, centers, 0);
    for (int c = 1; c < k; ++c) {
        const double total = nearest.sum();
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform(draw++) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += nearest[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::min<Eigen::Index>(static_cast<Eigen::Index>(rng.uniform(draw++) * static_cast<double>(n)), n - 1);
        }
        centers.col(c) = P.col(pick);
        for (Eigen::Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(P, i, centers, c));
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    Vector dist(n);
    for (int iter = 0; iter < kKmeansMaxIterations; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(P, i, centers, 0);
            for (int c = 1; c < k; ++c) {
                const double dd = squared_distance(P, i, centers, c);
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            dist[i] = best_d;
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;

        Matrix sums = Matrix::Zero(X.cols(), k);
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.col(assign[static_cast<std::size_t>(i)]) += P.col(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                Eigen::Index far = 0;
                dist.maxCoeff(&far);
                centers.col(c) = P.col(far);
                dist[far] = 0.0;
            }
        }
    }

    BatchPlan plan(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) plan[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].push_back(i);
    std::erase_if(plan, [](const auto& b) { return b.empty(); });
    return plan;
}

namespace {

EpochRecord evaluate_with(const PointMatrix& X, const NormalizedGram* K_x, const AutoEncoderParams& params,
                          const TrainConfig& cfg) {
    EpochRecord r;
    if (K_x) {
        const LagrangianTerms t = lagrangian_terms(X, *K_x, params, cfg.mu, cfg.entropy(), cfg.kernel());
        r.lagrangian = t.value;
        r.joint_entropy = t.joint;
        r.marginal_entropy = t.marginal;
        r.distortion = t.distortion;
    } else {
        r.distortion = empirical_distortion(X, forward(X, params).Xhat);
        r.lagrangian = -cfg.mu * r.distortion;
    }
    return r;
}

}  // namespace

EpochRecord evaluate(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg) {
    if (X.rows() < 2) return evaluate_with(X, nullptr, params, cfg);
    const NormalizedGram K_x = normalized_gram(X, cfg.sigma_x);
    return evaluate_with(X, &K_x, params, cfg);
}

TrainResult train(const PointMatrix& X, const AutoEncoderParams& init, const TrainConfig& cfg) {
    cfg.validate();
    require_points(X, 1, "train");
    BatchPlan plan = cfg.clusters > 0 ? precluster_minibatches(X, cfg.clusters, cfg.seed) : full_batch_plan(X.rows());
    return train(X, init, cfg, std::move(plan));
}

TrainResult train(const PointMatrix& X, const AutoEncoderParams& init, const TrainConfig& cfg, BatchPlan plan) {
    cfg.validate();
    require_points(X, 1, "train");
    init.validate();
    if (X.cols() != init.input_dim()) throw UsageError("train: data dimension does not match the parameters");

    const std::vector<Batch> batches = materialize(X, plan, cfg);
    TrainResult result{init, {}, std::move(plan)};
    AutoEncoderParams& params = result.params;
    std::optional<NormalizedGram> full_gram;
    if (X.rows() >= 2) full_gram.emplace(normalized_gram(X, cfg.sigma_x));
    auto measure = [&](const AutoEncoderParams& p) { return evaluate_with(X, full_gram ? &*full_gram : nullptr, p, cfg); };
    result.history.initial = measure(params);
    result.history.initial.step_size = cfg.step_size;
    result.history.epochs.reserve(static_cast<std::size_t>(cfg.epochs));

    double step = cfg.step_size;
    std::optional<double> carried;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<Matrix> noise;
        if (cfg.objective == ObjectiveKind::denoising)
            for (std::size_t b = 0; b < batches.size(); ++b)
                noise.push_back(corruption(cfg, epoch, b, batches[b].X.rows(), batches[b].X.cols()));
        auto noise_for = [&](std::size_t b) -> const Matrix* { return noise.empty() ? nullptr : &noise[b]; };

        auto plan_objective = [&](const AutoEncoderParams& p) {
            double total = 0.0;
            for (std::size_t b = 0; b < batches.size(); ++b) {
                const double v = batch_objective(batches[b], p, cfg, noise_for(b));
                if (!std::isfinite(v)) throw NumericalError(diagnostic("non-finite objective", epoch, b, p));
                total += v;
            }
            return total;
        };

        // The noise draw changes every epoch, so only noise-free objectives carry over.
        const double before =
            carried && cfg.objective != ObjectiveKind::denoising ? *carried : plan_objective(params);
        carried = before;
        for (int halvings = 0;; ++halvings) {
            AutoEncoderParams trial = params;
            for (std::size_t b = 0; b < batches.size(); ++b) {
                const ParamGrads g = batch_gradient(batches[b], trial, cfg, noise_for(b));
                if (!g.all_finite()) throw NumericalError(diagnostic("non-finite gradient", epoch, b, trial));
                apply_step(trial, g, step);
            }
            const double after = plan_objective(trial);
            if (after >= before) {
                params = std::move(trial);
                carried = after;
                break;
            }
            if (halvings == cfg.max_halvings) break;  // leave params untouched this epoch
            step *= 0.5;
        }

        EpochRecord rec = measure(params);
        rec.step_size = step;
        if (!std::isfinite(rec.lagrangian))
            throw NumericalError(diagnostic("non-finite full-set objective", epoch, 0, params));
        result.history.epochs.push_back(rec);
    }
    return result;
}

double gradient_entry_error(double analytic, double numeric) {
    // near-zero analytic entries are judged absolutely: a 1e-7 miss maps to 1e-4
    const double diff = std::abs(analytic - numeric);
    if (std::abs(analytic) < 1e-8) return diff * 1e3;
    return diff / std::max(std::abs(analytic), std::abs(numeric));
}

double GradientCheckReport::max_error() const { return worst().max_error; }

const BlockCheck& GradientCheckReport::worst() const {
    return *std::max_element(blocks.begin(), blocks.end(),
                             [](const BlockCheck& a, const BlockCheck& b) { return a.max_error < b.max_error; });
}

GradientCheckReport gradient_check_report(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg,
                                          double h, double perturb) {
    if (!(h > 0.0)) throw UsageError("gradient_check: step h must be positive");
    const EntropySpec entropy = cfg.entropy();
    const KernelBandwidths kernel = cfg.kernel();
    const ParamGrads analytic = lagrangian_gradients(X, params, cfg.mu, entropy, kernel);

    auto objective = [&](const AutoEncoderParams& p) { return lagrangian(X, p, cfg.mu, entropy, kernel); };

    GradientCheckReport report;
    auto check = [&](BlockCheck& out, const char* name, auto member, const Matrix& grad) {
        out.name = name;
        out.max_error = -1.0;
        AutoEncoderParams probe = params;
        auto& block = probe.*member;
        for (Eigen::Index j = 0; j < grad.cols(); ++j) {
            for (Eigen::Index i = 0; i < grad.rows(); ++i) {
                double& entry = block.data()[j * grad.rows() + i];
                const double saved = entry;
                entry = saved + h;
                const double up = objective(probe);
                entry = saved - h;
                const double down = objective(probe);
                entry = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = grad(i, j) + perturb;
                const double err = gradient_entry_error(a, numeric);
                if (err > out.max_error) {
                    out.max_error = err;
                    out.row = i;
                    out.col = j;
                    out.analytic = a;
                    out.numeric = numeric;
                }
            }
        }
    };
    check(report.blocks[0], "W", &AutoEncoderParams::W, analytic.dW);
    check(report.blocks[1], "c", &AutoEncoderParams::c, Matrix(analytic.dc));
    check(report.blocks[2], "A", &AutoEncoderParams::A, analytic.dA);
    check(report.blocks[3], "b", &AutoEncoderParams::b, Matrix(analytic.db));
    return report;
}

double gradient_check(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg, double h) {
    return gradient_check_report(X, params, cfg, h).max_error();
}

CheckInstance make_check_instance(Eigen::Index n, Eigen::Index d, Eigen::Index p, Activation kind, std::uint64_t seed) {
    const CounterRng rng(seed, 0xc4ec);
    const CounterRng data = rng.split(0), bias = rng.split(1);
    CheckInstance inst{PointMatrix(n, d), glorot_uniform_params(d, p, kind, seed)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) inst.X(i, k) = data.normal(static_cast<std::uint64_t>(i * d + k));
    for (Eigen::Index j = 0; j < p; ++j) inst.params.c[j] = 0.2 * bias.uniform(static_cast<std::uint64_t>(j)) - 0.1;
    for (Eigen::Index k = 0; k < d; ++k) inst.params.b[k] = 0.2 * bias.uniform(static_cast<std::uint64_t>(p + k)) - 0.1;
    return inst;
}

double EnergyGrid::x_at(int c) const {
    return grid.x_min + (grid.x_max - grid.x_min) * static_cast<double>(c) / static_cast<double>(grid.steps - 1);
}

double EnergyGrid::y_at(int r) const {
    return grid.y_min + (grid.y_max - grid.y_min) * static_cast<double>(r) / static_cast<double>(grid.steps - 1);
}

Vector reconstruction_energy(const AutoEncoderParams& params, const PointMatrix& X) {
    const ForwardPass fp = forward(X, params);
    return (X - fp.Xhat).rowwise().squaredNorm();
}

EnergyGrid energy_landscape(const AutoEncoderParams& params, const GridSpec& grid) {
    params.validate();
    if (params.input_dim() != 2)
        throw UsageError("energy_landscape: needs a 2-dimensional model, got d=" + std::to_string(params.input_dim()));
    if (grid.steps < 2) throw UsageError("energy_landscape: steps must be >= 2");
    if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min))
        throw UsageError("energy_landscape: grid bounds must be increasing");

    EnergyGrid out{grid, Matrix(grid.steps, grid.steps)};
    PointMatrix nodes(static_cast<Eigen::Index>(grid.steps) * grid.steps, 2);
    for (int r = 0; r < grid.steps; ++r)
        for (int c = 0; c < grid.steps; ++c) {
            const Eigen::Index at = static_cast<Eigen::Index>(r) * grid.steps + c;
            nodes(at, 0) = out.x_at(c);
            nodes(at, 1) = out.y_at(r);
        }
    const Vector e = reconstruction_energy(params, nodes);
    for (int r = 0; r < grid.steps; ++r)
        for (int c = 0; c < grid.steps; ++c) out.energy(r, c) = e[static_cast<Eigen::Index>(r) * grid.steps + c];
    return out;
}

}  // namespace rdae
