#pragma once

#include "rdae/autoencoder.hpp"
#include "rdae/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rdae {

enum class ObjectiveKind { rdae, plain, denoising };

struct TrainConfig {
    double mu = 0.5;
    double alpha = 1.01;
    double eig_floor = 1e-12;
    double sigma_x = 0.2828427124746190;
    double sigma_xhat = 0.2828427124746190;
    double step_size = 0.05;
    int epochs = 100;
    int clusters = 0;  // 0 means full batch, otherwise k-means pre-clustering into k batches
    std::uint64_t seed = 0;
    ObjectiveKind objective = ObjectiveKind::rdae;
    double noise_sigma = 0.5;  // denoising only
    int max_halvings = 30;

    void validate() const;
    EntropySpec entropy() const { return {alpha, eig_floor}; }
    KernelBandwidths kernel() const { return {sigma_x, sigma_xhat}; }
};

struct EpochRecord {
    double lagrangian = 0.0;
    double joint_entropy = 0.0;
    double marginal_entropy = 0.0;
    double distortion = 0.0;
    double step_size = 0.0;  // step in effect when the epoch was accepted
};

/// `initial` is measured before the first update; `epochs` holds one record
/// per completed epoch. All records are full-set measurements.
struct TrainHistory {
    EpochRecord initial;
    std::vector<EpochRecord> epochs;
};

/// Header "epoch,lagrangian,joint_entropy,marginal_entropy,distortion";
/// epoch 0 is the initial record.
void write_history_csv(std::ostream& os, const TrainHistory& history);

/// Ordered index sets partitioning 0..N−1.
using BatchPlan = std::vector<std::vector<Eigen::Index>>;

/// Lloyd k-means (k-means++ seeding, at most 100 iterations); one batch per
/// non-empty cluster, ordered by cluster index, indices ascending. Empty
/// clusters are re-seeded from the point farthest from its center.
BatchPlan precluster_minibatches(const PointMatrix& X, int k, std::uint64_t seed);
BatchPlan full_batch_plan(Eigen::Index n);

/// Full-set measurement of the objective pieces for the given parameters.
EpochRecord evaluate(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg);

struct TrainResult {
    AutoEncoderParams params;
    TrainHistory history;
    BatchPlan plan;
};

/// Gradient ascent over batches with per-epoch backtracking: an epoch that
/// lowers the batch-plan objective is undone and retried at half the step,
/// up to `max_halvings` times, after which the parameters are left as they
/// were. Throws NumericalError on a non-finite objective or gradient.
TrainResult train(const PointMatrix& X, const AutoEncoderParams& init, const TrainConfig& cfg);

/// Same, with a caller-supplied batch plan.
TrainResult train(const PointMatrix& X, const AutoEncoderParams& init, const TrainConfig& cfg, BatchPlan plan);

struct BlockCheck {
    std::string name;
    double max_error = 0.0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradientCheckReport {
    std::array<BlockCheck, 4> blocks;  // W, c, A, b

    double max_error() const;
    const BlockCheck& worst() const;
};

/// Entry error: |a−f|/max(|a|,|f|), or |a−f|·1e3 when the analytic entry is
/// below 1e−8 in magnitude (so the 1e−4 pass mark means 1e−7 absolute there).
double gradient_entry_error(double analytic, double numeric);

/// Central differences of the Lagrangian over every entry of W, c, A, b.
/// `perturb` is added to every analytic entry (negative-control hook).
GradientCheckReport gradient_check_report(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg,
                                          double h, double perturb = 0.0);
double gradient_check(const PointMatrix& X, const AutoEncoderParams& params, const TrainConfig& cfg, double h);

struct CheckInstance {
    PointMatrix X;
    AutoEncoderParams params;
};

/// Standard-normal data and Glorot weights with small random biases, so
/// that every parameter block is exercised.
CheckInstance make_check_instance(Eigen::Index n, Eigen::Index d, Eigen::Index p, Activation kind, std::uint64_t seed);

struct GridSpec {
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    int steps = 2;
};

/// ‖x − f(x)‖² on a steps×steps grid; energy(r, c) sits at
/// (x_c, y_r), rows running over y.
struct EnergyGrid {
    GridSpec grid;
    Matrix energy;

    double x_at(int c) const;
    double y_at(int r) const;
};

EnergyGrid energy_landscape(const AutoEncoderParams& params, const GridSpec& grid);

/// Per-row ‖x − f(x)‖².
Vector reconstruction_energy(const AutoEncoderParams& params, const PointMatrix& X);

}  // namespace rdae
