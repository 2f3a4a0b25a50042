#include "cli.hpp"

#include "rdae/autoencoder.hpp"
#include "rdae/data_io.hpp"
#include "rdae/errors.hpp"
#include "rdae/rd_oracle.hpp"
#include "rdae/training.hpp"
#include "rdae/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace rdae::cli {
namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw UsageError(what + ": '" + s + "' is not a number");
    }
    if (used != s.size() || !std::isfinite(v)) throw UsageError(what + ": '" + s + "' is not a finite number");
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    const double v = parse_double(s, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError(what + ": '" + s + "' is not an integer");
    return static_cast<int>(v);
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(part, what));
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing '" + path + "'");
}

template <class F>
void write_text(const std::string& path, F&& body) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    body(os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

std::string format_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// gen-data ------------------------------------------------------------------

struct GenDataOptions {
    std::string preset;
    std::string spec_file;
    long n = 500;
    std::uint64_t seed = 0;
    std::string out;
};

GaussianSpec gaussian_from_json(const json& j) {
    GaussianSpec g;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    g.mean = Vector::Map(mean.data(), static_cast<Eigen::Index>(mean.size()));
    g.covariance.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(mean.size()));
    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (cov[i].size() != mean.size()) throw UsageError("spec file: covariance rows must match the mean length");
        for (std::size_t k = 0; k < cov[i].size(); ++k)
            g.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cov[i][k];
    }
    return g;
}

// {"components": [{"mean": [...], "covariance": [[...], ...]}, ...], "weights": [...]}
// A single component may be given without weights.
MixtureSpec mixture_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spec file '" + path + "'");
    try {
        const json j = json::parse(in);
        MixtureSpec m;
        for (const auto& c : j.at("components")) m.components.push_back(gaussian_from_json(c));
        if (j.contains("weights"))
            m.weights = j.at("weights").get<std::vector<double>>();
        else
            m.weights.assign(m.components.size(), 1.0 / static_cast<double>(m.components.size()));
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw UsageError("spec file '" + path + "': " + e.what());
    }
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
    if (o.n < 1) throw UsageError("--n must be >= 1");
    json manifest = {{"command", "gen-data"}, {"version", kVersion}, {"seed", o.seed}, {"n", o.n}};
    PointMatrix X;
    if (!o.spec_file.empty()) {
        const MixtureSpec spec = mixture_from_json(o.spec_file);
        manifest["spec_file"] = {{"path", o.spec_file}, {"fingerprint", hex64(fingerprint_file(o.spec_file))}};
        X = sample_gmm(spec, o.n, o.seed);
    } else if (o.preset == "gauss2d") {
        manifest["preset"] = o.preset;
        X = sample_gaussian(gauss2d_preset(), o.n, o.seed);
    } else if (o.preset == "gmm3" || o.preset == "blobs") {
        manifest["preset"] = o.preset;
        X = sample_gmm(o.preset == "gmm3" ? gmm3_preset() : blobs_preset(), o.n, o.seed);
    } else {
        throw UsageError("unknown preset '" + o.preset + "' (choose gauss2d, gmm3 or blobs)");
    }
    write_json(o.out + ".manifest.json", manifest);
    emit_csv_matrix(X, o.out);
    out << "wrote " << X.rows() << "x" << X.cols() << " to " << o.out << '\n';
    return kExitOk;
}

// train ---------------------------------------------------------------------

struct TrainOptions {
    std::string data;
    std::string idx_images;
    std::string idx_labels;
    long subset = 0;
    int units = 10;
    std::string activation = "linear";
    std::string batch = "full";
    std::string objective = "rdae";
    TrainConfig cfg;
    std::string out_params;
    std::string out_history;
    std::string manifest;
};

void parse_batch(const std::string& s, TrainConfig& cfg) {
    if (s == "full") {
        cfg.clusters = 0;
        return;
    }
    if (s.rfind("cluster:", 0) == 0) {
        cfg.clusters = parse_int(s.substr(8), "--batch cluster count");
        if (cfg.clusters < 1) throw UsageError("--batch cluster:k needs k >= 1");
        return;
    }
    throw UsageError("--batch must be full or cluster:k, got '" + s + "'");
}

void parse_objective(const std::string& s, TrainConfig& cfg) {
    if (s == "rdae") {
        cfg.objective = ObjectiveKind::rdae;
    } else if (s == "plain") {
        cfg.objective = ObjectiveKind::plain;
    } else if (s.rfind("denoise:", 0) == 0) {
        cfg.objective = ObjectiveKind::denoising;
        cfg.noise_sigma = parse_double(s.substr(8), "--objective denoise noise");
    } else {
        throw UsageError("--objective must be rdae, plain or denoise:sigma, got '" + s + "'");
    }
}

std::string_view objective_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::rdae: return "rdae";
        case ObjectiveKind::plain: return "plain";
        case ObjectiveKind::denoising: return "denoise";
    }
    return "?";
}

json config_echo(const TrainOptions& o) {
    const TrainConfig& c = o.cfg;
    return {{"units", o.units},
            {"activation", o.activation},
            {"mu", c.mu},
            {"alpha", c.alpha},
            {"eig_floor", c.eig_floor},
            {"sigma_x", c.sigma_x},
            {"sigma_xhat", c.sigma_xhat},
            {"step", c.step_size},
            {"epochs", c.epochs},
            {"batch", o.batch},
            {"clusters", c.clusters},
            {"objective", objective_name(c.objective)},
            {"noise_sigma", c.noise_sigma},
            {"max_halvings", c.max_halvings},
            {"seed", c.seed}};
}

int cmd_train(TrainOptions o, std::ostream& out) {
    parse_batch(o.batch, o.cfg);
    parse_objective(o.objective, o.cfg);
    o.cfg.validate();
    const Activation act = parse_activation(o.activation);
    if (o.units < 1) throw UsageError("--units must be >= 1");
    if (o.data.empty() == o.idx_images.empty()) throw UsageError("give either a data CSV or --idx-images");

    json manifest = {{"command", "train"}, {"version", kVersion}, {"seed", o.cfg.seed}, {"config", config_echo(o)}};
    PointMatrix X;
    if (!o.data.empty()) {
        manifest["dataset"] = {{"path", o.data}, {"fingerprint", hex64(fingerprint_file(o.data))}};
        X = load_csv_matrix(o.data);
    } else {
        if (o.idx_labels.empty()) throw UsageError("--idx-images needs --idx-labels");
        MnistSet set = load_mnist_idx(o.idx_images, o.idx_labels);
        manifest["dataset"] = {{"idx_images", o.idx_images},
                               {"idx_labels", o.idx_labels},
                               {"fingerprint", hex64(fingerprint_file(o.idx_images))},
                               {"labels_fingerprint", hex64(fingerprint_file(o.idx_labels))},
                               {"subset", o.subset}};
        X = std::move(set.images);
        if (o.subset > 0) {
            if (o.subset > X.rows()) throw UsageError("--subset exceeds the number of images");
            const auto rows = shuffled_subset(X.rows(), o.subset, o.cfg.seed);
            X = select_rows(X, rows);
        }
        X = center_columns(X).data;  // pixels are already in [0, 1]
    }
    require_points(X, 1, "train data");

    if (o.manifest.empty()) o.manifest = o.out_params + ".manifest.json";
    write_json(o.manifest, manifest);

    const AutoEncoderParams init = glorot_uniform_params(X.cols(), o.units, act, o.cfg.seed);
    const TrainResult r = train(X, init, o.cfg);
    save_checkpoint(o.out_params, r.params);
    if (!o.out_history.empty()) write_text(o.out_history, [&](std::ostream& os) { write_history_csv(os, r.history); });

    const EpochRecord& last = r.history.epochs.empty() ? r.history.initial : r.history.epochs.back();
    out << "trained " << X.rows() << " points, " << r.plan.size() << " batch(es), " << r.history.epochs.size()
        << " epochs\n"
        << "lagrangian " << format_g(r.history.initial.lagrangian) << " -> " << format_g(last.lagrangian) << '\n'
        << "distortion " << format_g(r.history.initial.distortion) << " -> " << format_g(last.distortion) << '\n'
        << "final step " << format_g(last.step_size) << '\n';
    return kExitOk;
}

// grad-check ----------------------------------------------------------------

struct GradCheckOptions {
    long n = 8;
    long d = 2;
    long units = 3;
    std::string activation = "logsig";
    std::uint64_t seed = 1;
    double mu = 0.5;
    double alpha = 1.01;
    double sigma = 1.0;
    double h = 1e-5;
    double perturb = 0.0;
    double tolerance = 1e-4;
};

int cmd_grad_check(const GradCheckOptions& o, std::ostream& out) {
    if (o.n < 2 || o.d < 1 || o.units < 1) throw UsageError("grad-check needs n >= 2, d >= 1, units >= 1");
    if (!(o.h > 0.0)) throw UsageError("--fd-step must be > 0");
    std::vector<Activation> kinds;
    if (o.activation == "all")
        kinds.assign(std::begin(kAllActivations), std::end(kAllActivations));
    else
        kinds.push_back(parse_activation(o.activation));

    TrainConfig cfg;
    cfg.mu = o.mu;
    cfg.alpha = o.alpha;
    cfg.sigma_x = cfg.sigma_xhat = o.sigma;
    cfg.entropy().validate();
    cfg.kernel().validate();

    bool ok = true;
    std::optional<std::pair<Activation, BlockCheck>> worst;
    char buf[200];
    for (Activation kind : kinds) {
        const CheckInstance inst = make_check_instance(o.n, o.d, o.units, kind, o.seed);
        const GradientCheckReport rep = gradient_check_report(inst.X, inst.params, cfg, o.h, o.perturb);
        out << to_string(kind);
        for (const BlockCheck& b : rep.blocks) {
            std::snprintf(buf, sizeof buf, " %s=%.3e", b.name.c_str(), b.max_error);
            out << buf;
        }
        const bool pass = rep.max_error() < o.tolerance;
        out << (pass ? " ok\n" : " FAIL\n");
        ok = ok && pass;
        if (!worst || rep.max_error() > worst->second.max_error) worst.emplace(kind, rep.worst());
    }
    if (!ok) {
        const BlockCheck& b = worst->second;
        std::snprintf(buf, sizeof buf, "worst: %s %s[%ld,%ld] analytic=%.10e numeric=%.10e error=%.3e\n",
                      std::string(to_string(worst->first)).c_str(), b.name.c_str(), static_cast<long>(b.row),
                      static_cast<long>(b.col), b.analytic, b.numeric, b.max_error);
        out << buf;
        return kExitCheckFailed;
    }
    return kExitOk;
}

// energy-map ----------------------------------------------------------------

struct EnergyMapOptions {
    std::string params;
    std::string grid;
    std::string out;
    std::string reference;
};

GridSpec parse_grid(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 5) throw UsageError("--grid expects x0,x1,y0,y1,steps");
    GridSpec g;
    g.x_min = parse_double(parts[0], "--grid x0");
    g.x_max = parse_double(parts[1], "--grid x1");
    g.y_min = parse_double(parts[2], "--grid y0");
    g.y_max = parse_double(parts[3], "--grid y1");
    g.steps = parse_int(parts[4], "--grid steps");
    if (g.steps < 2) throw UsageError("--grid steps must be >= 2");
    if (!(g.x_max > g.x_min) || !(g.y_max > g.y_min)) throw UsageError("--grid needs x0 < x1 and y0 < y1");
    return g;
}

int cmd_energy_map(const EnergyMapOptions& o, std::ostream& out) {
    const GridSpec grid = parse_grid(o.grid);
    const AutoEncoderParams params = load_checkpoint(o.params);
    if (params.input_dim() != 2) throw UsageError("energy-map needs a d=2 checkpoint");
    std::optional<PointMatrix> ref;
    if (!o.reference.empty()) {
        ref = load_csv_matrix(o.reference);
        if (ref->cols() != 2) throw UsageError("--reference data must have 2 columns");
        require_points(*ref, 1, "reference data");
    }

    const EnergyGrid e = energy_landscape(params, grid);
    write_text(o.out, [&](std::ostream& os) {
        os << "x,y,energy\n";
        for (int r = 0; r < grid.steps; ++r)
            for (int c = 0; c < grid.steps; ++c)
                os << format_g(e.x_at(c)) << ',' << format_g(e.y_at(r)) << ',' << format_g(e.energy(r, c)) << '\n';
        if (ref) {
            const double on = reconstruction_energy(params, *ref).mean();
            const double all = e.energy.mean();
            os << "# reference_mean=" << format_g(on) << " grid_mean=" << format_g(all)
               << " ratio=" << format_g(all > 0.0 ? on / all : std::nan("")) << '\n';
        }
    });
    out << "wrote " << grid.steps * grid.steps << " grid points to " << o.out << '\n';
    return kExitOk;
}

// rd-curve ------------------------------------------------------------------

struct RdCurveOptions {
    std::string variances;
    std::string d_grid;
    std::string out;
};

int cmd_rd_curve(const RdCurveOptions& o, std::ostream& out) {
    const std::vector<double> vars = parse_list(o.variances, "--variances");
    const std::vector<double> g = parse_list(o.d_grid, "--d-grid");
    if (g.size() != 3) throw UsageError("--d-grid expects lo,hi,steps");
    const int steps = parse_int(o.d_grid.substr(o.d_grid.rfind(',') + 1), "--d-grid steps");
    const auto curve = rd_curve(vars, g[0], g[1], steps);
    write_text(o.out, [&](std::ostream& os) { write_rd_curve_csv(os, curve); });
    out << "wrote " << curve.size() << " points to " << o.out << '\n';
    return kExitOk;
}

// export-bases --------------------------------------------------------------

struct ExportOptions {
    std::string params;
    std::string which = "analysis";
    std::string tile = "28x28";
    int cols = 0;
    std::string out;
};

TileShape parse_tile(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw UsageError("--tile expects HxW");
    TileShape t{parse_int(s.substr(0, x), "--tile height"), parse_int(s.substr(x + 1), "--tile width")};
    if (t.height < 1 || t.width < 1) throw UsageError("--tile sizes must be >= 1");
    return t;
}

int cmd_export_bases(const ExportOptions& o, std::ostream& out) {
    const TileShape tile = parse_tile(o.tile);
    const AutoEncoderParams params = load_checkpoint(o.params);
    if (static_cast<Eigen::Index>(tile.height) * tile.width != params.input_dim())
        throw UsageError("tile " + o.tile + " does not match input dimension " + std::to_string(params.input_dim()));
    Matrix basis;
    if (o.which == "analysis")
        basis = params.W;
    else if (o.which == "synthesis")
        basis = params.A.transpose();
    else
        throw UsageError("--which must be analysis or synthesis");
    const int p = static_cast<int>(basis.rows());
    const int cols = o.cols > 0 ? o.cols : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    emit_pgm_grid(basis, tile, cols, o.out);
    out << "wrote " << p << " tiles to " << o.out << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rate-distortion auto-encoders trained with matrix-based Renyi entropy", "rdae"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    // CLI11 only reads the root config; subcommand settings go under [train] etc.
    app.set_config("--config", "", "INI/TOML file with [train] or [gen-data] sections; command-line flags win");

    GenDataOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Sample a synthetic data set to CSV");
    gen_cmd->add_option("preset", gen.preset, "gauss2d, gmm3 or blobs");
    gen_cmd->add_option("--spec-file", gen.spec_file, "JSON mixture spec; overrides the preset");
    gen_cmd->add_option("--n", gen.n, "number of samples")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "sampling seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output CSV")->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train an auto-encoder by gradient ascent on the Lagrangian");
    train_cmd->add_option("data", tr.data, "input CSV, one point per row");
    train_cmd->add_option("--idx-images", tr.idx_images, "IDX image file (instead of a CSV)");
    train_cmd->add_option("--idx-labels", tr.idx_labels, "IDX label file");
    train_cmd->add_option("--subset", tr.subset, "random subset size for IDX data (0 keeps all)")->capture_default_str();
    train_cmd->add_option("--units", tr.units, "hidden units p")->capture_default_str();
    train_cmd->add_option("--activation", tr.activation, "linear, relu, logsig, satlu or softplus")
        ->capture_default_str();
    train_cmd->add_option("--mu", tr.cfg.mu, "distortion weight")->capture_default_str();
    train_cmd->add_option("--alpha", tr.cfg.alpha, "entropy order")->capture_default_str();
    train_cmd->add_option("--sigma-x", tr.cfg.sigma_x, "input kernel width (0.2*sqrt(2) = 0.2828427125)")
        ->capture_default_str();
    train_cmd->add_option("--sigma-xhat", tr.cfg.sigma_xhat, "reconstruction kernel width (0.2828427125)")
        ->capture_default_str();
    train_cmd->add_option("--eig-floor", tr.cfg.eig_floor, "eigenvalues below this count as zero")
        ->capture_default_str();
    train_cmd->add_option("--step", tr.cfg.step_size, "initial ascent step")->capture_default_str();
    train_cmd->add_option("--epochs", tr.cfg.epochs, "epochs (>= 1)")->capture_default_str();
    train_cmd->add_option("--max-halvings", tr.cfg.max_halvings, "step halvings tried per epoch")
        ->capture_default_str();
    train_cmd->add_option("--batch", tr.batch, "full or cluster:k")->capture_default_str();
    train_cmd->add_option("--objective", tr.objective, "rdae, plain or denoise:sigma")->capture_default_str();
    train_cmd->add_option("--seed", tr.cfg.seed, "seed for init, clustering, subsets and noise")
        ->capture_default_str();
    train_cmd->add_option("--out-params", tr.out_params, "checkpoint output")->required();
    train_cmd->add_option("--out-history", tr.out_history, "per-epoch CSV output");
    train_cmd->add_option("--manifest", tr.manifest, "manifest path (default <out-params>.manifest.json)");

    GradCheckOptions gc;
    auto* gc_cmd = app.add_subcommand("grad-check", "Compare analytic gradients with central differences");
    gc_cmd->add_option("--n", gc.n, "points")->capture_default_str();
    gc_cmd->add_option("--d", gc.d, "input dimension")->capture_default_str();
    gc_cmd->add_option("--units", gc.units, "hidden units")->capture_default_str();
    gc_cmd->add_option("--activation", gc.activation, "activation name or 'all'")->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed, "instance seed")->capture_default_str();
    gc_cmd->add_option("--mu", gc.mu, "distortion weight")->capture_default_str();
    gc_cmd->add_option("--alpha", gc.alpha, "entropy order")->capture_default_str();
    gc_cmd->add_option("--sigma", gc.sigma, "kernel width for both Gram matrices")->capture_default_str();
    gc_cmd->add_option("--fd-step", gc.h, "finite-difference step")->capture_default_str();
    gc_cmd->add_option("--tolerance", gc.tolerance, "pass mark on the entry error")->capture_default_str();
    gc_cmd->add_option("--perturb", gc.perturb, "offset added to analytic gradients (test hook)")
        ->capture_default_str();

    EnergyMapOptions em;
    auto* em_cmd = app.add_subcommand("energy-map", "Reconstruction energy on a 2-D grid");
    em_cmd->add_option("params", em.params, "checkpoint")->required();
    em_cmd->add_option("--grid", em.grid, "x0,x1,y0,y1,steps")->required();
    em_cmd->add_option("--out", em.out, "output CSV")->required();
    em_cmd->add_option("--reference", em.reference, "data CSV; adds an on-data/grid energy ratio footer");

    RdCurveOptions rd;
    auto* rd_cmd = app.add_subcommand("rd-curve", "Water-filling rate-distortion curve of parallel Gaussians");
    rd_cmd->add_option("--variances", rd.variances, "v1,v2,...")->required();
    rd_cmd->add_option("--d-grid", rd.d_grid, "lo,hi,steps")->required();
    rd_cmd->add_option("--out", rd.out, "output CSV")->required();

    ExportOptions ex;
    auto* ex_cmd = app.add_subcommand("export-bases", "Tile analysis or synthesis vectors into a PGM");
    ex_cmd->add_option("params", ex.params, "checkpoint")->required();
    ex_cmd->add_option("--which", ex.which, "analysis (rows of W) or synthesis (columns of A)")
        ->capture_default_str();
    ex_cmd->add_option("--tile", ex.tile, "tile size HxW")->capture_default_str();
    ex_cmd->add_option("--cols", ex.cols, "tiles per row (0 = ceil(sqrt(p)))")->capture_default_str();
    ex_cmd->add_option("--out", ex.out, "output PGM")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen_data(gen, out);
        if (*train_cmd) return cmd_train(tr, out);
        if (*gc_cmd) return cmd_grad_check(gc, out);
        if (*em_cmd) return cmd_energy_map(em, out);
        if (*rd_cmd) return cmd_rd_curve(rd, out);
        if (*ex_cmd) return cmd_export_bases(ex, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}

}  // namespace rdae::cli
