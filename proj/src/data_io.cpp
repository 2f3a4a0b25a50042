#include "rdae/data_io.hpp"

#include "rdae/errors.hpp"
#include "rdae/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rdae {

namespace {

constexpr std::uint64_t kNormalStream = 0x9a55;
constexpr std::uint64_t kMixtureStream = 0x313c;
constexpr std::uint64_t kShuffleStream = 0x5afe;
constexpr double kPsdTolerance = 1e-10;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(path, mode);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    return os;
}

bool parse_numbers(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::size_t a = pos, b = end;
        while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
        while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
        if (a == b || ec != std::errc() || ptr != line.data() + b) return false;
        out.push_back(v);
        pos = end + 1;
    }
    return true;
}

}  // namespace

void GaussianSpec::validate() const {
    const auto d = mean.size();
    if (d < 1) throw UsageError("GaussianSpec: empty mean");
    if (covariance.rows() != d || covariance.cols() != d) throw UsageError("GaussianSpec: covariance shape mismatch");
    if (!mean.allFinite() || !covariance.allFinite()) throw UsageError("GaussianSpec: non-finite entry");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw UsageError("GaussianSpec: covariance must be symmetric");
    psd_cholesky(covariance);
}

void MixtureSpec::validate() const {
    if (components.empty() || components.size() != weights.size())
        throw UsageError("MixtureSpec: need one weight per component");
    const auto d = components.front().mean.size();
    for (const auto& c : components) {
        c.validate();
        if (c.mean.size() != d) throw UsageError("MixtureSpec: components differ in dimension");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw UsageError("MixtureSpec: weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw UsageError("MixtureSpec: weights must sum to 1");
}

Matrix psd_cholesky(const Matrix& C) {
    const Eigen::Index d = C.rows();
    if (C.cols() != d) throw UsageError("psd_cholesky: matrix must be square");
    Matrix L = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double pivot = C(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
        if (pivot < -kPsdTolerance)
            throw UsageError("covariance is not positive semidefinite (pivot " + std::to_string(pivot) + ")");
        if (pivot <= kPsdTolerance) {
            for (Eigen::Index i = j + 1; i < d; ++i) {
                double r = C(i, j);
                for (Eigen::Index k = 0; k < j; ++k) r -= L(i, k) * L(j, k);
                if (std::abs(r) > 1e-8) throw UsageError("covariance is not positive semidefinite");
            }
            continue;
        }
        const double root = std::sqrt(pivot);
        L(j, j) = root;
        for (Eigen::Index i = j + 1; i < d; ++i) {
            double r = C(i, j);
            for (Eigen::Index k = 0; k < j; ++k) r -= L(i, k) * L(j, k);
            L(i, j) = r / root;
        }
    }
    return L;
}

GaussianSpec gauss2d_preset() {
    GaussianSpec g;
    g.mean = Vector::Zero(2);
    g.covariance.resize(2, 2);
    g.covariance << 1.0, 0.95, 0.95, 1.0;
    return g;
}

MixtureSpec gmm3_preset() {
    MixtureSpec m;
    Matrix anti(2, 2), pro(2, 2);
    anti << 1.0, -0.95, -0.95, 1.0;
    pro << 1.0, 0.95, 0.95, 1.0;
    m.components = {{Vector{{2.0, -2.0}}, anti}, {Vector{{-2.0, -2.0}}, pro}, {Vector{{6.0, -2.0}}, pro}};
    m.weights = {0.5, 0.25, 0.25};
    return m;
}

MixtureSpec blobs_preset() {
    MixtureSpec m;
    const Matrix iso = 0.01 * Matrix::Identity(2, 2);
    m.components = {{Vector{{0.0, 0.0}}, iso}, {Vector{{10.0, 0.0}}, iso}, {Vector{{5.0, 5.0 * std::sqrt(3.0)}}, iso}};
    m.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return m;
}

PointMatrix sample_gaussian(const GaussianSpec& spec, Eigen::Index n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw UsageError("sample_gaussian: n must be >= 1");
    const Eigen::Index d = spec.mean.size();
    const Matrix L = psd_cholesky(spec.covariance);
    const CounterRng rng(seed, kNormalStream);

    PointMatrix X(n, d);
    Vector z(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal(static_cast<std::uint64_t>(i * d + k));
        X.row(i) = (spec.mean + L * z).transpose();
    }
    return X;
}

LabeledSample sample_gmm_labeled(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw UsageError("sample_gmm: n must be >= 1");
    const Eigen::Index d = spec.components.front().mean.size();
    std::vector<Matrix> factors;
    for (const auto& c : spec.components) factors.push_back(psd_cholesky(c.covariance));
    const CounterRng normal(seed, kNormalStream);
    const CounterRng choice(seed, kMixtureStream);

    LabeledSample out{PointMatrix(n, d), std::vector<int>(static_cast<std::size_t>(n))};
    Vector z(d);
    const std::size_t last = spec.weights.size() - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = choice.uniform(static_cast<std::uint64_t>(i));
        std::size_t comp = 0;
        double cumulative = 0.0;
        for (; comp < last; ++comp) {
            cumulative += spec.weights[comp];
            if (u < cumulative) break;
        }
        for (Eigen::Index k = 0; k < d; ++k) z[k] = normal.normal(static_cast<std::uint64_t>(i * d + k));
        out.points.row(i) = (spec.components[comp].mean + factors[comp] * z).transpose();
        out.component[static_cast<std::size_t>(i)] = static_cast<int>(comp);
    }
    return out;
}

PointMatrix sample_gmm(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed) {
    return sample_gmm_labeled(spec, n, seed).points;
}

MnistSet parse_mnist_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
    if (image_bytes.size() < 16) throw FormatError("IDX images: file shorter than its 16-byte header");
    if (label_bytes.size() < 8) throw FormatError("IDX labels: file shorter than its 8-byte header");
    const std::uint32_t image_magic = read_be32(image_bytes, 0);
    if (image_magic != kIdxImagesMagic)
        throw FormatError("IDX images: magic " + hex32(image_magic) + ", expected " + hex32(kIdxImagesMagic));
    const std::uint32_t label_magic = read_be32(label_bytes, 0);
    if (label_magic != kIdxLabelsMagic)
        throw FormatError("IDX labels: magic " + hex32(label_magic) + ", expected " + hex32(kIdxLabelsMagic));

    const std::uint64_t count = read_be32(image_bytes, 4);
    const std::uint64_t rows = read_be32(image_bytes, 8);
    const std::uint64_t cols = read_be32(image_bytes, 12);
    const std::uint64_t label_count = read_be32(label_bytes, 4);
    if (rows == 0 || cols == 0) throw FormatError("IDX images: zero image dimension");
    const std::uint64_t pixels = rows * cols;
    if (image_bytes.size() - 16 != count * pixels)
        throw FormatError("IDX images: header promises " + std::to_string(count) + "x" + std::to_string(rows) + "x" +
                          std::to_string(cols) + " bytes of pixels, file holds " +
                          std::to_string(image_bytes.size() - 16));
    if (label_bytes.size() - 8 != label_count)
        throw FormatError("IDX labels: header promises " + std::to_string(label_count) + " labels, file holds " +
                          std::to_string(label_bytes.size() - 8));
    if (label_count != count)
        throw FormatError("IDX: " + std::to_string(count) + " images but " + std::to_string(label_count) + " labels");

    MnistSet set;
    set.rows = static_cast<int>(rows);
    set.cols = static_cast<int>(cols);
    set.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    const std::uint8_t* px = image_bytes.data() + 16;
    for (std::uint64_t i = 0; i < count; ++i)
        for (std::uint64_t k = 0; k < pixels; ++k)
            set.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = px[i * pixels + k] / 255.0;
    set.labels.assign(label_bytes.begin() + 8, label_bytes.end());
    return set;
}

MnistSet load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto images = read_file_bytes(images_path);
    const auto labels = read_file_bytes(labels_path);
    try {
        return parse_mnist_idx(images, labels);
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + " [" + images_path.string() + ", " + labels_path.string() + "]");
    }
}

std::vector<Eigen::Index> shuffled_subset(Eigen::Index n, Eigen::Index count, std::uint64_t seed) {
    if (count < 0 || count > n) throw UsageError("shuffled_subset: count must lie in [0, n]");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const CounterRng rng(seed, kShuffleStream);
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.uniform(static_cast<std::uint64_t>(i)) * static_cast<double>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(std::min(j, i))]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
}

PointMatrix select_rows(const PointMatrix& X, std::span<const Eigen::Index> rows) {
    PointMatrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= X.rows()) throw UsageError("select_rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    }
    return out;
}

Centered center_columns(const PointMatrix& X) {
    if (X.rows() < 1) throw UsageError("center_columns: empty data");
    Centered out;
    out.mean = X.colwise().mean().transpose();
    out.data = X.rowwise() - out.mean.transpose();
    return out;
}

std::uint64_t fingerprint(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t byte : bytes) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint64_t fingerprint_file(const std::filesystem::path& path) { return fingerprint(read_file_bytes(path)); }

void write_csv_matrix(std::ostream& os, const Matrix& M) {
    char buf[32];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) os << ',';
            std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
            os << buf;
        }
        os << '\n';
    }
}

void emit_csv_matrix(const Matrix& M, const std::filesystem::path& path) {
    auto os = open_for_write(path);
    write_csv_matrix(os, M);
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_csv_matrix(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!parse_numbers(line, values)) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw FormatError("CSV line " + std::to_string(line_no) + ": not a list of numbers");
        }
        if (!rows.empty() && values.size() != rows.front().size())
            throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(rows.front().size()) + " fields");
        rows.push_back(values);
    }
    if (rows.empty()) throw FormatError("CSV: no data rows");
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return M;
}

Matrix load_csv_matrix(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    try {
        return read_csv_matrix(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

GrayImage tile_grid(const Matrix& basis, TileShape tile, int cols) {
    if (tile.height < 1 || tile.width < 1) throw UsageError("tile_grid: tile dimensions must be positive");
    if (cols < 1) throw UsageError("tile_grid: cols must be positive");
    if (basis.cols() != static_cast<Eigen::Index>(tile.height) * tile.width)
        throw UsageError("tile_grid: rows of length " + std::to_string(basis.cols()) + " do not reshape to " +
                         std::to_string(tile.height) + "x" + std::to_string(tile.width));
    const int count = static_cast<int>(basis.rows());
    if (count < 1) throw UsageError("tile_grid: no tiles");
    const int grid_cols = std::min(cols, count);
    const int grid_rows = (count + cols - 1) / cols;

    GrayImage img;
    img.width = grid_cols * tile.width + (grid_cols - 1);
    img.height = grid_rows * tile.height + (grid_rows - 1);
    img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 0);

    for (int t = 0; t < count; ++t) {
        const auto row = basis.row(t);
        const double lo = row.minCoeff();
        const double hi = row.maxCoeff();
        const int x0 = (t % cols) * (tile.width + 1);
        const int y0 = (t / cols) * (tile.height + 1);
        for (int y = 0; y < tile.height; ++y) {
            for (int x = 0; x < tile.width; ++x) {
                const double v = row(y * tile.width + x);
                const std::uint8_t level =
                    hi > lo ? static_cast<std::uint8_t>(std::lround((v - lo) / (hi - lo) * 255.0)) : std::uint8_t{128};
                img.pixels[static_cast<std::size_t>(y0 + y) * static_cast<std::size_t>(img.width) +
                           static_cast<std::size_t>(x0 + x)] = level;
            }
        }
    }
    return img;
}

void write_pgm(std::ostream& os, const GrayImage& image) {
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

void emit_pgm_grid(const Matrix& basis, TileShape tile, int cols, const std::filesystem::path& path) {
    const GrayImage img = tile_grid(basis, tile, cols);
    auto os = open_for_write(path, std::ios::out | std::ios::binary);
    write_pgm(os, img);
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace rdae
