#pragma once

#include "rdae/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rdae {

struct GaussianSpec {
    Vector mean;
    Matrix covariance;

    void validate() const;
};

struct MixtureSpec {
    std::vector<GaussianSpec> components;
    std::vector<double> weights;

    void validate() const;
};

/// Lower-triangular L with L·Lᵀ = C for symmetric positive semidefinite C.
/// Zero pivots are allowed; a pivot below −1e−10 throws UsageError.
Matrix psd_cholesky(const Matrix& covariance);

/// Zero-mean bivariate Gaussian, unit variances, correlation 0.95.
GaussianSpec gauss2d_preset();
/// Three correlated bivariate components, weights (0.5, 0.25, 0.25).
MixtureSpec gmm3_preset();
/// Three isotropic blobs with σ = 0.1 whose centers are 10 apart.
MixtureSpec blobs_preset();

/// Rows mean + L·z with z standard normal from the counter stream of `seed`.
PointMatrix sample_gaussian(const GaussianSpec& spec, Eigen::Index n, std::uint64_t seed);

struct LabeledSample {
    PointMatrix points;
    std::vector<int> component;
};

/// Component drawn from the weights, then a Gaussian draw that uses the
/// same normal stream as sample_gaussian.
LabeledSample sample_gmm_labeled(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed);
PointMatrix sample_gmm(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed);

struct MnistSet {
    Matrix images;  // N×(rows·cols), pixels scaled to [0, 1]
    std::vector<std::uint8_t> labels;
    int rows = 0;
    int cols = 0;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Big-endian IDX images + labels. Throws FormatError on a wrong magic,
/// a size that disagrees with the header, or a count mismatch between files.
MnistSet load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
MnistSet parse_mnist_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);

/// First `count` indices of a seeded Fisher–Yates shuffle of 0..n−1.
std::vector<Eigen::Index> shuffled_subset(Eigen::Index n, Eigen::Index count, std::uint64_t seed);
PointMatrix select_rows(const PointMatrix& X, std::span<const Eigen::Index> rows);

struct Centered {
    PointMatrix data;
    Vector mean;
};
Centered center_columns(const PointMatrix& X);

/// 64-bit FNV-1a.
std::uint64_t fingerprint(std::span<const std::uint8_t> bytes);
std::uint64_t fingerprint_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Headerless CSV, 17 significant digits.
void write_csv_matrix(std::ostream& os, const Matrix& M);
void emit_csv_matrix(const Matrix& M, const std::filesystem::path& path);
/// Reads numeric CSV; a first line that does not parse as numbers is taken
/// as a header and skipped. Lines starting with '#' are ignored.
Matrix read_csv_matrix(std::istream& is);
Matrix load_csv_matrix(const std::filesystem::path& path);

struct TileShape {
    int height = 0;
    int width = 0;
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// Each row of `basis` becomes one h×w tile, min–max scaled to 0..255
/// (constant tiles render as 128). Tiles run left to right, `cols` per row,
/// separated by 1 px of black.
GrayImage tile_grid(const Matrix& basis, TileShape tile, int cols);
void write_pgm(std::ostream& os, const GrayImage& image);
void emit_pgm_grid(const Matrix& basis, TileShape tile, int cols, const std::filesystem::path& path);

}  // namespace rdae
