#pragma once

#include <Eigen/Dense>

namespace rdae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N×d data matrix, one sample per row.
using PointMatrix = Matrix;

/// Throws UsageError unless X has at least `min_rows` rows, one column and
/// only finite entries.
void require_points(const PointMatrix& X, Eigen::Index min_rows = 1, const char* what = "points");

}  // namespace rdae
