#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace fedsim {

/// Model parameters, momenta, gradients and displacements all share this
/// representation: a dense column of 64-bit reals.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Throws Error(kDimensionMismatch) naming `what` when sizes differ.
void require_dim(const Vector& v, Eigen::Index dim, std::string_view what);

bool all_finite(const Vector& v) noexcept;

/// Largest absolute entry; zero for an empty vector.
double max_norm(const Vector& v) noexcept;

}  // namespace fedsim
