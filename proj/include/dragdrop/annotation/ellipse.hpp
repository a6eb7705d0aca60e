#pragma once

#include <span>

#include <Eigen/Core>

#include "dragdrop/annotation/annotation.hpp"

namespace dragdrop {

/// Conic coefficients (A, B, C, D, E, F) of A x² + B xy + C y² + D x + E y + F = 0.
using Conic = Eigen::Matrix<double, 6, 1>;

/// Direct least-squares ellipse fit (Fitzgibbon, Pilu & Fisher) in the numerically stable
/// Halir-Flusser partitioning. The returned conic is normalised so that 4AC − B² = 1.
/// Throws FitError for fewer than 5 points or degenerate (collinear/coincident) input.
Conic fit_conic(std::span<const Eigen::Vector2d> points);

/// Centre / semi-axes / orientation of an ellipse conic. Throws FitError if not an ellipse.
EllipseParams conic_to_ellipse(const Conic& conic);

EllipseParams fit_ellipse(std::span<const Eigen::Vector2d> points);

}  // namespace dragdrop
