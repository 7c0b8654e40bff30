#pragma once

#include "wml/core.hpp"

namespace wml {

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // columns are orthonormal eigenvectors
};

/// Cyclic Jacobi eigensolver for small symmetric matrices (d <= kMaxDim).
SymmetricEigen jacobi_eigen(const Mat& m);

bool is_symmetric(const Mat& m, double tol = 1e-12);

/// M^alpha for symmetric positive-definite M.
/// Throws ValidationError when M is not symmetric or not positive definite.
Mat spd_power(const Mat& m, double alpha);

/// Largest singular value.
double spectral_norm(const Mat& m);

/// Clips eigenvalues below `rel_floor * lambda_max`; returns the number clipped.
int clip_spectrum(Mat& m, double rel_floor = 1e-10);

}  // namespace wml
