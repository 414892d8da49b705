#pragma once

#include <cstdint>
#include <vector>

#include "orthomerge/mat.hpp"

namespace ortho {

struct SvdResult {
    Mat u;                   // m x r
    std::vector<double> s;   // r, descending, non-negative
    Mat vt;                  // r x d
};

struct PolarResult {
    Mat q;  // m x d, orthonormal columns
    Mat p;  // d x d, symmetric PSD
};

struct SymEigResult {
    std::vector<double> values;  // ascending
    Mat vectors;                 // columns are eigenvectors
};

/// One-sided Jacobi SVD. Throws NumericalFailure if the sweep cap (60)
/// is hit before off-diagonal Gram entries drop below 1e-12 * ||A||_F^2.
SvdResult svd(const Mat& a);

/// Polar factorization a = q * p via the SVD; requires rows >= cols.
PolarResult polar_decompose(const Mat& a);

/// a^T a.
Mat gram(const Mat& a);

/// Pairwise angles between columns, in degrees, pair order (k,l) with k<l.
/// Throws DegenerateColumn listing any column with norm <= 1e-12.
std::vector<double> column_angles(const Mat& a);

/// Haar-uniform sample from the Stiefel manifold V_d(R^m): QR of a
/// Gaussian matrix with R's diagonal kept positive.
Mat sample_stiefel(std::size_t m, std::size_t d, std::uint64_t seed);

/// Eigendecomposition of a symmetric matrix (cyclic Jacobi).
SymEigResult sym_eig(const Mat& a);

/// Symmetric PSD square root via eigendecomposition (negative eigenvalues
/// clamped to zero).
Mat sym_sqrt(const Mat& a);

}  // namespace ortho
