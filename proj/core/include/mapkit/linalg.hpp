#pragma once

#include <vector>

#include "mapkit/errors.hpp"
#include "mapkit/types.hpp"

namespace mapkit {

// Pivot threshold below which an LU factor is declared singular, relative to
// the largest pivot.
inline constexpr double kPivotTol = 1e-12;

bool is_invertible(const Matrix& m, double pivot_tol = kPivotTol);

// LU inversion with a pivot check; throws Error(SingularPivot) instead of
// returning a garbage inverse.
Matrix lu_inverse(const Matrix& m, double pivot_tol = kPivotTol);
Matrix lu_solve(const Matrix& a, const Matrix& rhs, double pivot_tol = kPivotTol);

std::vector<Complex> eigenvalues(const Matrix& m);
std::vector<Complex> eigenvalues(const CMatrix& m);

double spectral_radius(const Matrix& m);
double max_real_eigenvalue(const Matrix& m);
double max_real_eigenvalue(const CMatrix& m);
double min_abs_eigenvalue(const Matrix& m);
double min_real_eigenvalue(const Matrix& m);

// True when the two spectra agree pairwise within tol (sorted comparison).
bool spectra_match(const Matrix& a, const Matrix& b, double tol);

// Matrix exponential by scaling and squaring with the order-13 diagonal Pade
// approximant.
Matrix expm(const Matrix& a);

// Strong connectivity of a directed graph given as an adjacency list.
bool strongly_connected(const std::vector<std::vector<int>>& adjacency);

}  // namespace mapkit
