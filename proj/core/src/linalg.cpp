#include "mapkit/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace mapkit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::BadDiagonal: return "BadDiagonal";
    case ErrorCode::RowSumExceedsZero: return "RowSumExceedsZero";
    case ErrorCode::ReducibleGenerator: return "ReducibleGenerator";
    case ErrorCode::ReducibleChain: return "ReducibleChain";
    case ErrorCode::SubordinatorPhase: return "SubordinatorPhase";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::NullRecurrent: return "NullRecurrent";
    case ErrorCode::SingularPivot: return "SingularPivot";
    case ErrorCode::SingularAminus1: return "SingularAminus1";
    case ErrorCode::NoValidAlpha: return "NoValidAlpha";
    case ErrorCode::NullRecurrentAndSingularA: return "NullRecurrentAndSingularA";
    case ErrorCode::HorizonTooSmall: return "HorizonTooSmall";
    case ErrorCode::ZOutsideDomain: return "ZOutsideDomain";
    case ErrorCode::ZeroArgument: return "ZeroArgument";
    case ErrorCode::WrongRegime: return "WrongRegime";
    case ErrorCode::NotDefective: return "NotDefective";
    case ErrorCode::NoValidRoute: return "NoValidRoute";
    case ErrorCode::FluidPhasePresent: return "FluidPhasePresent";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::BadModelFile: return "BadModelFile";
  }
  return "UnknownError";
}

namespace {

// Smallest and largest |pivot| of a partial-pivot LU factorization.
std::pair<double, double> pivot_range(const Eigen::PartialPivLU<Matrix>& lu) {
  Vector d = lu.matrixLU().diagonal().cwiseAbs();
  return {d.minCoeff(), d.maxCoeff()};
}

}  // namespace

bool is_invertible(const Matrix& m, double pivot_tol) {
  if (m.rows() == 0 || m.rows() != m.cols()) return false;
  Eigen::PartialPivLU<Matrix> lu(m);
  auto [mn, mx] = pivot_range(lu);
  return mx > 0.0 && mn > pivot_tol * mx;
}

Matrix lu_inverse(const Matrix& m, double pivot_tol) {
  Eigen::PartialPivLU<Matrix> lu(m);
  auto [mn, mx] = pivot_range(lu);
  if (!(mx > 0.0) || !(mn > pivot_tol * mx)) {
    throw Error(ErrorCode::SingularPivot, "matrix is singular to the pivot tolerance");
  }
  return lu.inverse();
}

Matrix lu_solve(const Matrix& a, const Matrix& rhs, double pivot_tol) {
  Eigen::PartialPivLU<Matrix> lu(a);
  auto [mn, mx] = pivot_range(lu);
  if (!(mx > 0.0) || !(mn > pivot_tol * mx)) {
    throw Error(ErrorCode::SingularPivot, "linear system is singular to pivot tolerance");
  }
  return lu.solve(rhs);
}

std::vector<Complex> eigenvalues(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  std::vector<Complex> out(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

std::vector<Complex> eigenvalues(const CMatrix& m) {
  Eigen::ComplexEigenSolver<CMatrix> es(m, /*computeEigenvectors=*/false);
  std::vector<Complex> out(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

double spectral_radius(const Matrix& m) {
  double r = 0.0;
  for (const Complex& ev : eigenvalues(m)) r = std::max(r, std::abs(ev));
  return r;
}

double max_real_eigenvalue(const Matrix& m) {
  double r = -std::numeric_limits<double>::infinity();
  for (const Complex& ev : eigenvalues(m)) r = std::max(r, ev.real());
  return r;
}

double max_real_eigenvalue(const CMatrix& m) {
  double r = -std::numeric_limits<double>::infinity();
  for (const Complex& ev : eigenvalues(m)) r = std::max(r, ev.real());
  return r;
}

double min_abs_eigenvalue(const Matrix& m) {
  double r = std::numeric_limits<double>::infinity();
  for (const Complex& ev : eigenvalues(m)) r = std::min(r, std::abs(ev));
  return r;
}

double min_real_eigenvalue(const Matrix& m) {
  double r = std::numeric_limits<double>::infinity();
  for (const Complex& ev : eigenvalues(m)) r = std::min(r, ev.real());
  return r;
}

bool spectra_match(const Matrix& a, const Matrix& b, double tol) {
  auto ea = eigenvalues(a);
  auto eb = eigenvalues(b);
  if (ea.size() != eb.size()) return false;
  auto lex = [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  };
  std::sort(ea.begin(), ea.end(), lex);
  std::sort(eb.begin(), eb.end(), lex);
  for (size_t i = 0; i < ea.size(); ++i) {
    if (std::abs(ea[i] - eb[i]) > tol) return false;
  }
  return true;
}

Matrix expm(const Matrix& a) {
  // Order-13 diagonal Pade coefficients.
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const double theta13 = 5.371920351148152;

  const Eigen::Index n = a.rows();
  double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  int squarings = 0;
  Matrix as = a;
  if (norm > theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
    as /= std::pow(2.0, squarings);
  }

  Matrix a2 = as * as;
  Matrix a4 = a2 * a2;
  Matrix a6 = a2 * a4;
  Matrix id = Matrix::Identity(n, n);

  Matrix u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                   b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
             b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  Matrix r = Eigen::PartialPivLU<Matrix>(v - u).solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

bool strongly_connected(const std::vector<std::vector<int>>& adjacency) {
  const size_t n = adjacency.size();
  if (n == 0) return true;

  std::vector<std::vector<int>> reversed(n);
  for (size_t u = 0; u < n; ++u) {
    for (int v : adjacency[u]) reversed[static_cast<size_t>(v)].push_back(static_cast<int>(u));
  }

  auto reaches_all = [n](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    size_t count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<size_t>(u)]) {
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };

  return reaches_all(adjacency) && reaches_all(reversed);
}

}  // namespace mapkit
