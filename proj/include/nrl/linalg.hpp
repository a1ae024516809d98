#pragma once

#include <cstddef>
#include <vector>

namespace nrl {

// Row-major dense matrix; only what the Hessian and its checks need.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
  int sweeps = 0;
};

// Cyclic Jacobi rotations for a symmetric matrix. Slow and robust: it is an
// oracle for the closed-form spectrum, not a production eigensolver.
EigenDecomposition jacobi_eigen(const Matrix& sym, double tol = 1e-14, int max_sweeps = 100);

}  // namespace nrl
