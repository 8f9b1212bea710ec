// Shared aliases and small helpers used across the library.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcf {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;

inline cplx I() { return cplx(0.0, 1.0); }

// max |entry| of a complex matrix
inline double inf_norm(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

// ||A - A^dagger||_inf
inline double hermiticity_defect(const Mat& m) {
  return inf_norm(m - m.adjoint());
}

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace hcf
