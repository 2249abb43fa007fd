#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace aagate {

using complexd = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr complexd imag_unit{0.0, 1.0};

// Wrap an angle into (-pi, pi].
inline double wrap_pi(double x) {
  double r = std::remainder(x, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

inline double max_abs(const cmat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_error(const cmat& m) {
  return max_abs(m - m.adjoint());
}

inline double unitarity_error(const cmat& m) {
  return max_abs(m * m.adjoint() - cmat::Identity(m.rows(), m.cols()));
}

inline bool is_hermitian(const cmat& m, double tol = 1e-12) {
  return m.rows() == m.cols() && hermiticity_error(m) <= tol;
}

inline bool is_unitary(const cmat& m, double tol = 1e-10) {
  return m.rows() == m.cols() && unitarity_error(m) <= tol;
}

// Shortest-precision round-trippable formatting, used by every CSV writer so
// repeated runs produce byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace aagate
