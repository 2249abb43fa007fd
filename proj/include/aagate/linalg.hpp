#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "aagate/common.hpp"

namespace aagate {

// The two spins. Channel a is the high-frequency target spin, channel b the
// low-frequency control spin. Two-spin operators live in the control-major
// product basis |b a> ordered  |uu>, |ud>, |du>, |dd>  (first label = b).
enum class Site { a, b };

enum class Axis { x, y, z };

inline const char* site_name(Site s) { return s == Site::a ? "a" : "b"; }

// Spin-1/2 angular momentum component, i.e. half the Pauli matrix.
inline cmat angular_momentum(Axis axis) {
  cmat m(2, 2);
  switch (axis) {
    case Axis::x:
      m << 0.0, 0.5, 0.5, 0.0;
      break;
    case Axis::y:
      m << 0.0, complexd(0.0, -0.5), complexd(0.0, 0.5), 0.0;
      break;
    case Axis::z:
      m << 0.5, 0.0, 0.0, -0.5;
      break;
  }
  return m;
}

// Lift a single-spin operator into the two-spin space. Site b is the slow
// (leftmost) tensor factor, site a the fast one.
inline cmat embed(const cmat& op, Site site) {
  if (op.rows() != 2 || op.cols() != 2)
    throw std::invalid_argument("embed: operator must be 2x2");
  const cmat id = cmat::Identity(2, 2);
  cmat out(4, 4);
  const cmat& left = (site == Site::b) ? op : id;
  const cmat& right = (site == Site::b) ? id : op;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block(2 * i, 2 * j, 2, 2) = left(i, j) * right;
  return out;
}

// exp(-i H t) for Hermitian H, via spectral decomposition (exact up to
// the eigensolver, no series truncation).
inline cmat expm_hermitian(const cmat& h, double t) {
  if (h.rows() != h.cols())
    throw std::invalid_argument("expm_hermitian: matrix must be square");
  const double herm_tol = 1e-9 * std::max(1.0, max_abs(h));
  if (hermiticity_error(h) > herm_tol)
    throw std::invalid_argument("expm_hermitian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<cmat> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("expm_hermitian: eigendecomposition failed");
  const auto& evals = es.eigenvalues();
  cvec phases(h.rows());
  for (Eigen::Index k = 0; k < h.rows(); ++k)
    phases(k) = std::exp(complexd(0.0, -evals(k) * t));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

// Bloch vector (2<Ix>, 2<Iy>, 2<Iz>) of a normalized single-spin pure state.
inline std::array<double, 3> bloch_vector(const cvec& psi) {
  if (psi.size() != 2)
    throw std::invalid_argument("bloch_vector: state must have dimension 2");
  const complexd c = psi(0) * std::conj(psi(1));
  return {2.0 * c.real(), -2.0 * c.imag(),
          std::norm(psi(0)) - std::norm(psi(1))};
}

// Bloch vector of a single-spin density matrix.
inline std::array<double, 3> bloch_vector(const cmat& rho) {
  if (rho.rows() != 2 || rho.cols() != 2)
    throw std::invalid_argument("bloch_vector: matrix must be 2x2");
  const complexd c = rho(0, 1);
  return {2.0 * c.real(), -2.0 * c.imag(), rho(0, 0).real() - rho(1, 1).real()};
}

struct UndefinedPhaseError : std::domain_error {
  using std::domain_error::domain_error;
};

// arg<psi1|psi2> in (-pi, pi]. The relative phase is undefined when the
// states are (numerically) orthogonal.
inline double overlap_phase(const cvec& psi1, const cvec& psi2) {
  if (psi1.size() != psi2.size())
    throw std::invalid_argument("overlap_phase: dimension mismatch");
  const complexd ov = psi1.dot(psi2);  // conjugates the first argument
  if (std::abs(ov) <= 1e-9)
    throw UndefinedPhaseError(
        "overlap_phase: states are orthogonal, relative phase undefined");
  return wrap_pi(std::arg(ov));
}

}  // namespace aagate
