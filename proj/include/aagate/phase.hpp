#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <ostream>
#include <vector>

#include "aagate/engine.hpp"

namespace aagate {

// Closed path of the conditional spin state on the Bloch sphere, with the
// underlying state vectors kept so phase products can be formed alongside
// the purely geometric data.
struct BlochLoop {
  std::vector<std::array<double, 3>> points;
  std::vector<cvec> states;

  double closure_gap() const {
    if (points.size() < 2) return 0.0;
    const auto& a = points.front();
    const auto& b = points.back();
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                     (a[1] - b[1]) * (a[1] - b[1]) +
                     (a[2] - b[2]) * (a[2] - b[2]));
  }

  bool closed(double tol = 1e-6) const { return closure_gap() <= tol; }
};

inline double solid_angle(const BlochLoop& loop);

struct PhaseReport {
  double total = 0.0;       // arg of the initial/final toggling-state overlap
  double dynamic = 0.0;     // -integral of <H> in the toggling frame
  double geometric = 0.0;   // total - dynamic, wrapped to (-pi, pi]
  double solid_angle = 0.0; // oriented area enclosed by the Bloch loop
  double winding_m = 0.0;   // geometric / solid_angle, rounded to +-1/2
  std::vector<double> segment_dynamic;  // per timed segment, in time order
};

namespace detail {

inline void require_toggling_compatible(const Trajectory& traj) {
  if (traj.samples.empty())
    throw std::invalid_argument("toggling analysis: empty trajectory");
  if (!traj.instantaneous)
    throw std::invalid_argument(
        "toggling analysis: finite-pulse trajectories are not supported; "
        "rerun with instantaneous pulses");
  if (!traj.pure_run)
    throw std::invalid_argument(
        "toggling analysis: requires a pure-state run without relaxation");
}

// Conditional 2x2 block of the cumulative pulse rotation. Pulses on the
// control channel mix the branches and make the conditional picture
// meaningless, so any block off-diagonal content is an error.
inline cmat branch_rotation(const cmat& rotation, SpinState b) {
  const int off = branch_offset(b);
  const int other = 2 - off;
  if (rotation.block(off, other, 2, 2).cwiseAbs().maxCoeff() > 1e-9 ||
      rotation.block(other, off, 2, 2).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument(
        "toggling analysis: pulse rotations mix the control branches");
  return rotation.block(off, off, 2, 2);
}

inline cvec toggling_state(const TrajectorySample& s, SpinState b) {
  const cvec cond = conditional_amplitudes(s.state.amplitudes(), b);
  if (std::abs(cond.norm() - 1.0) > 1e-9)
    throw std::invalid_argument(
        "toggling analysis: state is not confined to the selected control "
        "branch (initialize the control spin in that eigenstate)");
  return branch_rotation(s.pulse_rotation, b).adjoint() * cond;
}

}  // namespace detail

// Undo the accumulated pulse rotations sample by sample. The resulting
// conditional state is continuous across instantaneous pulses and traces the
// closed loop whose geometry carries the conditional phase. For the
// canonical three-pulse sequence on the up branch this is the two-lobed
// circuit of half great circles about (0, -sin theta, +-cos theta); the down
// branch sits still at (1, 0, 0).
inline BlochLoop toggling_trajectory(const Trajectory& traj, SpinState b_state) {
  detail::require_toggling_compatible(traj);
  BlochLoop loop;
  loop.points.reserve(traj.samples.size());
  loop.states.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    cvec tog = detail::toggling_state(s, b_state);
    loop.points.push_back(bloch_vector(tog));
    loop.states.push_back(std::move(tog));
  }
  return loop;
}

// Split the phase picked up over one closed toggling-frame cycle into its
// dynamical and geometric parts. The dynamical part is the trapezoidal
// integral of <H> between samples, taken in the toggling frame where
// instantaneous pulses contribute nothing; the geometric part is whatever
// remains of the total overlap phase.
inline PhaseReport phase_decomposition(const Trajectory& traj,
                                       SpinState b_state) {
  detail::require_toggling_compatible(traj);
  const BlochLoop loop = toggling_trajectory(traj, b_state);
  if (!loop.closed())
    throw std::invalid_argument(
        "phase_decomposition: trajectory is not cyclic on the Bloch sphere");

  PhaseReport report;
  report.total = overlap_phase(loop.states.front(), loop.states.back());

  std::map<int, double> per_segment;
  std::vector<int> segment_order;
  double dynamic = 0.0;
  for (size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const auto& left = traj.samples[k];
    const auto& right = traj.samples[k + 1];
    const double dt = right.t - left.t;
    if (dt <= 0.0) continue;
    const cmat h_block =
        detail::conditional_block(left.hamiltonian, b_state);
    const cmat c_seg = detail::branch_rotation(left.pulse_rotation, b_state);
    const cmat h_tog = c_seg.adjoint() * h_block * c_seg;
    const auto expect = [&](const cvec& psi) {
      return (psi.adjoint() * h_tog * psi)(0, 0).real();
    };
    const double contrib =
        -0.5 * dt * (expect(loop.states[k]) + expect(loop.states[k + 1]));
    dynamic += contrib;
    auto [it, inserted] = per_segment.try_emplace(left.segment, 0.0);
    if (inserted) segment_order.push_back(left.segment);
    it->second += contrib;
  }
  report.dynamic = dynamic;
  report.geometric = wrap_pi(report.total - report.dynamic);
  for (int id : segment_order) report.segment_dynamic.push_back(per_segment[id]);

  report.solid_angle = solid_angle(loop);
  report.winding_m = std::abs(report.solid_angle) > 1e-9
                         ? std::round(2.0 * report.geometric /
                                      report.solid_angle) / 2.0
                         : 0.5;
  return report;
}

// Gauge-invariant discrete geometric phase: minus the argument of the
// product of successive overlaps around the closed chain of samples. Every
// state enters once as a bra and once as a ket, so per-sample phase choices
// cancel, and the product converges to the continuum geometric phase as the
// sampling densifies.
inline double pancharatnam_phase(const BlochLoop& loop) {
  const auto& st = loop.states;
  if (st.size() < 3)
    throw std::invalid_argument("pancharatnam_phase: need at least 3 samples");
  complexd prod(1.0, 0.0);
  for (size_t k = 0; k < st.size(); ++k) {
    const cvec& a = st[k];
    const cvec& b = st[(k + 1) % st.size()];
    complexd link = a.dot(b);  // <a|b>
    const double mag = std::abs(link);
    if (mag <= 1e-9)
      throw std::invalid_argument(
          "pancharatnam_phase: consecutive samples are orthogonal");
    prod *= link / mag;
  }
  return wrap_pi(-std::arg(prod));
}

namespace detail {

using vec3 = std::array<double, 3>;

inline double dot3(const vec3& a, const vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline vec3 cross3(const vec3& a, const vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
inline double norm3(const vec3& a) { return std::sqrt(dot3(a, a)); }
inline vec3 scale3(const vec3& a, double s) {
  return {a[0] * s, a[1] * s, a[2] * s};
}

// Oriented spherical area of the triangle (a, b, c) on the unit sphere.
inline double triangle_solid_angle(const vec3& a, const vec3& b,
                                   const vec3& c) {
  const double num = dot3(a, cross3(b, c));
  const double den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
  return 2.0 * std::atan2(num, den);
}

// Transversal-crossing test between great-circle arcs (p, q) and (r, s),
// each assumed shorter than pi. Arcs sharing a plane (including retraced
// path pieces) never count as crossings.
inline bool arcs_cross(const vec3& p, const vec3& q, const vec3& r,
                       const vec3& s) {
  const vec3 n1 = cross3(p, q);
  const vec3 n2 = cross3(r, s);
  const double l1 = norm3(n1), l2 = norm3(n2);
  if (l1 < 1e-12 || l2 < 1e-12) return false;  // degenerate arc
  vec3 d = cross3(n1, n2);
  const double ld = norm3(d);
  if (ld < 1e-9 * l1 * l2) return false;  // coplanar arcs
  d = scale3(d, 1.0 / ld);
  const double eps = 1e-9;
  for (int sign = 0; sign < 2; ++sign) {
    const vec3 c = sign ? scale3(d, -1.0) : d;
    const bool in1 = dot3(cross3(p, c), n1) > eps * l1 &&
                     dot3(cross3(c, q), n1) > eps * l1;
    const bool in2 = dot3(cross3(r, c), n2) > eps * l2 &&
                     dot3(cross3(c, s), n2) > eps * l2;
    if (in1 && in2) return true;
  }
  return false;
}

}  // namespace detail

// Oriented solid angle enclosed by a closed Bloch loop, from the summed
// spherical excess of the triangle fan around the loop's mean direction.
// Result lies in (-4 pi, 4 pi); self-intersecting loops are rejected.
inline double solid_angle(const BlochLoop& loop) {
  using detail::vec3;
  if (loop.points.size() < 3)
    throw std::invalid_argument("solid_angle: need at least 3 points");
  if (!loop.closed())
    throw std::invalid_argument("solid_angle: loop is not closed");

  // Drop the duplicated closing point; edges wrap around.
  std::vector<vec3> pts(loop.points.begin(), loop.points.end() - 1);
  const size_t m = pts.size();
  if (m < 3) return 0.0;

  // Self-intersection guard on a stride-reduced copy of the polygon.
  {
    const size_t target = 512;
    const size_t stride = (m + target - 1) / target;
    std::vector<vec3> coarse;
    for (size_t i = 0; i < m; i += stride) coarse.push_back(pts[i]);
    const size_t mc = coarse.size();
    if (mc >= 4) {
      for (size_t i = 0; i < mc; ++i) {
        for (size_t j = i + 2; j < mc; ++j) {
          if (i == 0 && j == mc - 1) continue;  // wraparound neighbours
          if (detail::arcs_cross(coarse[i], coarse[(i + 1) % mc], coarse[j],
                                 coarse[(j + 1) % mc]))
            throw std::invalid_argument("solid_angle: loop self-intersects");
        }
      }
    }
  }

  vec3 apex{0.0, 0.0, 0.0};
  for (const auto& p : pts)
    apex = {apex[0] + p[0], apex[1] + p[1], apex[2] + p[2]};
  if (detail::norm3(apex) < 1e-6 * static_cast<double>(m)) {
    // Mean direction degenerates (e.g. a full great circle): fall back to
    // the loop's area vector.
    apex = {0.0, 0.0, 0.0};
    for (size_t i = 0; i < m; ++i) {
      const vec3 c = detail::cross3(pts[i], pts[(i + 1) % m]);
      apex = {apex[0] + c[0], apex[1] + c[1], apex[2] + c[2]};
    }
  }
  const double apex_norm = detail::norm3(apex);
  if (apex_norm < 1e-12) return 0.0;  // fully degenerate loop
  apex = detail::scale3(apex, 1.0 / apex_norm);

  double omega = 0.0;
  for (size_t i = 0; i < m; ++i)
    omega += detail::triangle_solid_angle(apex, pts[i], pts[(i + 1) % m]);
  while (omega <= -4.0 * pi) omega += 8.0 * pi;
  while (omega > 4.0 * pi) omega -= 8.0 * pi;
  return omega;
}

// Full 4x4 propagator of a timeline, column by column through the engine.
inline cmat extract_gate_unitary(const EventTimeline& timeline,
                                 const SpinSystem& sys, const FrameSpec& frame,
                                 const SimOptions& opts = {}) {
  if (opts.relaxation)
    throw std::invalid_argument(
        "extract_gate_unitary: non-unitary evolution has no single propagator");
  cmat u(4, 4);
  for (int col = 0; col < 4; ++col) {
    cvec e = cvec::Zero(4);
    e(col) = 1.0;
    SimOptions run = opts;
    run.dt_record = timeline.total_duration > 0.0
                        ? timeline.total_duration  // endpoints only
                        : 1.0;
    const SimResult res =
        simulate(timeline, sys, frame, QuantumState::pure(e), run);
    u.col(col) = res.final_state.amplitudes();
  }
  if (unitarity_error(u) > 1e-10)
    throw std::runtime_error("extract_gate_unitary: propagator not unitary");
  return u;
}

// The target conditional-phase gate: identity on the b = down block, an
// x-axis phase rotor on the b = up block. |beta| = pi/2 is a controlled-NOT
// up to one-spin rotations.
inline cmat ideal_gate(double beta) {
  cmat u = cmat::Identity(4, 4);
  u(0, 0) = std::cos(beta);
  u(1, 1) = std::cos(beta);
  u(0, 1) = complexd(0.0, std::sin(beta));
  u(1, 0) = complexd(0.0, std::sin(beta));
  return u;
}

// |Tr(U^dag V)| / dim: 1 iff the gates agree up to a global phase.
inline double gate_fidelity(const cmat& u, const cmat& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols() || u.rows() != u.cols())
    throw std::invalid_argument("gate_fidelity: dimension mismatch");
  if (unitarity_error(u) > 1e-8 || unitarity_error(v) > 1e-8)
    throw std::invalid_argument("gate_fidelity: inputs must be unitary");
  return std::abs((u.adjoint() * v).trace()) / static_cast<double>(u.rows());
}

inline void write_phase_csv_header(std::ostream& out) {
  out << "theta,omega,total,dynamic,geometric,pancharatnam,solid_angle_half\n";
}

inline void write_phase_csv_row(std::ostream& out, double theta,
                                const PhaseReport& report,
                                double pancharatnam) {
  out << format_double(theta) << "," << format_double(4.0 * theta) << ","
      << format_double(report.total) << "," << format_double(report.dynamic)
      << "," << format_double(report.geometric) << ","
      << format_double(pancharatnam) << ","
      << format_double(0.5 * report.solid_angle) << "\n";
}

}  // namespace aagate
