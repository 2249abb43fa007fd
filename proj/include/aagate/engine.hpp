#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "aagate/pulse_program.hpp"

namespace aagate {

// A two-spin state: either a pure state vector (dimension 4) or a density
// matrix (4x4). Pure states keep their global phase; nothing in the engine
// ever renormalizes silently.
class QuantumState {
 public:
  QuantumState() = default;

  static QuantumState pure(cvec amplitudes) {
    if (amplitudes.size() != 4)
      throw std::invalid_argument("QuantumState: pure state must have dim 4");
    QuantumState s;
    s.pure_ = true;
    s.vec_ = std::move(amplitudes);
    return s;
  }

  static QuantumState density(cmat rho) {
    if (rho.rows() != 4 || rho.cols() != 4)
      throw std::invalid_argument("QuantumState: density matrix must be 4x4");
    QuantumState s;
    s.pure_ = false;
    s.rho_ = std::move(rho);
    return s;
  }

  bool is_pure() const { return pure_; }
  int dim() const { return 4; }

  const cvec& amplitudes() const {
    if (!pure_) throw std::logic_error("QuantumState: not a pure state");
    return vec_;
  }

  const cmat& density_matrix() const {
    if (pure_) throw std::logic_error("QuantumState: not a density matrix");
    return rho_;
  }

  cmat as_density() const { return pure_ ? cmat(vec_ * vec_.adjoint()) : rho_; }

  QuantumState promoted() const {
    return pure_ ? density(as_density()) : *this;
  }

  // Contract checks: unit norm for pure states (1e-12); unit trace (1e-10),
  // Hermiticity and eigenvalues >= -1e-10 for density matrices.
  void check() const {
    if (pure_) {
      if (std::abs(vec_.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("QuantumState: state vector not normalized");
    } else {
      if (std::abs(rho_.trace().real() - 1.0) > 1e-10 ||
          std::abs(rho_.trace().imag()) > 1e-10)
        throw std::invalid_argument("QuantumState: density trace != 1");
      if (hermiticity_error(rho_) > 1e-10)
        throw std::invalid_argument("QuantumState: density not Hermitian");
      Eigen::SelfAdjointEigenSolver<cmat> es(rho_);
      if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("QuantumState: density not positive");
    }
  }

 private:
  bool pure_ = true;
  cvec vec_ = cvec::Zero(4);
  cmat rho_;
};

inline QuantumState apply_unitary(const QuantumState& s, const cmat& u) {
  if (s.is_pure()) return QuantumState::pure(u * s.amplitudes());
  return QuantumState::density(u * s.density_matrix() * u.adjoint());
}

struct SimOptions {
  bool instantaneous_pulses = false;  // collapse pulses to zero-duration kicks
  bool relaxation = false;            // interleave phase damping
  bool allow_promotion = true;        // pure -> density when relaxation is on
  double dt_record = 0.0;             // sampling step; <= 0 picks a default
  double dt_integrate = 1e-7;         // integration step inside finite pulses
};

struct TrajectorySample {
  double t = 0.0;
  QuantumState state;      // after every event at time t
  cmat hamiltonian;        // generator active on [t, next sample)
  cmat pulse_rotation;     // cumulative product of ideal pulse rotations
  int segment = -1;        // timeline segment the interval ahead belongs to
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double dt_record = 0.0;
  bool instantaneous = true;  // all pulses applied as kicks
  bool pure_run = true;
};

struct SimResult {
  QuantumState final_state;
  Trajectory trajectory;
};

// Exact phase-damping step: independent single-spin dephasing on both spins.
// Off-diagonal elements that flip spin a pick up exp(-dt/T2_a), those that
// flip spin b pick up exp(-dt/T2_b), elements flipping both pick up the
// product, populations are untouched.
inline cmat phase_damping_step(const cmat& rho, double dt,
                               const SpinSystem& sys) {
  if (rho.rows() != 4 || rho.cols() != 4)
    throw std::invalid_argument("phase_damping_step: matrix must be 4x4");
  if (dt < 0.0)
    throw std::invalid_argument("phase_damping_step: negative time step");
  const double fa = std::exp(-dt / sys.t2_a);
  const double fb = std::exp(-dt / sys.t2_b);
  cmat out = rho;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if ((i & 1) != (j & 1)) out(i, j) *= fa;  // spin-a index differs
      if ((i >> 1) != (j >> 1)) out(i, j) *= fb;  // spin-b index differs
    }
  }
  return out;
}

// rho = (1 - eps) * I/4 + eps |uu><uu|. The identity part is invariant under
// everything the engine does, so any extracted phase is eps-independent.
inline cmat pseudo_pure_state(double eps) {
  if (eps < 0.0 || eps > 1.0)
    throw std::invalid_argument("pseudo_pure_state: eps must be in [0, 1]");
  cmat rho = (1.0 - eps) / 4.0 * cmat::Identity(4, 4);
  rho(0, 0) += eps;
  return rho;
}

// 90-degree rotation about +y on one channel: takes |up> to (|up>+|down>)/sqrt(2).
inline QuantumState prepare_plus(const QuantumState& s, Site channel) {
  const cmat u =
      expm_hermitian(embed(angular_momentum(Axis::y), channel), 0.5 * pi);
  return apply_unitary(s, u);
}

namespace detail {

class Recorder {
 public:
  Recorder(Trajectory& traj, const cmat& h_free) : traj_(traj), h_free_(h_free) {}

  // One sample per time point; the latest push at a given time wins. Each
  // sample holds the state after every event at t and the Hamiltonian and
  // segment id governing [t, next sample), so zero-duration kicks at a
  // boundary are folded into the sample the following segment claims.
  void push(double t, const QuantumState& state, const cmat& rotation,
            const cmat& h, int segment) {
    if (!traj_.samples.empty() && same_time(traj_.samples.back().t, t)) {
      traj_.samples.back() = {t, state, h, rotation, segment};
      return;
    }
    traj_.samples.push_back({t, state, h, rotation, segment});
  }

  void push_final(double t, const QuantumState& state, const cmat& rotation) {
    push(t, state, rotation, h_free_, -1);
  }

 private:
  static bool same_time(double a, double b) {
    return std::abs(a - b) <= 1e-15 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  }

  Trajectory& traj_;
  cmat h_free_;
};

inline double default_dt_record(const EventTimeline& tl) {
  double longest_delay = 0.0;
  for (const auto& seg : tl.segments)
    if (!seg.is_pulse()) longest_delay = std::max(longest_delay, seg.duration);
  if (longest_delay > 0.0) return longest_delay / 200.0;
  if (tl.total_duration > 0.0) return tl.total_duration / 200.0;
  return 1.0;
}

}  // namespace detail

// Propagate an initial state through a resolved timeline in the given
// rotating frame. Delays evolve under the free rotating-frame Hamiltonian,
// finite pulses under the pulse Hamiltonian in steps of dt_integrate, and
// instantaneous pulses act as exp(-i flip (n . I)) at a point in time. With
// relaxation on, a phase-damping step runs after every propagation step.
inline SimResult simulate(const EventTimeline& timeline, const SpinSystem& sys,
                          const FrameSpec& frame, const QuantumState& init,
                          const SimOptions& opts = {}) {
  init.check();
  QuantumState state = init;
  if (opts.relaxation && state.is_pure()) {
    if (!opts.allow_promotion)
      throw std::invalid_argument(
          "simulate: relaxation on a pure state requires promotion");
    state = state.promoted();
  }

  const EventTimeline tl =
      opts.instantaneous_pulses ? collapse_pulses(timeline) : timeline;
  const cmat h_free = rotating_frame_hamiltonian(sys, frame);

  SimResult result;
  Trajectory& traj = result.trajectory;
  traj.dt_record = opts.dt_record > 0.0 ? opts.dt_record
                                        : detail::default_dt_record(tl);
  traj.pure_run = state.is_pure();
  traj.instantaneous = true;
  for (const auto& seg : tl.segments)
    if (seg.is_pulse() && !seg.pulse->instantaneous()) traj.instantaneous = false;

  detail::Recorder rec(traj, h_free);
  cmat rotation = cmat::Identity(4, 4);

  auto timed_evolution = [&](double t0, double duration, const cmat& h,
                             double step_hint, int segment) {
    const int n = std::max(1, static_cast<int>(std::llround(duration / step_hint)));
    const double dt = duration / n;
    rec.push(t0, state, rotation, h, segment);
    if (duration == 0.0) return;
    const cmat u_step = expm_hermitian(h, dt);
    for (int k = 1; k <= n; ++k) {
      state = apply_unitary(state, u_step);
      if (opts.relaxation)
        state = QuantumState::density(
            phase_damping_step(state.density_matrix(), dt, sys));
      rec.push(t0 + k * dt, state, rotation, h, segment);
    }
  };

  for (size_t i = 0; i < tl.segments.size(); ++i) {
    const auto& seg = tl.segments[i];
    if (seg.is_pulse()) {
      const PulseSpec& p = *seg.pulse;
      if (p.instantaneous()) {
        const cmat kick = expm_hermitian(pulse_kick_generator(p), p.flip_rad);
        state = apply_unitary(state, kick);
        rotation = kick * rotation;
        // Neutral segment id: the following timed segment claims this sample.
        rec.push(seg.start, state, rotation, h_free, -1);
      } else {
        timed_evolution(seg.start, p.duration_s, pulse_hamiltonian(p, sys, frame),
                        opts.dt_integrate, static_cast<int>(i));
        // Bookkeep the idealized rotation so the cumulative product stays
        // meaningful for diagnostics; toggling analysis rejects finite runs.
        rotation = expm_hermitian(pulse_kick_generator(p), p.flip_rad) * rotation;
        rec.push_final(seg.start + p.duration_s, state, rotation);
      }
    } else {
      timed_evolution(seg.start, seg.duration, h_free, traj.dt_record,
                      static_cast<int>(i));
    }
  }

  rec.push_final(tl.total_duration, state, rotation);
  result.final_state = state;
  return result;
}

namespace detail {

// Conditional single-spin state/density of one control branch. Rows 0,1 of
// the control-major basis form the b = up block, rows 2,3 the b = down block.
inline int branch_offset(SpinState b) { return b == SpinState::up ? 0 : 2; }

inline cvec conditional_amplitudes(const cvec& psi, SpinState b) {
  const int off = branch_offset(b);
  cvec out(2);
  out << psi(off), psi(off + 1);
  return out;
}

inline cmat conditional_block(const cmat& m, SpinState b) {
  const int off = branch_offset(b);
  return m.block(off, off, 2, 2);
}

}  // namespace detail

// CSV export. Pure runs: time, re/im of the four amplitudes; density runs:
// time, re/im of all 16 entries. Both end with the conditional Bloch vectors
// of the two control branches (zeros when a branch is unpopulated).
inline void export_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  if (traj.pure_run) {
    for (int k = 0; k < 4; ++k) out << ",re_c" << k << ",im_c" << k;
  } else {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out << ",re_r" << i << j << ",im_r" << i << j;
  }
  out << ",bloch_up_x,bloch_up_y,bloch_up_z"
      << ",bloch_down_x,bloch_down_y,bloch_down_z\n";

  for (const auto& s : traj.samples) {
    out << format_double(s.t);
    if (s.state.is_pure()) {
      const cvec& v = s.state.amplitudes();
      for (int k = 0; k < 4; ++k)
        out << "," << format_double(v(k).real()) << ","
            << format_double(v(k).imag());
    } else {
      const cmat& r = s.state.density_matrix();
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          out << "," << format_double(r(i, j).real()) << ","
              << format_double(r(i, j).imag());
    }
    const cmat rho = s.state.as_density();
    for (SpinState b : {SpinState::up, SpinState::down}) {
      const cmat block = detail::conditional_block(rho, b);
      const double pop = block.trace().real();
      std::array<double, 3> v{0.0, 0.0, 0.0};
      if (pop > 1e-12) v = bloch_vector(cmat(block / pop));
      out << "," << format_double(v[0]) << "," << format_double(v[1]) << ","
          << format_double(v[2]);
    }
    out << "\n";
  }
}

}  // namespace aagate
