#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "aagate/linalg.hpp"

namespace aagate {

enum class SpinState { up, down };

inline double magnetic_quantum_number(SpinState s) {
  return s == SpinState::up ? 0.5 : -0.5;
}

// A heteronuclear two-spin system: Larmor frequencies, scalar coupling and
// the transverse relaxation times of both spins. All frequencies are angular
// (rad/s) except the coupling constant j_coupling, which is in Hz as usual.
struct SpinSystem {
  double omega_a = 0.0;   // rad/s, target spin
  double omega_b = 0.0;   // rad/s, control spin
  double j_coupling = 0.0;  // Hz
  double t2_a = 0.0;      // s
  double t2_b = 0.0;      // s
  std::string channel_a = "a";
  std::string channel_b = "b";

  // 500 MHz proton (target) / 125 MHz carbon (control), J = 214.9 Hz,
  // T2 = 0.4 s / 0.3 s: the standard chloroform sample.
  static SpinSystem chloroform() {
    SpinSystem s;
    s.omega_a = 2.0 * pi * 500.0e6;
    s.omega_b = 2.0 * pi * 125.0e6;
    s.j_coupling = 214.9;
    s.t2_a = 0.4;
    s.t2_b = 0.3;
    return s;
  }

  double t2(Site site) const { return site == Site::a ? t2_a : t2_b; }

  std::optional<Site> site_for_channel(const std::string& name) const {
    if (name == channel_a) return Site::a;
    if (name == channel_b) return Site::b;
    return std::nullopt;
  }

  void validate() const {
    if (!(j_coupling > 0.0))
      throw std::invalid_argument("SpinSystem: coupling must be positive");
    if (!(t2_a > 0.0) || !(t2_b > 0.0))
      throw std::invalid_argument("SpinSystem: T2 times must be positive");
    if (channel_a == channel_b)
      throw std::invalid_argument("SpinSystem: channel names must differ");
  }
};

// The doubly rotating frame is specified by where each channel's carrier
// sits relative to its spin's resonance. We store the residual precession
// frequency the carrier placement leaves on each spin, not the absolute
// carrier: the residuals are kilohertz-scale while the carriers are
// gigahertz-scale, and keeping them separate preserves the full double
// precision of the physics that actually evolves the state.
struct FrameSpec {
  double residual_a = 0.0;  // rad/s left on spin a after the frame transform
  double residual_b = 0.0;  // rad/s left on spin b

  // Carrier on the target channel shifted down by pi J from resonance,
  // control channel on resonance. In this frame the free Hamiltonian is
  //   pi J Iz_a + 2 pi J Iz_a Iz_b,
  // which vanishes on the b = down block: evolution happens only when the
  // control spin is up.
  static FrameSpec canonical(const SpinSystem& sys) {
    return {pi * sys.j_coupling, 0.0};
  }

  // Both carriers exactly on resonance: the free Hamiltonian reduces to the
  // pure coupling term 2 pi J Iz_a Iz_b.
  static FrameSpec on_resonance(const SpinSystem&) { return {0.0, 0.0}; }
};

// One radio-frequency pulse: transverse field on a single channel with phase
// phase_rad (x -> 0, y -> pi/2, -x -> pi, -y -> 3pi/2), total flip angle
// flip_rad, and duration_s. duration_s == 0 means an idealized instantaneous
// rotation. Flip angles are signed and never reduced modulo anything.
struct PulseSpec {
  Site channel = Site::a;
  double phase_rad = 0.0;
  double flip_rad = 0.0;
  double duration_s = 0.0;

  bool instantaneous() const { return duration_s == 0.0; }

  // Field amplitude during a finite pulse (rad/s, signed).
  double omega1() const {
    if (instantaneous())
      throw std::logic_error("PulseSpec::omega1: pulse is instantaneous");
    return flip_rad / duration_s;
  }
};

// H = omega_a Iz_a + omega_b Iz_b + 2 pi J Iz_a Iz_b  (lab frame, diagonal).
inline cmat lab_hamiltonian(const SpinSystem& sys) {
  const cmat iz_a = embed(angular_momentum(Axis::z), Site::a);
  const cmat iz_b = embed(angular_momentum(Axis::z), Site::b);
  return sys.omega_a * iz_a + sys.omega_b * iz_b +
         2.0 * pi * sys.j_coupling * (iz_a * iz_b);
}

// Lab Hamiltonian minus the frame generators. Everything is diagonal, so the
// transformation leaves the residual Zeeman terms plus the untouched
// coupling, with no time-dependent remainder.
inline cmat rotating_frame_hamiltonian(const SpinSystem& sys,
                                       const FrameSpec& frame) {
  const cmat iz_a = embed(angular_momentum(Axis::z), Site::a);
  const cmat iz_b = embed(angular_momentum(Axis::z), Site::b);
  return frame.residual_a * iz_a + frame.residual_b * iz_b +
         2.0 * pi * sys.j_coupling * (iz_a * iz_b);
}

// The 2x2 Hamiltonian felt by spin a when spin b sits in a definite
// eigenstate. In the canonical frame this is 2 pi J Iz for b up and exactly
// zero for b down.
inline cmat conditional_hamiltonian(const SpinSystem& sys,
                                    const FrameSpec& frame, SpinState b_state) {
  const double mb = magnetic_quantum_number(b_state);
  return (frame.residual_a + 2.0 * pi * sys.j_coupling * mb) *
         angular_momentum(Axis::z);
}

// Free rotating-frame Hamiltonian plus the transverse drive of one pulse,
// treated as on-resonance for its channel. Any carrier offset term stays in
// the free part and keeps acting during the pulse.
inline cmat pulse_hamiltonian(const PulseSpec& pulse, const SpinSystem& sys,
                              const FrameSpec& frame) {
  if (pulse.instantaneous())
    throw std::invalid_argument(
        "pulse_hamiltonian: instantaneous pulse has no Hamiltonian");
  const cmat drive = std::cos(pulse.phase_rad) * angular_momentum(Axis::x) +
                     std::sin(pulse.phase_rad) * angular_momentum(Axis::y);
  return rotating_frame_hamiltonian(sys, frame) +
         pulse.omega1() * embed(drive, pulse.channel);
}

// Generator direction of an instantaneous pulse: (cos phi) Ix + (sin phi) Iy
// on the pulse channel, embedded in the two-spin space. The applied rotation
// is exp(-i flip * this).
inline cmat pulse_kick_generator(const PulseSpec& pulse) {
  const cmat drive = std::cos(pulse.phase_rad) * angular_momentum(Axis::x) +
                     std::sin(pulse.phase_rad) * angular_momentum(Axis::y);
  return embed(drive, pulse.channel);
}

}  // namespace aagate
