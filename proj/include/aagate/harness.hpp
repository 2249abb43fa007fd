#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "aagate/phase.hpp"
#include "aagate/pulse_program.hpp"
#include "aagate/readout.hpp"

namespace aagate {

// The conditional-phase sequence used throughout: three hard x-pulses on
// the target channel separated by half-coupling-period delays. Identical to
// seq/fig2.seq; a test keeps the two from drifting apart.
inline std::string canonical_gate_program() {
  return
      "# Conditional-phase sequence: three hard x-pulses on the target channel\n"
      "# separated by half-coupling-period delays. The flip angles sum to zero,\n"
      "# so the target returns to its start while the up branch acquires 2*theta.\n"
      "param theta = pi/4\n"
      "\n"
      "pulse a x -theta dur 5e-6\n"
      "delay 1/(2*J)\n"
      "pulse a x 2*theta - pi dur 5e-6\n"
      "delay 1/(2*J)\n"
      "pulse a x pi - theta dur 5e-6\n";
}

// Optional system configuration read from a program's params. Params named
// sys_omega_a, sys_omega_b (rad/s), sys_j (Hz), sys_t2_a, sys_t2_b (s)
// override the matching defaults; their expressions may use pi and earlier
// sys_ params, but not J (the coupling is what they define). Other params
// are left for resolve().
inline SpinSystem spin_system_from_program(
    const PulseProgram& prog, const SpinSystem& defaults = SpinSystem::chloroform()) {
  SpinSystem sys = defaults;
  Bindings bindings = Bindings::with_builtins(std::nullopt);
  for (const auto& p : prog.params) {
    if (p.name.rfind("sys_", 0) != 0) continue;
    const double v = eval_expr(p.value, bindings);
    if (p.name == "sys_omega_a") sys.omega_a = v;
    else if (p.name == "sys_omega_b") sys.omega_b = v;
    else if (p.name == "sys_j") sys.j_coupling = v;
    else if (p.name == "sys_t2_a") sys.t2_a = v;
    else if (p.name == "sys_t2_b") sys.t2_b = v;
    else
      throw ResolveError("unknown system parameter '" + p.name + "' at line " +
                         std::to_string(p.line));
    bindings.values[p.name] = v;
  }
  sys.validate();
  return sys;
}

struct GateCheckReport {
  double theta = 0.0;
  bool finite_pulses = false;
  cmat unitary;             // full 4x4 propagator in the canonical frame
  double fidelity = 0.0;    // against the ideal gate with beta = 2 theta
  double down_block_error = 0.0;  // max deviation of the down block from 1
  double beta_effective = 0.0;    // phase angle read off the up block
};

inline GateCheckReport run_gate_check(const SpinSystem& sys, double theta,
                                      bool finite_pulses,
                                      double dt_integrate = 1e-7) {
  const PulseProgram prog = parse(canonical_gate_program());
  const EventTimeline tl = resolve(prog, {{"theta", theta}}, sys);
  SimOptions opts;
  opts.instantaneous_pulses = !finite_pulses;
  opts.dt_integrate = dt_integrate;
  const FrameSpec frame = FrameSpec::canonical(sys);

  GateCheckReport report;
  report.theta = theta;
  report.finite_pulses = finite_pulses;
  report.unitary = extract_gate_unitary(tl, sys, frame, opts);
  report.fidelity = gate_fidelity(report.unitary, ideal_gate(2.0 * theta));
  report.down_block_error =
      max_abs(cmat(report.unitary.block(2, 2, 2, 2) - cmat::Identity(2, 2)));
  report.beta_effective = std::atan2(report.unitary(0, 1).imag(),
                                     report.unitary(0, 0).real());
  return report;
}

inline void write_gate_csv(const cmat& u, std::ostream& out) {
  out << "row,col,re,im\n";
  for (int r = 0; r < u.rows(); ++r)
    for (int c = 0; c < u.cols(); ++c)
      out << r << "," << c << "," << format_double(u(r, c).real()) << ","
          << format_double(u(r, c).imag()) << "\n";
}

struct SweepOptions {
  double epsilon = 1.0;     // pseudo-pure purity for the readout pipeline
  bool relaxation = false;  // phase damping in the readout pipeline runs
  double fid_duration = 1.0;
  double fid_dt = 1e-4;
  int zero_fill = 4;
  int phase_samples = 4000;  // trajectory samples for the phase analysis
};

struct SweepRow {
  int n = 0;
  double theta = 0.0;
  double omega = 0.0;  // loop opening angle, 4 theta
  double beta_gate = 0.0;      // geometric phase from the toggling analysis
  double beta_readout = 0.0;   // conditional phase from the doublet shift
  double solid_angle = 0.0;
  double pancharatnam = 0.0;
  double beta_gate_unwrapped = 0.0;
  double beta_readout_unwrapped = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double slope_gate = 0.0;     // unwrapped beta_gate vs omega, through origin
  double slope_readout = 0.0;  // unwrapped beta_readout vs omega
  double max_gate_dev = 0.0;     // worst |beta_gate - 2 theta| (wrapped)
  double max_readout_dev = 0.0;  // worst |beta_readout - 2 theta| (wrapped)
};

namespace detail {

inline QuantumState readout_init(double epsilon) {
  QuantumState s = QuantumState::density(pseudo_pure_state(epsilon));
  s = prepare_plus(s, Site::b);
  return prepare_plus(s, Site::a);
}

inline double line_magnitude(const Spectrum& spec, double target_hz) {
  return std::abs(spec.amp[nearest_bin(spec, target_hz)]);
}

}  // namespace detail

// Sweep the tip angle over theta = n pi / 16 and measure the conditional
// phase three independent ways: the toggling-frame decomposition, the
// overlap-product phase, and the spectral doublet shift. The unwrapped
// columns follow beta = 2 theta = omega / 2 across the whole range.
inline SweepResult run_fig3_sweep(const SpinSystem& sys,
                                  const SweepOptions& opts = {}) {
  const PulseProgram prog = parse(canonical_gate_program());
  const FrameSpec frame = FrameSpec::canonical(sys);

  AcquisitionOptions acq;
  acq.duration = opts.fid_duration;
  acq.dt = opts.fid_dt;
  acq.relaxation = opts.relaxation;

  // The reference acquisition skips the gate entirely, so it is the same
  // for every theta.
  const QuantumState init = detail::readout_init(opts.epsilon);
  const Spectrum reference =
      spectrum(synthesize_fid(init, sys, frame, acq), opts.zero_fill);

  SweepResult result;
  for (int n = 0; n <= 16; ++n) {
    const double theta = static_cast<double>(n) * pi / 16.0;
    const EventTimeline tl =
        collapse_pulses(resolve(prog, {{"theta", theta}}, sys));

    SweepRow row;
    row.n = n;
    row.theta = theta;
    row.omega = 4.0 * theta;

    // Phase analysis on a pure up-branch run.
    {
      cvec e0 = cvec::Zero(4);
      e0(0) = 1.0;
      QuantumState psi = prepare_plus(QuantumState::pure(e0), Site::a);
      SimOptions sim;
      sim.instantaneous_pulses = true;
      sim.dt_record =
          tl.total_duration / static_cast<double>(opts.phase_samples);
      const SimResult res = simulate(tl, sys, frame, psi, sim);
      const PhaseReport report =
          phase_decomposition(res.trajectory, SpinState::up);
      row.beta_gate = report.geometric;
      row.solid_angle = report.solid_angle;
      row.pancharatnam =
          pancharatnam_phase(toggling_trajectory(res.trajectory, SpinState::up));
    }

    // Spectral readout on the pseudo-pure pipeline.
    {
      SimOptions sim;
      sim.instantaneous_pulses = true;
      sim.relaxation = opts.relaxation;
      sim.dt_record = tl.total_duration;  // endpoints only
      const SimResult res = simulate(tl, sys, frame, init, sim);
      const Spectrum final_spec = spectrum(
          synthesize_fid(res.final_state, sys, frame, acq), opts.zero_fill);
      row.beta_readout = extract_beta(final_spec, reference, sys).beta;
    }

    result.rows.push_back(row);
  }

  // Unwrap by accumulating wrapped step-to-step increments, then fit a line
  // through the origin against omega.
  double sum_go = 0.0, sum_ro = 0.0, sum_oo = 0.0;
  for (size_t k = 0; k < result.rows.size(); ++k) {
    SweepRow& row = result.rows[k];
    if (k == 0) {
      row.beta_gate_unwrapped = row.beta_gate;
      row.beta_readout_unwrapped = row.beta_readout;
    } else {
      const SweepRow& prev = result.rows[k - 1];
      row.beta_gate_unwrapped =
          prev.beta_gate_unwrapped + wrap_pi(row.beta_gate - prev.beta_gate);
      row.beta_readout_unwrapped =
          prev.beta_readout_unwrapped +
          wrap_pi(row.beta_readout - prev.beta_readout);
    }
    sum_go += row.omega * row.beta_gate_unwrapped;
    sum_ro += row.omega * row.beta_readout_unwrapped;
    sum_oo += row.omega * row.omega;
    const double target = 2.0 * row.theta;
    result.max_gate_dev = std::max(
        result.max_gate_dev, std::abs(wrap_pi(row.beta_gate - target)));
    result.max_readout_dev = std::max(
        result.max_readout_dev, std::abs(wrap_pi(row.beta_readout - target)));
  }
  result.slope_gate = sum_go / sum_oo;
  result.slope_readout = sum_ro / sum_oo;
  return result;
}

inline void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "n,theta,omega,beta_gate,beta_readout,solid_angle,pancharatnam,"
         "beta_gate_unwrapped,beta_readout_unwrapped\n";
  for (const auto& r : result.rows) {
    out << r.n << "," << format_double(r.theta) << ","
        << format_double(r.omega) << "," << format_double(r.beta_gate) << ","
        << format_double(r.beta_readout) << ","
        << format_double(r.solid_angle) << ","
        << format_double(r.pancharatnam) << ","
        << format_double(r.beta_gate_unwrapped) << ","
        << format_double(r.beta_readout_unwrapped) << "\n";
  }
}

struct RetentionRow {
  std::string label;
  double duration = 0.0;     // s spent dephasing
  double t2 = 0.0;           // s, channel time constant
  double closed_form = 0.0;  // exp(-duration / t2)
  // Signal ratio between a phase-damped run and a clean one; NaN for
  // analytic rows with no matching simulation.
  double simulated = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Engine-measured decay of a single-spin coherence left alone for the given
// window: prepare the channel along +x, idle with phase damping on, and
// compare the coherence magnitude to its starting value. Matches
// exp(-duration / T2) to roundoff.
inline RetentionRow bare_coherence_retention(const SpinSystem& sys,
                                             Site channel, double duration,
                                             const std::string& label) {
  const EventTimeline tl =
      resolve(parse("param t = 1\ndelay t\n"), {{"t", duration}}, sys);
  cvec e0 = cvec::Zero(4);
  e0(0) = 1.0;
  const QuantumState init =
      prepare_plus(QuantumState::pure(e0), channel).promoted();

  SimOptions sim;
  sim.relaxation = true;
  sim.allow_promotion = false;
  sim.dt_record = duration / 64.0;
  const SimResult res =
      simulate(tl, sys, FrameSpec::canonical(sys), init, sim);

  const int coh_row = channel == Site::a ? 0 : 2;
  const int coh_col = channel == Site::a ? 1 : 0;
  const double start = std::abs(init.density_matrix()(coh_row, coh_col));
  const double end =
      std::abs(res.final_state.density_matrix()(coh_row, coh_col));

  RetentionRow row;
  row.label = label;
  row.duration = duration;
  row.t2 = channel == Site::a ? sys.t2_a : sys.t2_b;
  row.closed_form = std::exp(-duration / row.t2);
  row.simulated = end / start;
  return row;
}

// Amplitude retention of the control doublet across the gate sequence:
// run the theta = pi/4 gate with and without phase damping (acquisition
// clean in both) and compare line magnitudes. The kicks shuttle the
// readout coherence through two-spin entries for half the sequence, so the
// delays cost exp(-2 tau / T2_b) * exp(-tau / T2_a); finite pulse windows
// add a small further loss the closed form leaves out.
inline RetentionRow gate_retention(const SpinSystem& sys, bool finite_pulses) {
  const PulseProgram prog = parse(canonical_gate_program());
  EventTimeline tl = resolve(prog, {}, sys);
  if (!finite_pulses) tl = collapse_pulses(tl);
  const FrameSpec frame = FrameSpec::canonical(sys);
  const QuantumState init = readout_init(1.0);

  const auto run = [&](bool relaxation) {
    SimOptions sim;
    sim.instantaneous_pulses = !finite_pulses;
    sim.relaxation = relaxation;
    sim.dt_record = tl.total_duration / 256.0;  // damping grid for delays
    AcquisitionOptions acq;
    const SimResult res = simulate(tl, sys, frame, init, sim);
    return spectrum(synthesize_fid(res.final_state, sys, frame, acq), 4);
  };
  const Spectrum damped = run(true);
  const Spectrum clean = run(false);

  double ratio = 0.0;
  for (double f : {-0.5 * sys.j_coupling, 0.5 * sys.j_coupling})
    ratio += 0.5 * line_magnitude(damped, f) / line_magnitude(clean, f);

  const double tau = 0.5 / sys.j_coupling;
  RetentionRow row;
  row.label = finite_pulses ? "gate sequence, 5 us pulses"
                            : "gate sequence, instantaneous pulses";
  row.duration = tl.total_duration;
  row.t2 = sys.t2_b;
  row.closed_form = std::exp(-2.0 * tau / sys.t2_b - tau / sys.t2_a);
  row.simulated = ratio;
  return row;
}

}  // namespace detail

// Dephasing comparison table: bare single-spin coherence retention over the
// nonadiabatic gate window (and its half) against the much longer window an
// adiabatic implementation needs, on both channels, each next to the
// engine-measured decay; then the end-to-end doublet retention through the
// actual gate sequence.
inline std::vector<RetentionRow> run_decoherence_compare(
    const SpinSystem& sys) {
  std::vector<RetentionRow> rows;
  const struct {
    double duration;
    const char* text;
  } windows[] = {{2.4e-3, "2.4 ms"}, {4.8e-3, "4.8 ms"}, {0.12, "120 ms"}};
  for (const auto& w : windows) {
    for (Site ch : {Site::a, Site::b}) {
      const std::string name = ch == Site::a ? sys.channel_a : sys.channel_b;
      rows.push_back(detail::bare_coherence_retention(
          sys, ch, w.duration,
          "bare " + name + " coherence, " + w.text + " window"));
    }
  }
  rows.push_back(detail::gate_retention(sys, false));
  rows.push_back(detail::gate_retention(sys, true));
  return rows;
}

inline void write_retention_csv(const std::vector<RetentionRow>& rows,
                                std::ostream& out) {
  out << "label,duration_s,t2_s,closed_form,simulated\n";
  for (const auto& r : rows) {
    out << r.label << "," << format_double(r.duration) << ","
        << format_double(r.t2) << "," << format_double(r.closed_form) << ",";
    if (std::isnan(r.simulated))
      out << "\n";
    else
      out << format_double(r.simulated) << "\n";
  }
}

}  // namespace aagate
