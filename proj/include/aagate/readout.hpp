#pragma once

#include <algorithm>
#include <ostream>
#include <random>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "aagate/engine.hpp"

namespace aagate {

// Complex time-domain signal sampled at a fixed rate, first point at t = 0.
struct Fid {
  double dt = 0.0;
  std::vector<complexd> samples;

  double duration() const { return dt * static_cast<double>(samples.size()); }
};

struct AcquisitionOptions {
  double duration = 1.0;  // s
  double dt = 1e-4;       // s, sampling interval
  bool relaxation = false;
  // Additive complex Gaussian noise per sample; 0 disables the generator.
  double noise_stddev = 0.0;
  unsigned long long noise_seed = 1;
};

// Free-evolution signal of the control spin: s(t) = <I+_b> = rho(2,0) +
// rho(3,1) in the control-major basis. With the acquisition frame holding
// the control channel on resonance, the two terms rotate at +-J/2 Hz (the
// sign set by the target spin's state) and come out as the familiar doublet.
inline Fid synthesize_fid(const QuantumState& state, const SpinSystem& sys,
                          const FrameSpec& frame,
                          const AcquisitionOptions& opts) {
  if (opts.dt <= 0.0 || opts.duration <= 0.0)
    throw std::invalid_argument("synthesize_fid: duration and dt must be > 0");
  const long long n = std::llround(opts.duration / opts.dt);
  if (n < 1024)
    throw std::invalid_argument(
        "synthesize_fid: acquisition too short, need at least 1024 samples");

  cmat rho = state.as_density();
  const cmat u = expm_hermitian(rotating_frame_hamiltonian(sys, frame), opts.dt);

  Fid fid;
  fid.dt = opts.dt;
  fid.samples.reserve(static_cast<size_t>(n));
  for (long long k = 0; k < n; ++k) {
    fid.samples.push_back(rho(2, 0) + rho(3, 1));
    rho = u * rho * u.adjoint();
    if (opts.relaxation) rho = phase_damping_step(rho, opts.dt, sys);
  }

  if (opts.noise_stddev > 0.0) {
    std::mt19937_64 rng(opts.noise_seed);
    std::normal_distribution<double> gauss(0.0, opts.noise_stddev);
    for (auto& s : fid.samples) s += complexd(gauss(rng), gauss(rng));
  }
  return fid;
}

// Discrete spectrum, bins in ascending frequency order. Zero filling pads
// the signal before the transform, shrinking the bin width by the same
// factor without adding information.
struct Spectrum {
  std::vector<double> freq_hz;
  std::vector<complexd> amp;
  int zero_fill = 1;
  size_t source_samples = 0;  // unpadded length, needed for phase ramps
  double dt = 0.0;

  double bin_width() const {
    return 1.0 / (dt * static_cast<double>(freq_hz.size()));
  }
};

inline Spectrum spectrum(const Fid& fid, int zero_fill = 4) {
  if (fid.samples.empty())
    throw std::invalid_argument("spectrum: empty signal");
  if (fid.dt <= 0.0) throw std::invalid_argument("spectrum: dt must be > 0");
  if (zero_fill < 1)
    throw std::invalid_argument("spectrum: zero_fill must be >= 1");

  const size_t n = fid.samples.size() * static_cast<size_t>(zero_fill);
  std::vector<complexd> padded(fid.samples);
  padded.resize(n, complexd(0.0, 0.0));
  std::vector<complexd> raw(n);
  Eigen::FFT<double> fft;
  fft.fwd(raw, padded);

  Spectrum spec;
  spec.zero_fill = zero_fill;
  spec.source_samples = fid.samples.size();
  spec.dt = fid.dt;
  spec.freq_hz.resize(n);
  spec.amp.resize(n);
  // Reorder so negative frequencies come first (-n/2 .. n/2 - 1 bins).
  const double binw = 1.0 / (fid.dt * static_cast<double>(n));
  const size_t offset = n / 2;
  for (size_t k = 0; k < n; ++k) {
    const long long fidx = k <= (n - 1) / 2
                               ? static_cast<long long>(k)
                               : static_cast<long long>(k) -
                                     static_cast<long long>(n);
    const size_t j = static_cast<size_t>(fidx + static_cast<long long>(offset));
    spec.freq_hz[j] = static_cast<double>(fidx) * binw;
    spec.amp[j] = raw[k];
  }
  return spec;
}

struct PeakNotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DoubletPhases {
  double left = 0.0;   // line at -J/2 Hz (target spin down)
  double right = 0.0;  // line at +J/2 Hz (target spin up)
};

namespace detail {

inline size_t nearest_bin(const Spectrum& spec, double target_hz) {
  const double binw = spec.bin_width();
  const double x = (target_hz - spec.freq_hz.front()) / binw;
  const auto clamp = [&](long long i) {
    return static_cast<size_t>(std::clamp(
        i, 0LL, static_cast<long long>(spec.freq_hz.size()) - 1));
  };
  const size_t lo = clamp(static_cast<long long>(std::floor(x)));
  const size_t hi = clamp(static_cast<long long>(std::floor(x)) + 1);
  const double d_lo = std::abs(spec.freq_hz[lo] - target_hz);
  const double d_hi = std::abs(spec.freq_hz[hi] - target_hz);
  return d_hi < d_lo ? hi : lo;  // ties resolve toward the lower frequency
}

inline double line_phase(const Spectrum& spec, double target_hz) {
  const size_t idx = nearest_bin(spec, target_hz);
  const double mag = std::abs(spec.amp[idx]);

  std::vector<double> mags(spec.amp.size());
  std::transform(spec.amp.begin(), spec.amp.end(), mags.begin(),
                 [](complexd a) { return std::abs(a); });
  const size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + static_cast<long>(mid),
                   mags.end());
  const double floor_mag =
      1e-12 * static_cast<double>(spec.source_samples);
  if (mag <= 5.0 * mags[mid] || mag <= floor_mag)
    throw PeakNotFoundError("no spectral line near " +
                            std::to_string(target_hz) + " Hz");

  // A line off bin centre by delta leaves a rectangular-window phase ramp
  // pi * delta * (N - 1) * dt at the nearest bin; remove it so the reported
  // phase is the line's own.
  const double delta = target_hz - spec.freq_hz[idx];
  const double ramp =
      pi * delta * static_cast<double>(spec.source_samples - 1) * spec.dt;
  return wrap_pi(std::arg(spec.amp[idx]) - ramp);
}

}  // namespace detail

// Phases of the two doublet lines at -J/2 and +J/2 Hz. The system is needed
// for the line positions; the acquisition frame must have kept the control
// channel on resonance.
inline DoubletPhases doublet_phase(const Spectrum& spec,
                                   const SpinSystem& sys) {
  DoubletPhases phases;
  phases.left = detail::line_phase(spec, -0.5 * sys.j_coupling);
  phases.right = detail::line_phase(spec, 0.5 * sys.j_coupling);
  return phases;
}

struct BetaMeasurement {
  double beta = 0.0;
  // Gap between the two per-line phase shifts; a clean conditional phase
  // moves both lines together, so this is a consistency diagnostic.
  double line_disagreement = 0.0;
};

// Conditional phase from two acquisitions: the gate advances both control
// coherences by exp(-i beta), so beta is minus the common line shift
// between the final and reference spectra. Differential, hence immune to
// receiver phase, off-bin ramps, and shared relaxation envelopes.
inline BetaMeasurement extract_beta(const Spectrum& final_spec,
                                    const Spectrum& reference_spec,
                                    const SpinSystem& sys) {
  if (final_spec.freq_hz.size() != reference_spec.freq_hz.size() ||
      final_spec.dt != reference_spec.dt ||
      final_spec.source_samples != reference_spec.source_samples)
    throw std::invalid_argument("extract_beta: mismatched acquisition grids");

  const DoubletPhases f = doublet_phase(final_spec, sys);
  const DoubletPhases r = doublet_phase(reference_spec, sys);
  const double dl = wrap_pi(f.left - r.left);
  const double dr = wrap_pi(f.right - r.right);

  BetaMeasurement m;
  m.line_disagreement = std::abs(wrap_pi(dl - dr));
  const double mean =
      std::atan2(std::sin(dl) + std::sin(dr), std::cos(dl) + std::cos(dr));
  m.beta = wrap_pi(-mean);
  return m;
}

inline void write_fid_csv(const Fid& fid, std::ostream& out) {
  out << "t,re,im\n";
  for (size_t k = 0; k < fid.samples.size(); ++k) {
    out << format_double(static_cast<double>(k) * fid.dt) << ","
        << format_double(fid.samples[k].real()) << ","
        << format_double(fid.samples[k].imag()) << "\n";
  }
}

inline void write_spectrum_csv(const Spectrum& spec, std::ostream& out) {
  out << "freq_hz,re,im,magnitude,phase\n";
  for (size_t k = 0; k < spec.freq_hz.size(); ++k) {
    out << format_double(spec.freq_hz[k]) << ","
        << format_double(spec.amp[k].real()) << ","
        << format_double(spec.amp[k].imag()) << ","
        << format_double(std::abs(spec.amp[k])) << ","
        << format_double(std::arg(spec.amp[k])) << "\n";
  }
}

}  // namespace aagate
