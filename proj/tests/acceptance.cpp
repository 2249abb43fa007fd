// End-to-end acceptance gate: one line per criterion, nonzero exit if any
// fails. Runs against the shipped sequence corpus and the library's public
// interfaces only.
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aagate/harness.hpp"
#include "oracles.hpp"

using namespace aagate;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " " << number << " " << name;
  if (!detail.empty()) std::cout << ": " << detail;
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int number, const std::string& name, Fn fn) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("unexpected exception: ") + e.what();
  }
  report(number, name, ok, detail);
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(3) << std::scientific << v;
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SimResult phase_run(const SpinSystem& sys, double theta, int branch_index,
                    int samples) {
  const EventTimeline tl = collapse_pulses(
      resolve(parse(canonical_gate_program()), {{"theta", theta}}, sys));
  cvec e0 = cvec::Zero(4);
  e0(branch_index) = 1.0;
  SimOptions opts;
  opts.instantaneous_pulses = true;
  opts.dt_record = tl.total_duration / static_cast<double>(samples);
  return simulate(tl, sys, FrameSpec::canonical(sys),
                  prepare_plus(QuantumState::pure(e0), Site::a), opts);
}

// Regression pin for the finite-pulse gate fidelity, frozen from the first
// verified run (0.99999323370882576). A drop below it means the integrator
// or the sequence changed behaviour.
const double kFinitePulseFidelityPin = 0.999993;

}  // namespace

int main() {
  const SpinSystem sys = SpinSystem::chloroform();
  const FrameSpec frame = FrameSpec::canonical(sys);

  criterion(1, "conditional phase law over the full sweep", [&](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult sweep = run_fig3_sweep(sys);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    double gate_dev = 0.0, readout_dev = 0.0;
    for (const auto& row : sweep.rows) {
      gate_dev = std::max(
          gate_dev, std::abs(row.beta_gate_unwrapped - 2.0 * row.theta));
      readout_dev = std::max(
          readout_dev, std::abs(row.beta_readout_unwrapped - 2.0 * row.theta));
    }
    d = "gate dev " + fmt(gate_dev) + ", readout dev " + fmt(readout_dev) +
        ", " + fmt(secs) + " s";
    return sweep.rows.size() == 17 && gate_dev < 1e-6 && readout_dev < 2e-2 &&
           secs < 10.0;
  });

  criterion(2, "three phase measurements agree", [&](std::string& d) {
    double worst = 0.0;
    for (double theta : {pi / 16.0, pi / 8.0, pi / 4.0, 3.0 * pi / 8.0,
                         pi / 2.0}) {
      const SimResult res = phase_run(sys, theta, 0, 4000);
      const PhaseReport rep = phase_decomposition(res.trajectory, SpinState::up);
      const double panch = pancharatnam_phase(
          toggling_trajectory(res.trajectory, SpinState::up));
      const double a = std::abs(rep.geometric);
      const double b = std::abs(panch);
      const double c = 0.5 * std::abs(rep.solid_angle);
      worst = std::max({worst, std::abs(a - b), std::abs(b - c),
                        std::abs(a - c)});
    }
    d = "worst pairwise gap " + fmt(worst);
    return worst < 1e-3;
  });

  criterion(3, "delays contribute no dynamic phase", [&](std::string& d) {
    double worst = 0.0;
    for (int branch = 0; branch < 2; ++branch) {
      const SimResult res = phase_run(sys, pi / 4.0, 2 * branch, 2000);
      const PhaseReport rep = phase_decomposition(
          res.trajectory, branch == 0 ? SpinState::up : SpinState::down);
      if (rep.segment_dynamic.size() != 2) return false;
      for (double seg : rep.segment_dynamic)
        worst = std::max(worst, std::abs(seg));
      worst = std::max(worst, std::abs(rep.dynamic));
    }
    d = "worst segment " + fmt(worst);
    return worst < 1e-9;
  });

  criterion(4, "propagator equals the conditional phase gate", [&](std::string& d) {
    const GateCheckReport quarter = run_gate_check(sys, pi / 4.0, false);
    bool ok = quarter.fidelity >= 1.0 - 1e-9;
    double worst_block = 0.0, worst_down = 0.0;
    for (int n = 0; n <= 16; ++n) {
      const double theta = static_cast<double>(n) * pi / 16.0;
      const GateCheckReport rep = run_gate_check(sys, theta, false);
      const double down_fid =
          std::abs(rep.unitary.block(2, 2, 2, 2).trace()) / 2.0;
      worst_down = std::max(worst_down, 1.0 - down_fid);
      worst_block = std::max(
          worst_block, max_abs(cmat(rep.unitary - ideal_gate(2.0 * theta))));
    }
    d = "fidelity " + fmt(quarter.fidelity) + ", worst block dev " +
        fmt(worst_block);
    return ok && worst_down < 1e-9 && worst_block < 1e-9;
  });

  criterion(5, "state checkpoints at tau and 2 tau", [&](std::string& d) {
    const SimResult res = phase_run(sys, pi / 4.0, 0, 2);
    const double tau = 0.5 / sys.j_coupling;
    double worst = -1.0;
    for (const auto& target : {std::pair<double, double>{tau, -1.0},
                               std::pair<double, double>{2.0 * tau, 1.0}}) {
      for (const auto& s : res.trajectory.samples) {
        if (std::abs(s.t - target.first) > 1e-15) continue;
        const cvec branch =
            detail::conditional_amplitudes(s.state.amplitudes(), SpinState::up);
        const auto bloch = bloch_vector(branch);
        const double dist = std::sqrt(
            (bloch[0] - target.second) * (bloch[0] - target.second) +
            bloch[1] * bloch[1] + bloch[2] * bloch[2]);
        worst = std::max(worst, dist);
      }
    }
    if (worst < 0.0) {
      d = "checkpoint samples missing";
      return false;
    }

    // Full-cycle conditional phase against the brute-force propagator.
    const EventTimeline tl = collapse_pulses(
        resolve(parse(canonical_gate_program()), {}, sys));
    const cmat u = oracles::propagator(tl, sys, frame, true);
    cvec init = cvec::Zero(4);
    init(0) = 1.0 / std::sqrt(2.0);
    init(1) = 1.0 / std::sqrt(2.0);
    const double phase =
        std::abs(overlap_phase(init, cvec(u * init)));
    d = "worst Bloch distance " + fmt(worst) + ", |phase - pi/2| " +
        fmt(std::abs(phase - 0.5 * pi));
    return worst < 1e-9 && std::abs(phase - 0.5 * pi) < 1e-9;
  });

  criterion(6, "finite pulses stay faithful", [&](std::string& d) {
    const GateCheckReport coarse = run_gate_check(sys, pi / 4.0, true, 1e-7);
    const GateCheckReport fine = run_gate_check(sys, pi / 4.0, true, 5e-8);
    const double step_change = std::abs(coarse.fidelity - fine.fidelity);
    d = "fidelity " + fmt(coarse.fidelity) + ", step sensitivity " +
        fmt(step_change);
    return coarse.fidelity > 0.999 &&
           coarse.fidelity >= kFinitePulseFidelityPin && step_change < 1e-6;
  });

  criterion(7, "dephasing table matches the closed forms", [&](std::string& d) {
    const std::vector<RetentionRow> rows = run_decoherence_compare(sys);
    if (rows.size() != 8) return false;
    const bool headline =
        std::abs(rows[3].closed_form - 0.9841) < 1e-3 &&
        std::abs(rows[5].closed_form - 0.6703) < 1e-3;
    double worst = 0.0;
    for (int k = 0; k < 6; ++k)
      worst = std::max(worst,
                       std::abs(rows[k].simulated - rows[k].closed_form));
    d = "worst engine decay gap " + fmt(worst);
    return headline && worst < 1e-9;
  });

  criterion(8, "sequence corpus behaves as documented", [&](std::string& d) {
    const std::string dir = AAGATE_SEQ_DIR;
    const PulseProgram prog = parse(read_file(dir + "/fig2.seq"));
    const EventTimeline tl = resolve(prog, {}, sys);
    if (tl.segments.size() != 5) {
      d = "wrong segment count";
      return false;
    }
    const double tau = tl.segments[1].duration;
    if (std::abs(tau - 2.32666e-3) > 1e-8 ||
        std::abs(tl.segments[3].duration - tau) > 1e-15) {
      d = "wrong delay duration";
      return false;
    }
    for (double theta : {0.1, pi / 4.0, 1.0, 2.5, pi}) {
      const EventTimeline swept = resolve(prog, {{"theta", theta}}, sys);
      double flip_sum = 0.0;
      for (const auto& seg : swept.segments)
        if (seg.pulse) flip_sum += seg.pulse->flip_rad;
      if (std::abs(flip_sum) > 1e-12) {
        d = "flip angles do not cancel";
        return false;
      }
    }

    struct Case {
      const char* file;
      char kind;  // p = parse, e = eval, r = resolve
      const char* needle;
    };
    const Case cases[] = {
        {"bad_axis.seq", 'p', "expected axis"},
        {"unknown_keyword.seq", 'p', "unknown keyword"},
        {"duplicate_param.seq", 'p', "duplicate param"},
        {"missing_equals.seq", 'p', "expected '='"},
        {"unbalanced_paren.seq", 'p', "expected ')'"},
        {"missing_angle.seq", 'p', "expected expression"},
        {"reserved_param.seq", 'p', "reserved identifier"},
        {"unbound_identifier.seq", 'e', "unbound identifier"},
        {"division_by_zero.seq", 'e', "division by zero"},
        {"negative_delay.seq", 'r', "negative duration"},
    };
    int good = 0;
    std::string misses;
    for (const auto& c : cases) {
      const std::string text = read_file(dir + "/bad/" + std::string(c.file));
      char got = '-';
      std::string message;
      try {
        resolve(parse(text), {}, sys);
      } catch (const ParseError& e) {
        got = 'p';
        message = e.what();
      } catch (const EvalError& e) {
        got = 'e';
        message = e.what();
      } catch (const ResolveError& e) {
        got = 'r';
        message = e.what();
      }
      if (got == c.kind && message.find(c.needle) != std::string::npos) {
        ++good;
      } else {
        misses += std::string(" ") + c.file;
      }
    }
    d = std::to_string(good) + "/10 diagnostics" +
        (misses.empty() ? "" : "; missed:" + misses);
    return good == 10;
  });

  criterion(9, "state contracts, gauge freedom, determinism", [&](std::string& d) {
    // Density contract through a relaxed run.
    const EventTimeline tl = collapse_pulses(
        resolve(parse(canonical_gate_program()), {}, sys));
    QuantumState init = QuantumState::density(pseudo_pure_state(0.7));
    init = prepare_plus(prepare_plus(init, Site::b), Site::a);
    SimOptions opts;
    opts.instantaneous_pulses = true;
    opts.relaxation = true;
    opts.dt_record = tl.total_duration / 64.0;
    const SimResult relaxed = simulate(tl, sys, frame, init, opts);
    const cmat rho = relaxed.final_state.density_matrix();
    Eigen::SelfAdjointEigenSolver<cmat> eig(rho);
    const bool density_ok = std::abs(rho.trace().real() - 1.0) < 1e-10 &&
                            hermiticity_error(rho) < 1e-10 &&
                            eig.eigenvalues().minCoeff() > -1e-10;

    // Unitarity of the pure pipeline.
    SimOptions pure_opts;
    pure_opts.instantaneous_pulses = true;
    const cmat u = extract_gate_unitary(tl, sys, frame, pure_opts);
    const bool unitary_ok = unitarity_error(u) < 1e-10;

    // Pancharatnam gauge invariance under random per-sample phases.
    const SimResult res = phase_run(sys, pi / 4.0, 0, 500);
    BlochLoop loop = toggling_trajectory(res.trajectory, SpinState::up);
    const double before = pancharatnam_phase(loop);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uniform(-pi, pi);
    for (auto& psi : loop.states)
      psi *= std::exp(complexd(0.0, uniform(rng)));
    const bool gauge_ok = std::abs(pancharatnam_phase(loop) - before) < 1e-12;

    // Excess-independence of the spectral readout.
    double betas[2];
    int slot = 0;
    for (double eps : {0.3, 1.0}) {
      QuantumState st = QuantumState::density(pseudo_pure_state(eps));
      st = prepare_plus(prepare_plus(st, Site::b), Site::a);
      SimOptions run;
      run.instantaneous_pulses = true;
      run.dt_record = tl.total_duration;
      const QuantumState fin = simulate(tl, sys, frame, st, run).final_state;
      AcquisitionOptions acq;
      const Spectrum ref = spectrum(synthesize_fid(st, sys, frame, acq), 4);
      const Spectrum sig = spectrum(synthesize_fid(fin, sys, frame, acq), 4);
      betas[slot++] = extract_beta(sig, ref, sys).beta;
    }
    const bool eps_ok = std::abs(betas[0] - betas[1]) < 1e-9;

    // Bit-identical sweep CSV on a repeated run.
    std::ostringstream first, second;
    write_sweep_csv(run_fig3_sweep(sys), first);
    write_sweep_csv(run_fig3_sweep(sys), second);
    const bool deterministic = first.str() == second.str();

    d = std::string("density ") + (density_ok ? "ok" : "BAD") + ", unitary " +
        (unitary_ok ? "ok" : "BAD") + ", gauge " + (gauge_ok ? "ok" : "BAD") +
        ", excess " + (eps_ok ? "ok" : "BAD") + ", csv " +
        (deterministic ? "ok" : "BAD");
    return density_ok && unitary_ok && gauge_ok && eps_ok && deterministic;
  });

  if (g_failures == 0) {
    std::cout << "all criteria passed" << std::endl;
    return 0;
  }
  std::cout << g_failures << " criteria failed" << std::endl;
  return 1;
}
