// Command-line front end: simulate a pulse program, run the tip-angle sweep,
// check the gate against its ideal form, or compare dephasing losses.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "aagate/harness.hpp"

namespace fs = std::filesystem;
using namespace aagate;

namespace {

struct SystemFlags {
  double j = 0.0, t2a = 0.0, t2b = 0.0;
  CLI::Option* j_opt = nullptr;
  CLI::Option* t2a_opt = nullptr;
  CLI::Option* t2b_opt = nullptr;

  void attach(CLI::App* cmd) {
    j_opt = cmd->add_option("--j", j, "scalar coupling in Hz");
    t2a_opt = cmd->add_option("--t2a", t2a, "target-channel T2 in seconds");
    t2b_opt = cmd->add_option("--t2b", t2b, "control-channel T2 in seconds");
  }

  void apply(SpinSystem& sys) const {
    if (j_opt->count()) sys.j_coupling = j;
    if (t2a_opt->count()) sys.t2_a = t2a;
    if (t2b_opt->count()) sys.t2_b = t2b;
    sys.validate();
  }
};

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::cout << "wrote " << path.string() << "\n";
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::map<std::string, double> parse_overrides(
    const std::vector<std::string>& sets, const CLI::Option* theta_opt,
    double theta) {
  std::map<std::string, double> overrides;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("--set expects name=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  if (theta_opt->count()) overrides["theta"] = theta;
  return overrides;
}

void print_state(const QuantumState& s) {
  if (s.is_pure()) {
    const cvec& v = s.amplitudes();
    const char* labels[] = {"|uu>", "|ud>", "|du>", "|dd>"};
    for (int k = 0; k < 4; ++k)
      std::cout << "  " << labels[k] << "  " << format_double(v(k).real())
                << (v(k).imag() < 0 ? " - " : " + ")
                << format_double(std::abs(v(k).imag())) << "i\n";
  } else {
    const cmat rho = s.as_density();
    std::cout << "  populations:";
    for (int k = 0; k < 4; ++k)
      std::cout << " " << format_double(rho(k, k).real());
    std::cout << "\n";
  }
}

int run_simulate(const std::string& seq_path, const std::string& init_name,
                 double epsilon, bool finite, bool relaxation,
                 double dt_record, double dt_integrate, double fid_duration,
                 double fid_dt, int zero_fill,
                 const std::map<std::string, double>& overrides,
                 SpinSystem sys, const SystemFlags& flags,
                 const fs::path& out_dir) {
  const PulseProgram prog = parse(read_file(seq_path));
  sys = spin_system_from_program(prog, sys);
  flags.apply(sys);
  const EventTimeline tl = resolve(prog, overrides, sys);
  const FrameSpec frame = FrameSpec::canonical(sys);

  QuantumState init = QuantumState::pure([] {
    cvec e = cvec::Zero(4);
    e(0) = 1.0;
    return e;
  }());
  if (init_name == "plus-a") {
    init = prepare_plus(init, Site::a);
  } else if (init_name == "readout") {
    init = QuantumState::density(pseudo_pure_state(epsilon));
    init = prepare_plus(prepare_plus(init, Site::b), Site::a);
  } else if (init_name != "uu") {
    throw std::runtime_error("unknown --init '" + init_name +
                             "' (expected plus-a, readout or uu)");
  }

  SimOptions opts;
  opts.instantaneous_pulses = !finite;
  opts.relaxation = relaxation;
  opts.dt_record = dt_record;
  opts.dt_integrate = dt_integrate;
  const SimResult res = simulate(tl, sys, frame, init, opts);

  std::cout << "program: " << seq_path << "\n"
            << "segments: " << tl.segments.size()
            << ", total duration: " << format_double(tl.total_duration)
            << " s\n"
            << "final state:\n";
  print_state(res.final_state);

  {
    auto out = open_output(out_dir, "trajectory.csv");
    export_trajectory_csv(res.trajectory, out);
  }

  if (res.trajectory.pure_run && res.trajectory.instantaneous) {
    try {
      const PhaseReport report =
          phase_decomposition(res.trajectory, SpinState::up);
      const double panch = pancharatnam_phase(
          toggling_trajectory(res.trajectory, SpinState::up));
      const auto theta_it = tl.bindings.find("theta");
      const double theta = theta_it != tl.bindings.end()
                               ? theta_it->second
                               : std::numeric_limits<double>::quiet_NaN();
      auto out = open_output(out_dir, "phase_report.csv");
      write_phase_csv_header(out);
      write_phase_csv_row(out, theta, report, panch);
      std::cout << "geometric phase: " << format_double(report.geometric)
                << " rad (dynamic " << format_double(report.dynamic)
                << ", solid angle " << format_double(report.solid_angle)
                << ")\n";
    } catch (const std::exception& e) {
      std::cerr << "note: phase analysis skipped: " << e.what() << "\n";
    }
  }

  {
    AcquisitionOptions acq;
    acq.duration = fid_duration;
    acq.dt = fid_dt;
    acq.relaxation = relaxation;
    const Fid fid = synthesize_fid(res.final_state, sys, frame, acq);
    auto fid_out = open_output(out_dir, "final_fid.csv");
    write_fid_csv(fid, fid_out);
    auto spec_out = open_output(out_dir, "final_spectrum.csv");
    write_spectrum_csv(spectrum(fid, zero_fill), spec_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-spin conditional-phase gate simulator"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a pulse program");
  std::string seq_path;
  sim->add_option("program", seq_path, "pulse program file")->required();
  double theta = pi / 4.0;
  auto* sim_theta = sim->add_option("--theta", theta, "override param theta");
  std::vector<std::string> sets;
  sim->add_option("--set", sets, "override a param, name=value");
  std::string init_name = "plus-a";
  sim->add_option("--init", init_name,
                  "initial state: plus-a, readout or uu (default plus-a)");
  double epsilon = 1.0;
  sim->add_option("--epsilon", epsilon, "pseudo-pure purity for --init readout");
  bool finite = false;
  sim->add_flag("--finite-pulses", finite, "keep stated pulse durations");
  bool relaxation = false;
  sim->add_flag("--relaxation", relaxation, "interleave phase damping");
  double dt_record = 0.0;
  sim->add_option("--dt-record", dt_record, "trajectory sampling step in s");
  double dt_integrate = 1e-7;
  sim->add_option("--dt-integrate", dt_integrate,
                  "integration step inside finite pulses in s");
  double fid_duration = 1.0;
  sim->add_option("--fid-duration", fid_duration, "acquisition length in s");
  double fid_dt = 1e-4;
  sim->add_option("--fid-dt", fid_dt, "acquisition sampling step in s");
  int zero_fill = 4;
  sim->add_option("--zero-fill", zero_fill, "zero-filling factor");
  std::string sim_out = ".";
  sim->add_option("--out", sim_out, "output directory");
  SystemFlags sim_sys;
  sim_sys.attach(sim);

  // fig3-sweep
  auto* sweep = app.add_subcommand(
      "fig3-sweep", "sweep theta = n pi/16 and tabulate the phases");
  SweepOptions sweep_opts;
  sweep->add_option("--epsilon", sweep_opts.epsilon, "pseudo-pure purity");
  bool sweep_relax = false;
  sweep->add_flag("--relaxation", sweep_relax,
                  "phase damping in the readout pipeline");
  sweep->add_option("--fid-duration", sweep_opts.fid_duration,
                    "acquisition length in s");
  sweep->add_option("--fid-dt", sweep_opts.fid_dt,
                    "acquisition sampling step in s");
  sweep->add_option("--zero-fill", sweep_opts.zero_fill, "zero-filling factor");
  sweep->add_option("--phase-samples", sweep_opts.phase_samples,
                    "trajectory samples for the phase analysis");
  std::string sweep_out = ".";
  sweep->add_option("--out", sweep_out, "output directory");
  SystemFlags sweep_sys;
  sweep_sys.attach(sweep);

  // gate-check
  auto* check = app.add_subcommand("gate-check",
                                   "compare the propagator to the ideal gate");
  double check_theta = pi / 4.0;
  check->add_option("--theta", check_theta, "tip angle in rad");
  bool check_finite = false;
  check->add_flag("--finite-pulses", check_finite, "keep stated pulse durations");
  double check_dt_int = 1e-7;
  check->add_option("--dt-integrate", check_dt_int,
                    "integration step inside finite pulses in s");
  std::string check_out = ".";
  check->add_option("--out", check_out, "output directory");
  SystemFlags check_sys;
  check_sys.attach(check);

  // decoherence-compare
  auto* deco = app.add_subcommand(
      "decoherence-compare", "dephasing losses: closed form next to simulated");
  std::string deco_out = ".";
  deco->add_option("--out", deco_out, "output directory");
  SystemFlags deco_sys;
  deco_sys.attach(deco);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      SpinSystem sys = SpinSystem::chloroform();
      return run_simulate(seq_path, init_name, epsilon, finite, relaxation,
                          dt_record, dt_integrate, fid_duration, fid_dt,
                          zero_fill, parse_overrides(sets, sim_theta, theta),
                          sys, sim_sys, sim_out);
    }
    if (sweep->parsed()) {
      SpinSystem sys = SpinSystem::chloroform();
      sweep_sys.apply(sys);
      sweep_opts.relaxation = sweep_relax;
      const SweepResult result = run_fig3_sweep(sys, sweep_opts);
      std::cout << "  n   theta      beta_gate  beta_readout  solid_angle\n";
      for (const auto& r : result.rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%3d  %8.5f  %10.6f  %12.6f  %11.6f",
                      r.n, r.theta, r.beta_gate, r.beta_readout, r.solid_angle);
        std::cout << buf << "\n";
      }
      std::cout << "slope vs omega: gate " << format_double(result.slope_gate)
                << ", readout " << format_double(result.slope_readout) << "\n"
                << "max deviation from 2*theta: gate "
                << format_double(result.max_gate_dev) << ", readout "
                << format_double(result.max_readout_dev) << "\n";
      auto out = open_output(sweep_out, "fig3_sweep.csv");
      write_sweep_csv(result, out);
      return 0;
    }
    if (check->parsed()) {
      SpinSystem sys = SpinSystem::chloroform();
      check_sys.apply(sys);
      const GateCheckReport report =
          run_gate_check(sys, check_theta, check_finite, check_dt_int);
      std::cout << "theta: " << format_double(report.theta) << " rad, "
                << (report.finite_pulses ? "finite" : "instantaneous")
                << " pulses\n"
                << "fidelity vs ideal: " << format_double(report.fidelity)
                << "\n"
                << "down-block deviation from identity: "
                << format_double(report.down_block_error) << "\n"
                << "effective beta: " << format_double(report.beta_effective)
                << " rad (ideal " << format_double(2.0 * check_theta) << ")\n";
      auto out = open_output(check_out, "gate_unitary.csv");
      write_gate_csv(report.unitary, out);
      return 0;
    }
    if (deco->parsed()) {
      SpinSystem sys = SpinSystem::chloroform();
      deco_sys.apply(sys);
      const auto rows = run_decoherence_compare(sys);
      std::cout << "  duration    t2     closed-form  simulated  window\n";
      for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%10.6f  %5.2f  %11.6f  ", r.duration,
                      r.t2, r.closed_form);
        std::cout << buf;
        if (std::isnan(r.simulated))
          std::cout << "        -  ";
        else {
          std::snprintf(buf, sizeof(buf), "%9.6f  ", r.simulated);
          std::cout << buf;
        }
        std::cout << r.label << "\n";
      }
      auto out = open_output(deco_out, "decoherence_compare.csv");
      write_retention_csv(rows, out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
