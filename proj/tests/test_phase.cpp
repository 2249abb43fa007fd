#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <random>
#include <sstream>

#include "aagate/phase.hpp"
#include "oracles.hpp"

using namespace aagate;
using Catch::Matchers::WithinAbs;

namespace {

const char* kProgram =
    "param theta = pi/4\n"
    "pulse a x -theta dur 5e-6\n"
    "delay 1/(2*J)\n"
    "pulse a x 2*theta - pi dur 5e-6\n"
    "delay 1/(2*J)\n"
    "pulse a x pi - theta dur 5e-6\n";

SimResult run_gate(double theta, int samples = 4000) {
  const SpinSystem sys = SpinSystem::chloroform();
  const EventTimeline tl = collapse_pulses(
      resolve(parse(kProgram), {{"theta", theta}}, sys));
  cvec e0 = cvec::Zero(4);
  e0(0) = 1.0;
  SimOptions opts;
  opts.instantaneous_pulses = true;
  opts.dt_record = tl.total_duration / samples;
  return simulate(tl, sys, FrameSpec::canonical(sys),
                  prepare_plus(QuantumState::pure(e0), Site::a), opts);
}

}  // namespace

TEST_CASE("toggling trajectory closes the two-lobed loop") {
  const double theta = pi / 4.0;
  const SimResult res = run_gate(theta);
  const BlochLoop loop = toggling_trajectory(res.trajectory, SpinState::up);

  REQUIRE(loop.points.size() == res.trajectory.samples.size());
  REQUIRE(loop.closure_gap() < 1e-9);

  // Start at +x, reach -x half way, return; every point on the sphere.
  REQUIRE_THAT(loop.points.front()[0], WithinAbs(1.0, 1e-12));
  const size_t mid = loop.points.size() / 2;
  REQUIRE_THAT(loop.points[mid][0], WithinAbs(-1.0, 1e-9));
  for (const auto& p : loop.points) {
    REQUIRE_THAT(p[0] * p[0] + p[1] * p[1] + p[2] * p[2],
                 WithinAbs(1.0, 1e-10));
  }

  // Quarter way: the first lobe's crest at (0, cos theta, sin theta).
  const auto& q = loop.points[loop.points.size() / 4];
  REQUIRE_THAT(q[0], WithinAbs(0.0, 1e-6));
  REQUIRE_THAT(q[1], WithinAbs(std::cos(theta), 1e-6));
  REQUIRE_THAT(q[2], WithinAbs(std::sin(theta), 1e-6));
}

TEST_CASE("toggling analysis rejects unsupported trajectories") {
  const SpinSystem sys = SpinSystem::chloroform();
  const FrameSpec frame = FrameSpec::canonical(sys);
  const EventTimeline tl = resolve(parse(kProgram), {}, sys);
  cvec e0 = cvec::Zero(4);
  e0(0) = 1.0;
  const QuantumState psi = prepare_plus(QuantumState::pure(e0), Site::a);

  SECTION("finite pulses") {
    const SimResult res = simulate(tl, sys, frame, psi, {});
    REQUIRE_THROWS_AS(toggling_trajectory(res.trajectory, SpinState::up),
                      std::invalid_argument);
  }

  SECTION("density runs") {
    SimOptions opts;
    opts.instantaneous_pulses = true;
    opts.relaxation = true;
    const SimResult res = simulate(tl, sys, frame, psi, opts);
    REQUIRE_THROWS_AS(toggling_trajectory(res.trajectory, SpinState::up),
                      std::invalid_argument);
  }

  SECTION("state leaking out of the selected branch") {
    SimOptions opts;
    opts.instantaneous_pulses = true;
    const SimResult res = simulate(tl, sys, frame, psi, opts);
    REQUIRE_THROWS_AS(toggling_trajectory(res.trajectory, SpinState::down),
                      std::invalid_argument);
  }

  SECTION("control-channel pulses mix the branches") {
    const EventTimeline mix =
        resolve(parse("pulse b x pi/2\ndelay 1e-3\npulse b x -pi/2\n"), {}, sys);
    SimOptions opts;
    opts.instantaneous_pulses = true;
    const SimResult res = simulate(mix, sys, frame, psi, opts);
    REQUIRE_THROWS_AS(toggling_trajectory(res.trajectory, SpinState::up),
                      std::invalid_argument);
  }
}

TEST_CASE("phase decomposition: geometric 2 theta, dynamic zero") {
  for (double theta : {pi / 16.0, pi / 8.0, pi / 4.0, 3.0 * pi / 8.0, pi / 2.0}) {
    const SimResult res = run_gate(theta);
    const PhaseReport report = phase_decomposition(res.trajectory, SpinState::up);

    REQUIRE_THAT(wrap_pi(report.geometric - 2.0 * theta), WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(report.dynamic, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(wrap_pi(report.total - report.dynamic - report.geometric),
                 WithinAbs(0.0, 1e-12));

    // Each delay contributes zero dynamic phase on its own.
    REQUIRE(report.segment_dynamic.size() == 2);
    for (double d : report.segment_dynamic) REQUIRE(std::abs(d) < 1e-9);

    // The loop opening is 2 theta, the enclosed area 4 theta, and the phase
    // minus half of it (up to full spheres).
    REQUIRE_THAT(std::abs(report.solid_angle), WithinAbs(4.0 * theta, 1e-6));
    REQUIRE_THAT(wrap_pi(report.geometric + 0.5 * report.solid_angle),
                 WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(std::abs(report.winding_m), WithinAbs(0.5, 1e-12));
  }
}

TEST_CASE("the lune is traversed clockwise below the half-sphere point") {
  // Short of theta = pi/2 the mean loop direction is well defined and the
  // signed area comes out negative, matching beta = -(solid angle)/2 without
  // any winding ambiguity.
  for (double theta : {pi / 16.0, pi / 8.0, pi / 4.0, 3.0 * pi / 8.0}) {
    const PhaseReport report =
        phase_decomposition(run_gate(theta).trajectory, SpinState::up);
    REQUIRE_THAT(report.solid_angle, WithinAbs(-4.0 * theta, 1e-6));
    REQUIRE_THAT(report.winding_m, WithinAbs(-0.5, 1e-12));
  }
}

TEST_CASE("phase decomposition handles the range above pi/2 and the edges") {
  SECTION("theta between pi/2 and pi wraps consistently") {
    const double theta = 0.75 * pi;
    const PhaseReport report =
        phase_decomposition(run_gate(theta).trajectory, SpinState::up);
    REQUIRE_THAT(report.geometric, WithinAbs(wrap_pi(2.0 * theta), 1e-9));
    REQUIRE_THAT(wrap_pi(report.geometric + 0.5 * report.solid_angle),
                 WithinAbs(0.0, 1e-6));
  }

  SECTION("theta = 0 degenerates to a retraced arc with zero area") {
    const PhaseReport report =
        phase_decomposition(run_gate(0.0).trajectory, SpinState::up);
    REQUIRE_THAT(report.geometric, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(report.solid_angle, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(report.dynamic, WithinAbs(0.0, 1e-9));
  }

  SECTION("theta = pi retraces the full equator") {
    const PhaseReport report =
        phase_decomposition(run_gate(pi).trajectory, SpinState::up);
    REQUIRE_THAT(report.geometric, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(report.solid_angle, WithinAbs(0.0, 1e-9));
  }
}

TEST_CASE("phase decomposition is trapezoid-exact under resampling") {
  const PhaseReport coarse =
      phase_decomposition(run_gate(pi / 4.0, 500).trajectory, SpinState::up);
  const PhaseReport fine =
      phase_decomposition(run_gate(pi / 4.0, 4000).trajectory, SpinState::up);
  REQUIRE_THAT(coarse.geometric, WithinAbs(fine.geometric, 1e-9));
  REQUIRE_THAT(coarse.dynamic, WithinAbs(fine.dynamic, 1e-9));
}

TEST_CASE("phase decomposition rejects open trajectories") {
  const SpinSystem sys = SpinSystem::chloroform();
  const EventTimeline tl =
      resolve(parse("pulse a x -pi/4\ndelay 1/(4*J)\n"), {}, sys);
  cvec e0 = cvec::Zero(4);
  e0(0) = 1.0;
  SimOptions opts;
  opts.instantaneous_pulses = true;
  const SimResult res =
      simulate(tl, sys, FrameSpec::canonical(sys),
               prepare_plus(QuantumState::pure(e0), Site::a), opts);
  REQUIRE_THROWS_AS(phase_decomposition(res.trajectory, SpinState::up),
                    std::invalid_argument);
}

TEST_CASE("pancharatnam phase matches the toggling decomposition exactly") {
  for (double theta : {pi / 8.0, pi / 4.0, 3.0 * pi / 8.0}) {
    const SimResult res = run_gate(theta);
    const PhaseReport report = phase_decomposition(res.trajectory, SpinState::up);
    const double panch =
        pancharatnam_phase(toggling_trajectory(res.trajectory, SpinState::up));
    REQUIRE_THAT(panch, WithinAbs(report.geometric, 1e-9));
  }
}

TEST_CASE("pancharatnam phase on analytic cap loops") {
  SECTION("matches -pi (1 - cos chi) and converges") {
    const double chi = pi / 3.0;
    const double expected = wrap_pi(-pi * (1.0 - std::cos(chi)));
    const double coarse = pancharatnam_phase(oracles::cap_loop(chi, 2000));
    const double fine = pancharatnam_phase(oracles::cap_loop(chi, 4000));
    REQUIRE_THAT(coarse, WithinAbs(expected, 5e-3));
    REQUIRE(std::abs(fine - expected) < std::abs(coarse - expected));
  }

  SECTION("equator gives half the sphere") {
    const double p = pancharatnam_phase(oracles::cap_loop(0.5 * pi, 2000));
    REQUIRE_THAT(std::abs(p), WithinAbs(pi, 5e-3));
  }

  SECTION("gauge invariance under per-sample phases") {
    BlochLoop loop = oracles::cap_loop(pi / 3.0, 500);
    const double before = pancharatnam_phase(loop);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (auto& psi : loop.states)
      psi *= std::exp(complexd(0.0, u(rng)));
    REQUIRE_THAT(pancharatnam_phase(loop), WithinAbs(before, 1e-12));
  }

  SECTION("orthogonal consecutive samples are rejected") {
    BlochLoop loop;
    cvec up(2), down(2), plus(2);
    up << 1.0, 0.0;
    down << 0.0, 1.0;
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    loop.states = {up, down, plus};
    REQUIRE_THROWS_AS(pancharatnam_phase(loop), std::invalid_argument);
  }
}

TEST_CASE("solid angle of analytic cap loops") {
  SECTION("small and mid caps") {
    for (double chi : {pi / 6.0, pi / 3.0}) {
      const double expected = 2.0 * pi * (1.0 - std::cos(chi));
      REQUIRE_THAT(solid_angle(oracles::cap_loop(chi, 2000)),
                   WithinAbs(expected, 1e-4));
    }
  }

  SECTION("full great circle needs the area-vector apex fallback") {
    REQUIRE_THAT(solid_angle(oracles::cap_loop(0.5 * pi, 2000)),
                 WithinAbs(2.0 * pi, 1e-4));
  }

  SECTION("southern cap: fan answer differs by a full sphere, phase agrees") {
    const double chi = 2.0 * pi / 3.0;
    const double fan = solid_angle(oracles::cap_loop(chi, 2000));
    const double northern = 2.0 * pi * (1.0 - std::cos(chi));
    REQUIRE_THAT(fan, WithinAbs(northern - 4.0 * pi, 1e-4));
    REQUIRE_THAT(wrap_pi(0.5 * fan - 0.5 * northern), WithinAbs(0.0, 1e-4));
  }
}

TEST_CASE("solid angle rejects bad loops") {
  SECTION("open loop") {
    BlochLoop loop = oracles::cap_loop(pi / 3.0, 100);
    loop.points.back() = {0.0, 0.0, 1.0};
    REQUIRE_THROWS_AS(solid_angle(loop), std::invalid_argument);
  }

  SECTION("too few points") {
    BlochLoop loop;
    loop.points = {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
    REQUIRE_THROWS_AS(solid_angle(loop), std::invalid_argument);
  }

  SECTION("self-intersecting bowtie") {
    auto lift = [](double u, double v) -> std::array<double, 3> {
      const double n = std::sqrt(1.0 + 0.04 * (u * u + v * v));
      return {0.2 * u / n, 0.2 * v / n, 1.0 / n};
    };
    BlochLoop loop;
    loop.points = {lift(0, 0), lift(1, 0), lift(0, 1), lift(1, 1), lift(0, 0)};
    REQUIRE_THROWS_AS(solid_angle(loop), std::invalid_argument);
  }
}

TEST_CASE("extract_gate_unitary reproduces the ideal conditional gate") {
  const SpinSystem sys = SpinSystem::chloroform();
  const FrameSpec frame = FrameSpec::canonical(sys);
  for (double theta : {pi / 8.0, pi / 4.0, 0.7 * pi}) {
    const EventTimeline tl = resolve(parse(kProgram), {{"theta", theta}}, sys);
    SimOptions opts;
    opts.instantaneous_pulses = true;
    const cmat u = extract_gate_unitary(tl, sys, frame, opts);

    REQUIRE(max_abs(cmat(u - ideal_gate(2.0 * theta))) < 1e-12);
    REQUIRE(max_abs(cmat(u - oracles::propagator(tl, sys, frame, true))) <
            1e-12);

    // The up-block phase angle is 2 theta, wrapped.
    const double beta = std::atan2(u(0, 1).imag(), u(0, 0).real());
    REQUIRE_THAT(beta, WithinAbs(wrap_pi(2.0 * theta), 1e-9));
  }
}

TEST_CASE("extract_gate_unitary refuses non-unitary evolution") {
  const SpinSystem sys = SpinSystem::chloroform();
  const EventTimeline tl = resolve(parse(kProgram), {}, sys);
  SimOptions opts;
  opts.relaxation = true;
  REQUIRE_THROWS_AS(
      extract_gate_unitary(tl, sys, FrameSpec::canonical(sys), opts),
      std::invalid_argument);
}

TEST_CASE("ideal gate at beta = pi/2 is the conditional i sigma_x block") {
  const cmat u = ideal_gate(0.5 * pi);
  REQUIRE(std::abs(u(0, 0)) < 1e-15);
  REQUIRE_THAT(u(0, 1).imag(), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(u(1, 0).imag(), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(u(2, 2).real(), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(u(3, 3).real(), WithinAbs(1.0, 1e-15));
  REQUIRE(std::abs(u(2, 3)) < 1e-15);
  REQUIRE(unitarity_error(u) < 1e-15);
}

TEST_CASE("gate fidelity metric") {
  const cmat u = ideal_gate(0.3);
  REQUIRE_THAT(gate_fidelity(u, u), WithinAbs(1.0, 1e-14));
  REQUIRE_THAT(gate_fidelity(u, cmat(std::exp(complexd(0.0, 1.1)) * u)),
               WithinAbs(1.0, 1e-14));
  REQUIRE_THAT(gate_fidelity(ideal_gate(0.0), ideal_gate(pi)),
               WithinAbs(0.0, 1e-14));
  REQUIRE_THROWS_AS(gate_fidelity(u, cmat(2.0 * u)), std::invalid_argument);
  REQUIRE_THROWS_AS(gate_fidelity(u, cmat::Identity(2, 2)),
                    std::invalid_argument);
}

TEST_CASE("phase CSV writer emits the documented schema") {
  const SimResult res = run_gate(pi / 4.0);
  const PhaseReport report = phase_decomposition(res.trajectory, SpinState::up);
  std::ostringstream out;
  write_phase_csv_header(out);
  write_phase_csv_row(out, pi / 4.0, report, report.geometric);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  REQUIRE(header ==
          "theta,omega,total,dynamic,geometric,pancharatnam,solid_angle_half");
  REQUIRE(std::count(row.begin(), row.end(), ',') == 6);
}
