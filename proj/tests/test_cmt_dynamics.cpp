#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stoplight/cmt_dynamics.hpp"
#include "stoplight/errors.hpp"
#include "stoplight/lattice_bands.hpp"

using namespace stoplight;
using namespace stoplight::cmt;
using std::numbers::pi;

namespace {

LatticeSpec single_cell(double wa, double wb, double beta, double gamma = 0.0) {
    LatticeSpec lat;
    lat.n_cells = 1;
    lat.cell.omega_a = wa;
    lat.cell.alpha = 1.0;
    lat.cell.gamma_a = gamma;
    if (beta != 0.0) lat.cell.side_cavities = {{wb, beta, gamma}};
    return lat;
}

StateVector unit_a(const LatticeSpec& lat) {
    StateVector s(0.0, lat.n_cells, lat.classes());
    s.at(0, 0) = 1.0;
    return s;
}

// exp(i H t) x0 for H = [[wa, b], [b, wb]], written out in closed form.
std::array<cdouble, 2> two_level(double wa, double wb, double b, double t, std::array<cdouble, 2> x0) {
    const double m = 0.5 * (wa + wb), d = 0.5 * (wa - wb);
    const double w = std::sqrt(d * d + b * b);
    const cdouble I(0.0, 1.0);
    const cdouble c = std::cos(w * t), s = I * std::sin(w * t) / w;
    const cdouble ph = std::exp(I * m * t);
    return {ph * ((c + s * d) * x0[0] + s * b * x0[1]), ph * (s * b * x0[0] + (c - s * d) * x0[1])};
}

ProbeConfig quiet(double interval = 0.1) {
    ProbeConfig p;
    p.cells = {0};
    p.sample_interval = interval;
    return p;
}

}  // namespace

TEST_CASE("generator matrix small cases") {
    LatticeSpec lat;
    lat.n_cells = 2;
    lat.cell.omega_a = 0.7;
    lat.cell.alpha = 0.3;
    const auto g = Eigen::MatrixXcd(assemble_generator(lat, zero_detunings(lat.cell)));
    CHECK(g(0, 1) == cdouble(0.0, 0.3));
    CHECK(g(1, 0) == cdouble(0.0, 0.3));
    CHECK(g(0, 0) == cdouble(0.0, 0.7));
    CHECK(g(1, 1) == cdouble(0.0, 0.7));

    lat.cell.gamma_a = 0.01;
    lat.boundary = Boundary::absorbing_terminal(0.3);
    const auto ga = Eigen::MatrixXcd(assemble_generator(lat, zero_detunings(lat.cell)));
    CHECK(ga(1, 1).real() == doctest::Approx(-0.31));
    CHECK(ga(0, 0).real() == doctest::Approx(-0.01));
}

TEST_CASE("matrix-free generator equals the sparse matrix") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (auto kind : {BoundaryKind::closed, BoundaryKind::absorbing, BoundaryKind::periodic}) {
        for (std::size_t n : {1u, 2u, 3u, 17u}) {
            LatticeSpec lat;
            lat.n_cells = n;
            lat.cell.omega_a = 0.4;
            lat.cell.alpha = 0.9;
            lat.cell.gamma_a = 0.02;
            lat.cell.side_cavities = {{1.5, 0.6, 0.01}, {-0.3, 0.2, 0.03}};
            lat.boundary = kind == BoundaryKind::absorbing ? Boundary::absorbing_terminal(0.9)
                           : kind == BoundaryKind::periodic ? Boundary::periodic()
                                                            : Boundary::closed();
            const Detunings d{0.1, -0.2, 0.3};
            const auto mat = assemble_generator(lat, d, 0.25);
            const auto coeffs = generator_coefficients(lat, d, 0.25);
            Eigen::VectorXcd x(static_cast<Eigen::Index>(lat.state_size()));
            for (auto& v : x) v = cdouble(nd(rng), nd(rng));
            std::vector<cdouble> xs(x.data(), x.data() + x.size()), y1(xs.size()), y2(xs.size());
            kernels::apply_generator_serial(coeffs, xs, y1);
            kernels::apply_generator_parallel(coeffs, xs, y2);
            const Eigen::VectorXcd ref = mat * x;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                CHECK(std::abs(y1[i] - ref(i)) < 1e-13);
                CHECK(y1[i] == y2[i]);
            }
        }
    }
}

TEST_CASE("periodic generator acts as the Bloch matrix on plane waves") {
    LatticeSpec lat;
    lat.n_cells = 12;
    lat.boundary = Boundary::periodic();
    lat.cell.alpha = 0.8;
    lat.cell.side_cavities = {{0.5, 0.4, 0.0}};
    const Detunings d{0.0, 0.0};
    const auto mat = assemble_generator(lat, d);
    for (int q = 0; q < 12; ++q) {
        const double k = 2.0 * pi * q / 12.0;
        const auto h = bands::bloch_matrix(lat.cell, d, k);
        Eigen::VectorXcd x(24);
        const cdouble u0(0.3, 0.1), u1(-0.7, 0.2);
        for (int n = 0; n < 12; ++n) {
            const cdouble e = std::polar(1.0, k * n);
            x(2 * n) = e * u0;
            x(2 * n + 1) = e * u1;
        }
        const Eigen::VectorXcd y = mat * x;
        for (int n = 0; n < 12; ++n) {
            const cdouble e = std::polar(1.0, k * n);
            CHECK(std::abs(y(2 * n) - cdouble(0, 1) * e * (h(0, 0) * u0 + h(0, 1) * u1)) < 1e-13);
            CHECK(std::abs(y(2 * n + 1) - cdouble(0, 1) * e * (h(1, 0) * u0 + h(1, 1) * u1)) < 1e-13);
        }
    }
}

TEST_CASE("single-pole decay") {
    const auto lat = single_cell(0.3, 0.0, 0.0, 0.2);
    IntegrationOptions opt;
    opt.initial = unit_a(lat);
    const auto r = integrate_with_state(lat, schedule::ModulationSchedule(1), {}, 0.0, 5.0, quiet(), opt);
    const double got = std::norm(r.final_state.at(0, 0));
    const double t = r.final_state.t;
    CHECK(t == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(std::abs(got / std::exp(-2.0 * 0.2 * t) - 1.0) < 1e-8);
}

TEST_CASE("two-level transfer") {
    SUBCASE("resonant full transfer") {
        const double beta = 0.5;
        const auto lat = single_cell(1.0, 1.0, beta);
        IntegrationOptions opt;
        opt.initial = unit_a(lat);
        const double t_half = pi / (2.0 * beta);
        opt.dt = t_half / 4000.0;
        const auto r = integrate_with_state(lat, schedule::ModulationSchedule(2), {}, 0.0, t_half, quiet(), opt);
        CHECK(r.final_state.t == doctest::Approx(t_half).epsilon(1e-12));
        CHECK(std::abs(std::norm(r.final_state.at(0, 1)) - 1.0) < 1e-6);
        const auto ex = two_level(1.0, 1.0, beta, r.final_state.t, {1.0, 0.0});
        CHECK(std::abs(r.final_state.at(0, 1) - ex[1]) < 1e-8);
    }
    SUBCASE("detuned maximum") {
        const double beta = 0.5, delta = 1.3;
        const auto lat = single_cell(delta, 0.0, beta);
        IntegrationOptions opt;
        opt.initial = unit_a(lat);
        const double period = pi / std::sqrt(0.25 * delta * delta + beta * beta);
        opt.dt = period / 8000.0;
        const auto r = integrate_with_state(lat, schedule::ModulationSchedule(2), {}, 0.0, 0.5 * period,
                                            quiet(), opt);
        const double expected = 4.0 * beta * beta / (delta * delta + 4.0 * beta * beta);
        CHECK(std::abs(std::norm(r.final_state.at(0, 1)) - expected) < 1e-6);
    }
}

TEST_CASE("fourth-order convergence against the two-level solution") {
    const double beta = 1.0, delta = 0.7, t_end = 6.0;
    const auto lat = single_cell(delta, 0.0, beta);
    std::vector<double> errors;
    for (double dt : {0.08, 0.04, 0.02}) {
        IntegrationOptions opt;
        opt.initial = unit_a(lat);
        opt.dt = dt;
        opt.omega_ref = 0.0;
        const auto r = integrate_with_state(lat, schedule::ModulationSchedule(2), {}, 0.0, t_end, quiet(1.0), opt);
        REQUIRE(r.final_state.t == doctest::Approx(t_end).epsilon(1e-12));
        const auto ex = two_level(delta, 0.0, beta, t_end, {1.0, 0.0});
        errors.push_back(std::hypot(std::abs(r.final_state.at(0, 0) - ex[0]), std::abs(r.final_state.at(0, 1) - ex[1])));
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(16.0).epsilon(3.0 / 16.0));
    CHECK(errors[1] / errors[2] == doctest::Approx(16.0).epsilon(3.0 / 16.0));
}

TEST_CASE("rotating frame does not change lab-frame results") {
    LatticeSpec lat;
    lat.n_cells = 30;
    lat.cell.omega_a = 2.0;
    lat.cell.alpha = 1.0;
    lat.cell.side_cavities = {{-8.0, 1.0, 0.0}};
    lat.boundary = Boundary::absorbing_terminal(1.0);
    const auto sched = schedule::build_protocol_schedule(20.0, 5.0, 10.0, 5.0, 1.0, 20.0, true);
    const std::vector<PulseSource> src{{0, 2.0, 8.0, 3.0, {1.0, 0.0}}};
    IntegrationOptions a, b;
    a.dt = b.dt = 0.0015;
    a.omega_ref = 0.0;
    b.omega_ref = 2.0;
    const auto ra = integrate_with_state(lat, sched, src, 0.0, 60.0, quiet(), a);
    const auto rb = integrate_with_state(lat, sched, src, 0.0, 60.0, quiet(), b);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < ra.final_state.amplitudes.size(); ++i) {
        diff = std::max(diff, std::abs(ra.final_state.amplitudes[i] - rb.final_state.amplitudes[i]));
        scale = std::max(scale, std::abs(ra.final_state.amplitudes[i]));
    }
    CHECK(diff < 1e-6 * scale);
    const auto& ta = ra.trajectory;
    const auto& tb = rb.trajectory;
    for (std::size_t s = 0; s < ta.times.size(); ++s) CHECK(ta.probes[0][s] == doctest::Approx(tb.probes[0][s]).epsilon(1e-6));
}

TEST_CASE("periodic Bloch mode picks up a pure phase") {
    LatticeSpec lat;
    lat.n_cells = 16;
    lat.boundary = Boundary::periodic();
    lat.cell.alpha = 1.0;
    lat.cell.side_cavities = {{-3.0, 1.0, 0.0}};
    const Detunings d{0.0, 0.0};
    const double k = 2.0 * pi * 3.0 / 16.0;
    const auto pair = bands::dispersion_closed_form(lat.cell, d, k);
    const double w = pair.lower.real();
    // Eigenvector of [[2cos k, beta],[beta, wb]] for w.
    const double u0 = 1.0, u1 = 1.0 * 1.0 / (w + 3.0);
    StateVector init(0.0, 16, 2);
    for (std::size_t n = 0; n < 16; ++n) {
        const cdouble e = std::polar(1.0, k * static_cast<double>(n));
        init.at(n, 0) = e * u0;
        init.at(n, 1) = e * u1;
    }
    IntegrationOptions opt;
    opt.initial = init;
    opt.omega_ref = w;
    const auto r = integrate_with_state(lat, schedule::ModulationSchedule(2), {}, 0.0, 40.0, quiet(), opt);
    const cdouble phase = std::polar(1.0, w * r.final_state.t);
    for (std::size_t i = 0; i < init.amplitudes.size(); ++i)
        CHECK(std::abs(r.final_state.amplitudes[i] - phase * init.amplitudes[i]) < 1e-9);
}

TEST_CASE("lossless norm and k-block conservation over a protocol") {
    LatticeSpec lat;
    lat.n_cells = 24;
    lat.boundary = Boundary::periodic();
    lat.cell.alpha = 1.0;
    lat.cell.side_cavities = {{10.0, 1.0, 0.0}};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    StateVector init(0.0, 24, 2);
    for (auto& v : init.amplitudes) v = cdouble(nd(rng), nd(rng));
    const auto sched = schedule::build_protocol_schedule(20.0, 10.0, 30.0, 10.0, 3.0, 20.0, true);
    IntegrationOptions opt;
    opt.initial = init;
    // Every mode is occupied, up to |omega| = 20; RK4 norm drift per step goes as (omega dt)^6.
    opt.dt = 2.5e-4;
    const auto r = integrate_with_state(lat, sched, {}, 0.0, 120.0, quiet(), opt);
    const double n0 = init.norm();
    for (double n : r.trajectory.norm) CHECK(std::abs(n / n0 - 1.0) < 1e-8);
    auto block = [&](const StateVector& s, int q) {
        cdouble a = 0.0, b = 0.0;
        for (std::size_t n = 0; n < 24; ++n) {
            const cdouble e = std::polar(1.0, -2.0 * pi * q * static_cast<double>(n) / 24.0);
            a += e * s.at(n, 0);
            b += e * s.at(n, 1);
        }
        return std::norm(a) + std::norm(b);
    };
    for (int q = 0; q < 24; ++q) CHECK(std::abs(block(r.final_state, q) - block(init, q)) < 1e-8 * n0 * 24.0);
}

TEST_CASE("absorbing termination reflects less than one percent") {
    LatticeSpec lat;
    lat.n_cells = 100;
    lat.cell.alpha = 1.0;
    lat.boundary = Boundary::absorbing_terminal(1.0);
    const std::vector<PulseSource> src{{0, 0.0, 40.0, 5.0, {1.0, 0.0}}};
    ProbeConfig p = quiet();
    p.snapshot_times = {65.0, 170.0};
    const auto r = integrate_with_state(lat, schedule::ModulationSchedule(1), src, 0.0, 170.0, p);
    const double inside = r.trajectory.snapshots[0].norm();
    const double left = r.trajectory.snapshots[1].norm();
    CHECK(left / inside < 0.01);
}

TEST_CASE("serial and parallel integration are bit-identical") {
    LatticeSpec lat;
    lat.n_cells = 50;
    lat.cell.alpha = 1.0;
    lat.cell.gamma_a = 0.01;
    lat.cell.side_cavities = {{-10.0, 1.0, 0.01}};
    lat.boundary = Boundary::absorbing_terminal(1.0);
    const auto sched = schedule::build_protocol_schedule(20.0, 10.0, 20.0, 10.0, 2.0, 20.0, true);
    const std::vector<PulseSource> src{{0, 0.5, 10.0, 3.0, {1.0, 0.0}}};
    IntegrationOptions s, p;
    s.execution = Execution::serial;
    p.execution = Execution::parallel;
    const auto a = integrate_with_state(lat, sched, src, 0.0, 80.0, quiet(), s);
    const auto b = integrate_with_state(lat, sched, src, 0.0, 80.0, quiet(), p);
    CHECK(a.final_state.amplitudes == b.final_state.amplitudes);
    CHECK(a.trajectory.probes == b.trajectory.probes);
}

TEST_CASE("integration validation") {
    const auto lat = single_cell(0.0, 0.0, 1.0);
    const schedule::ModulationSchedule flat(2);
    IntegrationOptions opt;
    opt.dt = 1.0;
    CHECK_THROWS_AS(integrate(lat, flat, {}, 0.0, 10.0, quiet(), opt), ValidationError);
    CHECK_THROWS_AS(integrate(lat, flat, {}, 1.0, 1.0, quiet()), ValidationError);
    CHECK_THROWS_AS(integrate(lat, schedule::ModulationSchedule(3), {}, 0.0, 1.0, quiet()), ValidationError);
    const std::vector<PulseSource> bad{{4, 0.0, 1.0, 1.0, {1.0, 0.0}}};
    CHECK_THROWS_AS(integrate(lat, flat, bad, 0.0, 1.0, quiet()), ValidationError);
    ProbeConfig p = quiet();
    p.snapshot_times = {50.0};
    CHECK_THROWS_AS(integrate(lat, flat, {}, 0.0, 1.0, p), ValidationError);
    LatticeSpec broken = lat;
    broken.cell.side_cavities[0].beta = 0.0;
    CHECK_THROWS_AS(integrate(broken, flat, {}, 0.0, 1.0, quiet()), ValidationError);

    CHECK(max_stable_dt(lat, flat, {}, 0.0) == doctest::Approx(kStabilityNumber / 1.0));
    CHECK(default_dt(lat, flat, {}, 0.0) == doctest::Approx(kDefaultStepNumber / 1.0));
}

TEST_CASE("snapshots are lab frame and sorted") {
    const auto lat = single_cell(0.0, 0.0, 0.0);
    IntegrationOptions opt;
    opt.initial = unit_a(lat);
    opt.omega_ref = 5.0;
    opt.dt = 0.001;
    ProbeConfig p = quiet();
    p.snapshot_times = {0.9, 0.3};
    const auto r = integrate_with_state(lat, schedule::ModulationSchedule(1), {}, 0.0, 1.0, p, opt);
    REQUIRE(r.trajectory.snapshots.size() == 2);
    CHECK(r.trajectory.snapshots[0].t == doctest::Approx(0.3));
    // omega_A = 0: the lab-frame amplitude stays 1.
    for (const auto& s : r.trajectory.snapshots) CHECK(std::abs(s.at(0, 0) - 1.0) < 1e-9);
}

TEST_CASE("two-cavity beat") {
    LatticeSpec lat;
    lat.n_cells = 2;
    lat.cell.alpha = 0.5;
    IntegrationOptions opt;
    opt.initial = unit_a(lat);
    opt.dt = 0.001;
    ProbeConfig p;
    p.cells = {0, 1};
    p.sample_interval = 0.05;
    const auto r = integrate(lat, schedule::ModulationSchedule(1), {}, 0.0, 10.0, p, opt);
    for (std::size_t s = 0; s < r.times.size(); ++s) {
        const double sn = std::sin(0.5 * r.times[s]);
        CHECK(r.probes[1][s] == doctest::Approx(sn * sn).epsilon(1e-9));
    }
}

TEST_CASE("reference transit") {
    LatticeSpec lat;
    lat.n_cells = 100;
    lat.cell.alpha = 1.0;
    lat.cell.side_cavities = {{10.0, 1.0, 0.0}};
    lat.boundary = Boundary::absorbing_terminal(1.0);
    const std::vector<PulseSource> src{{0, 0.0, 40.0, 5.0, {1.0, 0.0}}};
    ProbeConfig p;
    p.sample_interval = 0.1;
    // Far-detuned side cavities (Delta = -10 beta); drive at the lower band centre.
    const auto pair = bands::dispersion_closed_form(lat.cell, {0.0, 0.0}, pi / 2);
    const std::vector<PulseSource> tuned{{0, pair.lower.real(), 40.0, 5.0, {1.0, 0.0}}};
    const auto r = reference_transit(lat, tuned, 0.0, 160.0, p);
    CHECK_FALSE(r.reparked);
    CHECK(r.t_pass_analytic == 50.0);
    CHECK(std::abs(r.t_pass / 50.0 - 1.0) < 0.05);

    LatticeSpec near = lat;
    near.cell.side_cavities[0].omega_b = 0.5;
    const auto rp = reference_transit(near, src, 0.0, 160.0, p);
    CHECK(rp.reparked);

    const std::vector<PulseSource> silent{{0, 0.0, 40.0, 5.0, {0.0, 0.0}}};
    CHECK_THROWS_AS(reference_transit(lat, silent, 0.0, 160.0, p), RuntimeFailure);
}

TEST_CASE("peak time") {
    std::vector<double> t, v;
    for (int i = 0; i < 50; ++i) {
        t.push_back(i * 0.5);
        v.push_back(std::exp(-std::pow(i * 0.5 - 10.2, 2)));
    }
    CHECK(peak_time(t, v).value() == doctest::Approx(10.2).epsilon(2e-3));
    std::vector<double> rising(t.begin(), t.end());
    CHECK_FALSE(peak_time(t, rising).has_value());
    CHECK_FALSE(peak_time(t, std::vector<double>(50, 0.0)).has_value());
}
