#include "eimnet/case_builder.hpp"
#include "eimnet/errors.hpp"
#include "eimnet/oracle.hpp"
#include "eimnet/simulate.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <numbers>

using namespace eimnet;
using namespace testutil;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Index state_index(const SimModel& m, const std::string& name) {
    const auto& n = m.state_names();
    const auto it = std::find(n.begin(), n.end(), name);
    REQUIRE(it != n.end());
    return it - n.begin();
}

SimDcBus ideal_dc(const std::string& name, double v) {
    SimDcBus b;
    b.name = name;
    b.ideal = true;
    b.v0 = v;
    return b;
}

std::vector<double> tone(double a, double f, double phase, double dt, std::size_t n, double t0 = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = a * std::cos(kTwoPi * f * (t0 + static_cast<double>(k) * dt) + phase);
    return x;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("RL line step response") {
    const double r = 2.0, l = 0.05, step = 10.0;
    const SimModel m({}, {ideal_dc("a", 1000.0), ideal_dc("b", 1000.0)}, {{"ln", 0, 1, r, l}}, {});
    REQUIRE(m.size() == 1);
    const Index ii = state_index(m, "ln.i");
    Excitation e{{{Sinusoid::Target::dc, 0, step, 0.0, 0.0}}};
    SimulateOptions so;
    so.dt = 1e-5;
    so.t_end = 0.1;
    so.record_every = 100;
    double worst = 0.0;
    simulate(m, m.initial_state(), e, so, [&](double t, const Eigen::VectorXd& x, const SimInputs&) {
        const double exact = step / r * (1.0 - std::exp(-t * r / l));
        worst = std::max(worst, std::abs(x(ii) - exact));
    });
    CHECK(worst < 1e-6 * step / r);
}

TEST_CASE("no injection stays at equilibrium") {
    const BuiltCase bc = build_case(load_config(EIMNET_TESTCASE));
    const SimModel m = build_sim(bc.config, bc.op);
    const Eigen::VectorXd x0 = solve_equilibrium(m, m.initial_state());
    SimulateOptions so;
    so.dt = 2e-5;
    so.t_end = 0.2;
    const Eigen::VectorXd x1 = simulate(m, x0, Excitation{}, so);
    CHECK((x1 - x0).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + x0.cwiseAbs().maxCoeff()));
}

TEST_CASE("single-bin DFT amplitude and phase") {
    const double f = 50.0, dt = 1e-4;
    const auto x = tone(3.0, f, 0.7, dt, 2000, 0.013);
    const cplx p = single_bin_dft(x, dt, f, 0.013);
    CHECK(std::abs(p - std::polar(3.0, 0.7)) < 1e-12);
    CHECK(std::abs(single_bin_dft(x, dt, 2.0 * f, 0.013)) < 1e-10 * 3.0);
    CHECK(std::abs(single_bin_dft(x, dt, 3.0 * f, 0.013)) < 1e-10 * 3.0);
}

TEST_CASE("DFT peak frequency") {
    const double dt = 2e-4;
    auto x = tone(1.0, 37.3, 0.2, dt, 50000);
    const auto hum = tone(0.1, 120.0, 0.0, dt, 50000);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += hum[k] + 5.0;
    CHECK(std::abs(dft_peak_frequency(x, dt, 1.0, 500.0) - 37.3) < 0.05);
    CHECK(std::abs(dft_peak_frequency(x, dt, 60.0, 500.0) - 120.0) < 0.05);
}

TEST_CASE("linearised RLC poles") {
    const double r = 3.0, l = 0.02, c = 1e-4;
    SimDcBus cap;
    cap.name = "cap";
    cap.c = c;
    cap.v0 = 500.0;
    const SimModel m({}, {ideal_dc("src", 500.0), cap}, {{"ln", 0, 1, r, l}}, {});
    const LinearizedModel lin = linearize_ss(m, m.initial_state());
    REQUIRE(lin.eigenvalues.size() == 2);
    // s^2 + (R/L) s + 1/(LC) = 0
    const double wn2 = 1.0 / (l * c), a = r / l;
    const cplx root(-a / 2.0, std::sqrt(wn2 - a * a / 4.0));
    for (Index k = 0; k < 2; ++k) {
        const cplx e = lin.eigenvalues(k);
        CHECK(std::min(std::abs(e - root), std::abs(e - std::conj(root))) < 1e-6 * std::abs(root));
    }
}

TEST_CASE("equilibrium solve and baseline eigenvalues") {
    const BuiltCase bc = build_case(load_config(EIMNET_TESTCASE));
    const SimModel m = build_sim(bc.config, bc.op);
    const Eigen::VectorXd x0 = m.initial_state();
    const Eigen::VectorXd xe = solve_equilibrium(m, x0);
    for (Index k = 0; k < x0.size(); ++k) CHECK(std::abs(xe(k) - x0(k)) < 1e-6 * (1.0 + std::abs(x0(k))));
    const LinearizedModel lin = linearize_ss(m, xe);
    CHECK(lin.eigenvalues.real().maxCoeff() < 0.0);
    for (Index k = 1; k < lin.eigenvalues.size(); ++k)
        CHECK(lin.eigenvalues(k - 1).real() >= lin.eigenvalues(k).real());
}

TEST_CASE("Case I has one unstable pair at the network mode") {
    const BuiltCase bc = build_case(load_config(EIMNET_TESTCASE, "case1"));
    const SimModel m = build_sim(bc.config, bc.op);
    const LinearizedModel lin = linearize_ss(m, solve_equilibrium(m, m.initial_state()));
    std::vector<cplx> rhp;
    for (Index k = 0; k < lin.eigenvalues.size(); ++k)
        if (lin.eigenvalues(k).real() > 0.0) rhp.push_back(lin.eigenvalues(k));
    REQUIRE(rhp.size() == 2);
    CHECK(std::abs(rhp[0] - std::conj(rhp[1])) < 1e-6 * std::abs(rhp[0]));
    const ModeSearchResult res = find_modes(loop_gain(bc.ein), mode_search_options(bc.config));
    REQUIRE(res.captured());
    const cplx s = res.modes.front().s;
    const cplx upper = rhp[0].imag() > 0.0 ? rhp[0] : rhp[1];
    CHECK(std::abs(upper.imag() - s.imag()) < 0.01 * s.imag());
}

TEST_CASE("Pade realisation") {
    const double t = 3e-4;
    const PadeRealization p = pade_delay(t, 2);
    REQUIRE(p.order() == 2);
    for (double w : {10.0, 300.0, 3000.0}) {
        const cplx s(0.0, w);
        const CMatrix si_a = s * CMatrix::Identity(2, 2) - p.a.cast<cplx>();
        const cplx h = (p.c.cast<cplx>() * si_a.inverse() * p.b.cast<cplx>())(0, 0) + p.d;
        const cplx st = s * t;
        const cplx expect = (1.0 - st / 2.0 + st * st / 12.0) / (1.0 + st / 2.0 + st * st / 12.0);
        CHECK(std::abs(h - expect) < 1e-12);
        CHECK(std::abs(std::abs(h) - 1.0) < 1e-12);
        if (w * t < 0.01) CHECK(std::abs(std::arg(h) + w * t) < 1e-9);
    }
    CHECK(pade_delay(0.0, 3).order() == 0);
    CHECK(pade_delay(t, 0).order() == 0);
}

TEST_CASE("blowup is detected") {
    const double r = 2.0, l = 0.05;
    const SimModel m({}, {ideal_dc("a", 1000.0), ideal_dc("b", 1000.0)}, {{"ln", 0, 1, r, l}}, {});
    SimulateOptions so;
    so.dt = 1e-5;
    so.t_end = 0.1;
    so.bounds = Eigen::VectorXd::Constant(1, 1.0);
    Excitation e{{{Sinusoid::Target::dc, 0, 10.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(simulate(m, m.initial_state(), e, so), NumericalBlowup);
}

}
