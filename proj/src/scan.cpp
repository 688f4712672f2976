#include "eimnet/scan.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace eimnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Port "voltages" (omega, u_d, u_q, v) and "currents" (p_sync, i_d, i_q, i_dc), canonical order.
std::array<double, 8> port_samples(const ConverterSignals& s) {
    return {s.omega, s.u_g.x(), s.u_g.y(), s.v_dc, s.p_sync, s.i_g.x(), s.i_g.y(), s.i_dc};
}

}  // namespace

SimModel single_converter_rig(const ConverterSpec& spec, const OperatingPoint& op, int pade_order) {
    SimAcBus ac;
    ac.name = "src_ac";
    ac.ideal = true;
    ac.u0 = op.u_g;
    SimDcBus dc;
    dc.name = "src_dc";
    dc.ideal = true;
    dc.v0 = op.v_dc;
    return SimModel({ac}, {dc}, {}, {SimConverter{spec, op, 0, 0}}, pade_order);
}

ScanPoint scan_eim_point(const ConverterSpec& spec, const OperatingPoint& op, double f, const ScanOptions& opts) {
    if (!(f > 0.0)) throw std::invalid_argument("scan frequency must be > 0");
    if (!(opts.amplitude > 0.0)) throw AmplitudeZero("injection amplitude must be > 0");

    const SimModel rig = single_converter_rig(spec, op, opts.pade_order);
    const Eigen::VectorXd x0 = rig.initial_state();
    const ConverterSignals eq = rig.signals(x0, rig.zero_inputs(), 0);
    const std::array<double, 8> eq_s = port_samples(eq);
    const PortBases bases = port_bases(spec);

    // Integer samples per injection period.
    const double period = 1.0 / f;
    const long per_period = std::max<long>(opts.min_samples_per_period, static_cast<long>(std::ceil(period / opts.max_dt)));
    const double dt = period / static_cast<double>(per_period);
    const long window_periods =
        std::max<long>(opts.window_periods, static_cast<long>(std::ceil(opts.window_min_seconds / period)));
    const long window = window_periods * per_period;
    const double settle = std::max(opts.settle_fundamental_periods * kTwoPi / spec.omega1,
                                   opts.settle_injection_periods * period);
    const long settle_steps = static_cast<long>(std::ceil(settle / period)) * per_period;

    ScanPoint pt;
    pt.freq_hz = f;
    pt.dt = dt;
    pt.window_samples = window;
    const double a_ac = opts.amplitude * bases.voltage(1);
    const double a_dc = opts.amplitude * bases.voltage(3);
    const double a_sync = opts.amplitude * bases.current(0);
    pt.amplitudes << a_ac, a_ac, a_dc, a_sync;

    const double w = kTwoPi * f;
    using T = Sinusoid::Target;
    const double ph = opts.phase;
    const std::array<Excitation, 4> experiments = {
        Excitation{{{T::ac_d, 0, a_ac, w, ph}, {T::ac_q, 0, a_ac, w, ph - 0.5 * std::numbers::pi}}},
        Excitation{{{T::ac_d, 0, a_ac, w, ph}, {T::ac_q, 0, a_ac, w, ph + 0.5 * std::numbers::pi}}},
        Excitation{{{T::dc, 0, a_dc, w, ph}}},
        Excitation{{{T::sync, 0, a_sync, w, ph}}},
    };

    CMatrix v(4, 4), i(4, 4);
    double window_start = 0.0;
    for (std::size_t e = 0; e < experiments.size(); ++e) {
        // Consecutive windows until the phasors settle.
        std::array<std::vector<double>, 8> buf;
        for (auto& b : buf) b.reserve(static_cast<std::size_t>(window));
        Eigen::Matrix<cplx, 8, 1> prev, cur;
        bool have_prev = false, converged = false;
        SimulateOptions so;
        so.dt = dt;
        so.t_end = static_cast<double>(settle_steps) * dt;
        Eigen::VectorXd x = simulate(rig, x0, experiments[e], so);
        long step = settle_steps;
        for (int k = 0; k < opts.max_windows && !converged; ++k) {
            for (auto& b : buf) b.clear();
            const double t0 = static_cast<double>(step) * dt;
            // simulate() restarts its clock at zero; shift the excitation phase instead
            Excitation shifted = experiments[e];
            for (auto& term : shifted.terms) term.phase += term.omega * t0;
            so.t_end = static_cast<double>(window) * dt;
            so.record_every = 1;
            // the window is [t0, t0 + window dt); the final sample starts the next one
            x = simulate(rig, x, shifted, so, [&](double, const Eigen::VectorXd& xs, const SimInputs& in) {
                if (buf[0].size() == static_cast<std::size_t>(window)) return;
                const auto s = port_samples(rig.signals(xs, in, 0));
                for (std::size_t c = 0; c < 8; ++c) buf[c].push_back(s[c] - eq_s[c]);
            });
            step += window;
            for (std::size_t c = 0; c < 8; ++c) cur(static_cast<Index>(c)) = single_bin_dft(buf[c], dt, f, t0);
            if (have_prev) {
                // Each channel against its own size: a weak response (omega at high f)
                // is where leakage from the start-up transient shows.
                std::array<double, 8> mag{};
                double largest = 0.0;
                for (Index c = 0; c < 8; ++c) {
                    const double base = c < 4 ? bases.voltage(c) : bases.current(c - 4);
                    mag[static_cast<std::size_t>(c)] = std::abs(cur(c)) / base;
                    largest = std::max(largest, mag[static_cast<std::size_t>(c)]);
                }
                converged = true;
                for (Index c = 0; c < 8; ++c) {
                    const double base = c < 4 ? bases.voltage(c) : bases.current(c - 4);
                    const double ref = std::max(mag[static_cast<std::size_t>(c)], 1e-6 * largest);
                    converged = converged && std::abs(cur(c) - prev(c)) / base <= opts.convergence_tol * ref;
                }
            }
            prev = cur;
            have_prev = true;
            window_start = t0;
        }
        for (Index c = 0; c < 4; ++c) {
            v(c, static_cast<Index>(e)) = cur(c);
            i(c, static_cast<Index>(e)) = cur(c + 4);
        }
    }
    pt.window_start = window_start;

    CMatrix v_pu = v;
    for (Index r = 0; r < 4; ++r) v_pu.row(r) /= bases.voltage(r);
    const Eigen::JacobiSVD<CMatrix> svd(v_pu);
    const double cond = svd.singularValues()(0) / svd.singularValues()(3);
    pt.condition = cond;
    if (!(cond < opts.condition_cap)) throw IllConditionedScan(f, cond);

    pt.y_dq = i * v.inverse();
    pt.y_seq = dq_to_modified_sequence(canonical_to_scan_order(pt.y_dq));
    return pt;
}

ScanResult scan_eim(const ConverterSpec& spec, const OperatingPoint& op, const std::vector<double>& f_grid,
                    const ScanOptions& opts) {
    if (f_grid.empty()) throw std::invalid_argument("scan_eim: empty frequency grid");
    ScanResult r;
    for (double f : f_grid) r.points.push_back(scan_eim_point(spec, op, f, opts));
    return r;
}

LinearRig linearize_rig(const ConverterSpec& spec, const OperatingPoint& op, int pade_order) {
    const SimModel rig = single_converter_rig(spec, op, pade_order);
    const Eigen::VectorXd x0 = rig.initial_state();
    const SimInputs in0 = rig.zero_inputs();
    const Index n = rig.size();

    LinearRig lr;
    lr.a = rhs_jacobian(rig, x0, in0);
    lr.b.resize(n, 4);
    lr.c.resize(5, n);
    lr.d.resize(5, 4);

    auto outputs = [&](const Eigen::VectorXd& x, const SimInputs& in) {
        const ConverterSignals s = rig.signals(x, in, 0);
        Eigen::VectorXd y(5);
        y << s.p_sync, s.i_g.x(), s.i_g.y(), s.i_dc, s.omega;
        return y;
    };
    const PortBases bases = port_bases(spec);
    const std::array<double, 4> steps = {1e-6 * bases.voltage(1), 1e-6 * bases.voltage(1), 1e-6 * bases.voltage(3),
                                         1e-6 * bases.current(0)};
    for (Index k = 0; k < 4; ++k) {
        SimInputs ip = in0, im = in0;
        const double h = steps[static_cast<std::size_t>(k)];
        switch (k) {
            case 0: ip.ac[0].x() += h; im.ac[0].x() -= h; break;
            case 1: ip.ac[0].y() += h; im.ac[0].y() -= h; break;
            case 2: ip.dc[0] += h; im.dc[0] -= h; break;
            default: ip.sync[0] += h; im.sync[0] -= h; break;
        }
        lr.b.col(k) = (rig.rhs(x0, ip) - rig.rhs(x0, im)) / (2.0 * h);
        lr.d.col(k) = (outputs(x0, ip) - outputs(x0, im)) / (2.0 * h);
    }
    Eigen::VectorXd xp = x0;
    for (Index j = 0; j < n; ++j) {
        const double h = std::max(1e-8, 1e-6 * std::abs(x0(j)));
        xp(j) = x0(j) + h;
        const Eigen::VectorXd yp = outputs(xp, in0);
        xp(j) = x0(j) - h;
        const Eigen::VectorXd ym = outputs(xp, in0);
        xp(j) = x0(j);
        lr.c.col(j) = (yp - ym) / (2.0 * h);
    }
    return lr;
}

CMatrix LinearRig::eim(cplx s) const {
    const Index n = a.rows();
    const CMatrix si_a = s * CMatrix::Identity(n, n) - a.cast<cplx>();
    const CMatrix g = c.cast<cplx>() * si_a.partialPivLu().solve(b.cast<cplx>()) + d.cast<cplx>();
    // Port voltages per unit input: (omega, u_d, u_q, v) against inputs (u_d, u_q, v, p_inj).
    CMatrix volt = CMatrix::Zero(4, 4);
    volt.row(0) = g.row(4);
    volt(1, 0) = 1.0;
    volt(2, 1) = 1.0;
    volt(3, 2) = 1.0;
    const CMatrix curr = g.topRows(4);
    return curr * volt.inverse();
}

double entry_relative_error(const CMatrix& measured, const CMatrix& analytic, const PortBases& bases, Index i, Index j,
                            double floor) {
    auto pu = [&](const CMatrix& m) {
        CMatrix out = m;
        for (Index r = 0; r < 4; ++r)
            for (Index c = 0; c < 4; ++c) out(r, c) *= bases.voltage(c) / bases.current(r);
        return out;
    };
    const CMatrix a = pu(analytic), m = pu(measured);
    const double ref = std::max(std::abs(a(i, j)), floor * a.cwiseAbs().maxCoeff());
    if (ref == 0.0) return std::abs(m(i, j)) == 0.0 ? 0.0 : INFINITY;
    return std::abs(m(i, j) - a(i, j)) / ref;
}

}  // namespace eimnet
