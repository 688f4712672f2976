#include "eimnet/oracle.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace eimnet {

std::string to_string(SimVerdict v) {
    switch (v) {
        case SimVerdict::settled: return "settled";
        case SimVerdict::growing: return "growing";
        case SimVerdict::blowup: return "blowup";
        default: return "inconclusive";
    }
}

bool OracleResult::verdicts_agree() const {
    if (sim.verdict == SimVerdict::inconclusive) return false;
    return ein_unstable() == ss_unstable() && ss_unstable() == sim.unstable();
}

ModeSearchOptions mode_search_options(const SystemConfig& cfg) {
    ModeSearchOptions o;
    o.f_min_hz = cfg.analysis.f_min_hz;
    o.f_max_hz = cfg.analysis.f_max_hz;
    o.grid_points = cfg.analysis.grid_points;
    o.capture_radius = cfg.analysis.capture_radius;
    o.newton_tolerance = cfg.analysis.newton_tolerance;
    o.max_iterations = cfg.analysis.max_iterations;
    o.eval.condition_cap = cfg.analysis.condition_cap;
    return o;
}

namespace {

// Least-squares growth rate of the chunk peaks, divided out of the samples.
void remove_envelope(std::vector<double>& x, double dt) {
    const std::size_t chunks = 6, len = x.size() / chunks;
    if (len < 2) return;
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        double m = 0.0;
        for (std::size_t i = c * len; i < (c + 1) * len; ++i) m = std::max(m, std::abs(x[i]));
        if (!(m > 0.0)) return;
        const double t = (static_cast<double>(c) + 0.5) * static_cast<double>(len) * dt, l = std::log(m);
        st += t;
        sl += l;
        stt += t * t;
        stl += t * l;
    }
    const double n = static_cast<double>(chunks);
    const double alpha = (n * stl - st * sl) / (n * stt - st * st);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::exp(-alpha * static_cast<double>(i) * dt);
}

}  // namespace

SimOutcome run_kicked_simulation(const SimModel& model, const SystemConfig& cfg, const OracleOptions& opts) {
    const auto& sc = cfg.simulation;
    const Eigen::VectorXd x_eq = model.initial_state();
    const SimInputs zero = model.zero_inputs();
    const std::size_t nc = model.converters().size();

    std::vector<ConverterSignals> eq(nc);
    for (std::size_t k = 0; k < nc; ++k) eq[k] = model.signals(x_eq, zero, k);

    Eigen::VectorXd x0 = x_eq;
    Eigen::VectorXd bounds = Eigen::VectorXd::Constant(model.size(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < nc; ++k) {
        const Index th = model.converter_offset(k) + 2;
        x0(th) += sc.kick;
        bounds(th) = 0.5 * std::numbers::pi;
    }
    const auto& names = model.state_names();
    for (Index j = 0; j < model.size(); ++j)
        if (names[static_cast<std::size_t>(j)].rfind("dc", 0) == 0 && names[static_cast<std::size_t>(j)].ends_with(".v"))
            x0(j) *= 1.0 + sc.kick;

    // Per-unit probes: i_d, i_q, v_dc and omega of each converter.
    std::vector<std::string> probe_names;
    std::vector<double> probe_base;
    for (std::size_t k = 0; k < nc; ++k) {
        const auto& spec = model.converters()[k].spec;
        const std::string& n = spec.name;
        probe_names.insert(probe_names.end(), {n + ".i_d", n + ".i_q", n + ".v_dc", n + ".omega"});
        probe_base.insert(probe_base.end(), {spec.base.i_ac(), spec.base.i_ac(), spec.base.v_dc, spec.omega1});
    }
    std::vector<std::vector<double>> rec(probe_names.size());
    std::vector<double> t_rec;

    SimulateOptions so;
    so.dt = sc.dt;
    so.t_end = sc.t_end;
    so.record_every = std::max(1, static_cast<int>(std::lround(opts.record_dt / sc.dt)));
    so.bounds = bounds;
    const double rdt = so.dt * so.record_every;

    SimOutcome out;
    out.end_time = sc.t_end;
    bool blew = false;
    try {
        simulate(model, x0, Excitation{}, so, [&](double t, const Eigen::VectorXd& x, const SimInputs& in) {
            t_rec.push_back(t);
            for (std::size_t k = 0; k < nc; ++k) {
                const ConverterSignals s = model.signals(x, in, k);
                const double d[4] = {s.i_g.x() - eq[k].i_g.x(), s.i_g.y() - eq[k].i_g.y(), s.v_dc - eq[k].v_dc,
                                     s.omega - eq[k].omega};
                for (std::size_t c = 0; c < 4; ++c) rec[4 * k + c].push_back(d[c] / probe_base[4 * k + c]);
            }
        });
    } catch (const NumericalBlowup& e) {
        blew = true;
        out.end_time = e.time;
    }

    auto window_peak = [&](double a, double b) {
        double m = 0.0;
        for (std::size_t i = 0; i < t_rec.size(); ++i)
            if (t_rec[i] >= a && t_rec[i] < b)
                for (const auto& r : rec) m = std::max(m, std::abs(r[i]));
        return m;
    };
    const double t_last = t_rec.empty() ? 0.0 : t_rec.back();
    const double early = window_peak(opts.early_start, opts.early_start + opts.window);
    const double late = window_peak(t_last - opts.window, t_last + rdt);
    out.growth = early > 0.0 ? late / early : 0.0;
    if (blew)
        out.verdict = SimVerdict::blowup;
    else if (out.growth > opts.growth_unstable)
        out.verdict = SimVerdict::growing;
    else if (out.growth < opts.growth_stable)
        out.verdict = SimVerdict::settled;
    else
        out.verdict = SimVerdict::inconclusive;

    // Spectrum of the probe with the largest late activity, after the kick transient.
    // A run that blew up early is short; start right after the fast transient and
    // take the exponential envelope out before the transform.
    const double t_spec = blew ? std::min(opts.early_start, 0.1) : opts.early_start;
    std::size_t begin = 0;
    while (begin < t_rec.size() && t_rec[begin] < t_spec) ++begin;
    if (t_rec.size() - begin >= 16) {
        std::size_t best = 0;
        double best_amp = -1.0;
        const std::size_t tail = begin + (t_rec.size() - begin) / 2;
        for (std::size_t p = 0; p < rec.size(); ++p) {
            double m = 0.0;
            for (std::size_t i = tail; i < t_rec.size(); ++i) m = std::max(m, std::abs(rec[p][i]));
            if (m > best_amp) {
                best_amp = m;
                best = p;
            }
        }
        if (best_amp > 0.0) {
            std::vector<double> seg(rec[best].begin() + static_cast<std::ptrdiff_t>(begin), rec[best].end());
            if (blew) remove_envelope(seg, rdt);
            out.peak_hz = dft_peak_frequency(seg, rdt, opts.f_lo_hz, std::min(opts.f_hi_hz, 0.45 / rdt));
            out.peak_probe = probe_names[best];
        }
    }
    return out;
}

OracleResult run_oracle(const BuiltCase& bc, const OracleOptions& opts) {
    OracleResult r;
    r.ein = find_modes(loop_gain(bc.ein), mode_search_options(bc.config));
    if (!r.ein.modes.empty()) r.ein_mode = r.ein.modes.front();

    const SimModel model = build_sim(bc.config, bc.op);
    r.ss = linearize_ss(model, model.initial_state());
    r.ss_rightmost = r.ss.eigenvalues(0);
    if (r.ein_mode) {
        double best = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < r.ss.eigenvalues.size(); ++k) {
            const cplx e = r.ss.eigenvalues(k);
            if (e.imag() <= 0.0) continue;
            const double d = std::abs(e - r.ein_mode->s);
            if (d < best) {
                best = d;
                r.ss_match = e;
            }
        }
    }
    r.sim = run_kicked_simulation(model, bc.config, opts);
    return r;
}

}  // namespace eimnet
