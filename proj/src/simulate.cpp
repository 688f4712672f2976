#include "eimnet/simulate.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eimnet {

void Excitation::fill(double t, SimInputs& in) const {
    for (auto& v : in.ac) v.setZero();
    std::fill(in.dc.begin(), in.dc.end(), 0.0);
    std::fill(in.sync.begin(), in.sync.end(), 0.0);
    for (const auto& s : terms) {
        const double v = s.amplitude * std::cos(s.omega * t + s.phase);
        const auto i = static_cast<std::size_t>(s.index);
        switch (s.target) {
            case Sinusoid::Target::ac_d: in.ac.at(i).x() += v; break;
            case Sinusoid::Target::ac_q: in.ac.at(i).y() += v; break;
            case Sinusoid::Target::dc: in.dc.at(i) += v; break;
            case Sinusoid::Target::sync: in.sync.at(i) += v; break;
        }
    }
}

namespace {

void check(const Eigen::VectorXd& x, const Eigen::VectorXd& x0, const Eigen::VectorXd& bounds, double t) {
    for (Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x(i))) throw NumericalBlowup(t, static_cast<int>(i));
        if (bounds.size() && std::abs(x(i) - x0(i)) > bounds(i)) throw NumericalBlowup(t, static_cast<int>(i));
    }
}

}  // namespace

Eigen::VectorXd simulate(const SimModel& model, const Eigen::VectorXd& x0, const Excitation& exc,
                         const SimulateOptions& opts, const Observer& observe) {
    if (x0.size() != model.size()) throw DimensionMismatch("initial state has the wrong length");
    if (!(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.record_every < 1)
        throw std::invalid_argument("simulate: need dt > 0, t_end >= 0, record_every >= 1");
    if (opts.bounds.size() && opts.bounds.size() != model.size()) throw DimensionMismatch("bounds have the wrong length");

    const auto steps = static_cast<long>(std::llround(opts.t_end / opts.dt));
    const double h = opts.dt;
    SimInputs in0 = model.zero_inputs(), in1 = in0, in2 = in0;
    Eigen::VectorXd x = x0, k1, k2, k3, k4, tmp;

    exc.fill(0.0, in0);
    if (observe) observe(0.0, x, in0);
    for (long n = 0; n < steps; ++n) {
        const double t = n * h;
        // in0 holds the inputs at t from the previous step
        exc.fill(t + 0.5 * h, in1);
        exc.fill(t + h, in2);
        model.rhs(x, in0, k1);
        tmp = x + 0.5 * h * k1;
        model.rhs(tmp, in1, k2);
        tmp = x + 0.5 * h * k2;
        model.rhs(tmp, in1, k3);
        tmp = x + h * k3;
        model.rhs(tmp, in2, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        std::swap(in0, in2);
        check(x, x0, opts.bounds, t + h);
        if (observe && (n + 1) % opts.record_every == 0) observe((n + 1) * h, x, in0);
    }
    return x;
}

Trajectory simulate_trajectory(const SimModel& model, const Eigen::VectorXd& x0, const Excitation& exc,
                               const SimulateOptions& opts) {
    std::vector<double> ts;
    std::vector<Eigen::VectorXd> xs;
    simulate(model, x0, exc, opts, [&](double t, const Eigen::VectorXd& x, const SimInputs&) {
        ts.push_back(t);
        xs.push_back(x);
    });
    Trajectory tr;
    tr.t = std::move(ts);
    tr.x.resize(static_cast<Index>(xs.size()), model.size());
    for (std::size_t i = 0; i < xs.size(); ++i) tr.x.row(static_cast<Index>(i)) = xs[i].transpose();
    return tr;
}

cplx single_bin_dft(const std::vector<double>& samples, double dt, double freq_hz, double t0) {
    if (samples.empty()) throw std::invalid_argument("single_bin_dft: no samples");
    const double w = 2.0 * std::numbers::pi * freq_hz;
    // Rotating phasor updated by multiplication; renormalised to stop drift.
    const cplx step = std::polar(1.0, -w * dt);
    cplx rot = std::polar(1.0, -w * t0);
    cplx acc = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        acc += samples[k] * rot;
        rot *= step;
        if ((k & 1023) == 1023) rot /= std::abs(rot);
    }
    return 2.0 * acc / static_cast<double>(samples.size());
}

double dft_peak_frequency(const std::vector<double>& samples, double dt, double f_lo, double f_hi) {
    const std::size_t n = samples.size();
    if (n < 8) throw std::invalid_argument("dft_peak_frequency: too few samples");
    if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw std::invalid_argument("dft_peak_frequency: bad band");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = (samples[k] - mean) * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / static_cast<double>(n - 1)));
    auto mag = [&](double f) { return std::abs(single_bin_dft(w, dt, f)); };

    const double span = dt * static_cast<double>(n);
    const double df = 0.25 / span;
    double best_f = f_lo, best = -1.0;
    for (double f = f_lo; f <= f_hi; f += df) {
        const double m = mag(f);
        if (m > best) {
            best = m;
            best_f = f;
        }
    }
    // golden-section refinement inside one coarse step either side
    double a = std::max(f_lo, best_f - df), b = std::min(f_hi, best_f + df);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double mc = mag(c), md = mag(d);
    for (int it = 0; it < 60 && b - a > 1e-9 * best_f; ++it) {
        if (mc > md) {
            b = d;
            d = c;
            md = mc;
            c = b - g * (b - a);
            mc = mag(c);
        } else {
            a = c;
            c = d;
            mc = md;
            d = a + g * (b - a);
            md = mag(d);
        }
    }
    return 0.5 * (a + b);
}

Eigen::MatrixXd rhs_jacobian(const SimModel& model, const Eigen::VectorXd& x, const SimInputs& in) {
    const Index n = model.size();
    Eigen::MatrixXd jac(n, n);
    Eigen::VectorXd xp = x, fp, fm;
    for (Index i = 0; i < n; ++i) {
        const double h = std::max(1e-8, 1e-6 * std::abs(x(i)));
        xp(i) = x(i) + h;
        model.rhs(xp, in, fp);
        xp(i) = x(i) - h;
        model.rhs(xp, in, fm);
        xp(i) = x(i);
        jac.col(i) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

Eigen::VectorXd solve_equilibrium(const SimModel& model, const Eigen::VectorXd& x0, double tolerance,
                                  int max_iterations) {
    const SimInputs in = model.zero_inputs();
    // Residual scaled per state so currents, voltages and angles weigh alike.
    Eigen::VectorXd scale = x0.cwiseAbs().cwiseMax(1.0);
    auto resid = [&](const Eigen::VectorXd& x) { return model.rhs(x, in).cwiseQuotient(scale).norm(); };

    Eigen::VectorXd x = x0;
    double r = resid(x);
    int it = 0;
    for (; it < max_iterations && r > tolerance; ++it) {
        const Eigen::MatrixXd jac = rhs_jacobian(model, x, in);
        const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-model.rhs(x, in));
        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30 && !accepted; ++k, lambda *= 0.5) {
            const Eigen::VectorXd trial = x + lambda * step;
            const double rt = resid(trial);
            if (rt < r) {
                x = trial;
                r = rt;
                accepted = true;
            }
        }
        if (!accepted) break;
    }
    if (r > tolerance) throw NoConvergence(it, r);
    return x;
}

LinearizedModel linearize_ss(const SimModel& model, const Eigen::VectorXd& x_eq) {
    LinearizedModel out;
    out.a = rhs_jacobian(model, x_eq, model.zero_inputs());
    Eigen::EigenSolver<Eigen::MatrixXd> es(out.a, false);
    if (es.info() != Eigen::Success) throw NoConvergence(0, INFINITY);
    out.eigenvalues = es.eigenvalues();
    std::vector<cplx> v(out.eigenvalues.data(), out.eigenvalues.data() + out.eigenvalues.size());
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    for (std::size_t i = 0; i < v.size(); ++i) out.eigenvalues(static_cast<Index>(i)) = v[i];
    return out;
}

}  // namespace eimnet
