#pragma once

// Fixed-step RK4 integration of a SimModel, single-bin DFT and a peak finder.

#include "eimnet/sim_model.hpp"

#include <functional>
#include <vector>

namespace eimnet {

/// A cosine added to one model input.
struct Sinusoid {
    enum class Target { ac_d, ac_q, dc, sync };
    Target target = Target::ac_d;
    int index = 0;  ///< bus or converter index
    double amplitude = 0.0;
    double omega = 0.0;  ///< rad/s
    double phase = 0.0;  ///< rad; value = amplitude * cos(omega t + phase)
};

struct Excitation {
    std::vector<Sinusoid> terms;
    void fill(double t, SimInputs& in) const;
};

struct SimulateOptions {
    double dt = 1e-5;
    double t_end = 1.0;
    int record_every = 1;
    /// Per-state bound on |x - x0|; empty means only non-finite values count as blowup.
    Eigen::VectorXd bounds;
};

/// Called at t = 0 and every `record_every` steps.
using Observer = std::function<void(double t, const Eigen::VectorXd& x, const SimInputs& in)>;

/// Returns the final state. Throws NumericalBlowup.
Eigen::VectorXd simulate(const SimModel& model, const Eigen::VectorXd& x0, const Excitation& exc,
                         const SimulateOptions& opts, const Observer& observe = {});

struct Trajectory {
    std::vector<double> t;
    Eigen::MatrixXd x;  ///< one row per recorded sample
};
Trajectory simulate_trajectory(const SimModel& model, const Eigen::VectorXd& x0, const Excitation& exc,
                               const SimulateOptions& opts);

/// Phasor X with x(t) ~ Re{X e^{j omega t}}, from samples x[k] at t0 + k dt.
cplx single_bin_dft(const std::vector<double>& samples, double dt, double freq_hz, double t0 = 0.0);

/// Frequency of the largest Hann-windowed DTFT magnitude in [f_lo, f_hi] (mean removed).
double dft_peak_frequency(const std::vector<double>& samples, double dt, double f_lo, double f_hi);

/// Damped Newton on rhs(x) = 0 with a finite-difference Jacobian. Throws NoConvergence.
Eigen::VectorXd solve_equilibrium(const SimModel& model, const Eigen::VectorXd& x0, double tolerance = 1e-9,
                                  int max_iterations = 30);

/// Central-difference Jacobian of the RHS, step max(1e-8, 1e-6 |x_i|).
Eigen::MatrixXd rhs_jacobian(const SimModel& model, const Eigen::VectorXd& x, const SimInputs& in);

struct LinearizedModel {
    Eigen::MatrixXd a;
    CVector eigenvalues;  ///< descending real part
};
LinearizedModel linearize_ss(const SimModel& model, const Eigen::VectorXd& x_eq);

}  // namespace eimnet
