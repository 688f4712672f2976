#pragma once

// Perturbation-injection frequency scan of one converter between an ideal ac
// source and an ideal dc source, plus the same four-port taken directly from
// the linearised averaged model.

#include "eimnet/simulate.hpp"

#include <vector>

namespace eimnet {

struct ScanOptions {
    double amplitude = 0.01;        ///< injection amplitude, fraction of each port's voltage base
    int pade_order = 2;
    double max_dt = 1e-5;
    int min_samples_per_period = 50;
    int settle_fundamental_periods = 10;
    int settle_injection_periods = 5;
    int window_periods = 5;         ///< minimum DFT window, injection periods
    double window_min_seconds = 0.1;
    double convergence_tol = 2e-4;  ///< relative change between consecutive windows
    int max_windows = 40;
    double condition_cap = 1e6;
    double phase = 0.0;  ///< common injection phase offset [rad]
};

struct ScanPoint {
    double freq_hz = 0.0;
    CMatrix y_dq;       ///< 4x4 canonical (sync, d, q, dc), physical units
    CMatrix y_seq;      ///< 4x4 modified sequence, (p, n, dc, sync)
    Eigen::Vector4d amplitudes;  ///< (p, n, dc, sync) injection amplitudes
    double dt = 0.0;
    long window_samples = 0;
    double window_start = 0.0;
    double condition = 0.0;  ///< of the per-unit voltage matrix
};

struct ScanResult {
    std::vector<ScanPoint> points;
};

/// Single-converter rig: the converter between ideal sources held at `op`.
SimModel single_converter_rig(const ConverterSpec& spec, const OperatingPoint& op, int pade_order = 2);

/// Throws AmplitudeZero, IllConditionedScan.
ScanResult scan_eim(const ConverterSpec& spec, const OperatingPoint& op, const std::vector<double>& f_grid,
                    const ScanOptions& opts = {});
ScanPoint scan_eim_point(const ConverterSpec& spec, const OperatingPoint& op, double freq_hz,
                         const ScanOptions& opts = {});

/// The rig linearised at equilibrium: inputs (u_d, u_q, v_dc, p_inj), outputs
/// (p_sync, i_d, i_q, i_dc, omega).
struct LinearRig {
    Eigen::MatrixXd a, b, c, d;

    /// Four-port in canonical order, physical units.
    CMatrix eim(cplx s) const;
};
LinearRig linearize_rig(const ConverterSpec& spec, const OperatingPoint& op, int pade_order = 2);

/// Worst entrywise relative error between a measured and an analytic four-port, both converted to
/// per unit with `bases`. Entries below `floor` times the largest per-unit entry are compared
/// against that floor instead of their own magnitude.
double entry_relative_error(const CMatrix& measured, const CMatrix& analytic, const PortBases& bases, Index i, Index j,
                            double floor);

}  // namespace eimnet
