#pragma once

// Frequency-domain modal analysis on a loop gain L(s) = Z_net(s) Y_con(s):
// locate zeros of det(I + L), then attribute the critical eigenvalue to
// nodes (participation factors) and to Z_net / Y_con entries (sensitivities).

#include "eimnet/ein.hpp"
#include "eimnet/eig.hpp"
#include "eimnet/lti.hpp"

#include <string>
#include <vector>

namespace eimnet {

struct ModeSearchOptions {
    double f_min_hz = 0.1;
    double f_max_hz = 1000.0;
    int grid_points = 400;
    double capture_radius = 0.3;
    double newton_tolerance = 1e-8;
    int max_iterations = 50;
    EvalOptions eval{};
};

/// A located zero of 1 + Lambda_k(s).
struct Mode {
    cplx s;              ///< rad/s
    cplx lambda;         ///< critical eigenvalue of L at s, ~ -1
    CVector right;       ///< r_k
    CVector left;        ///< t_k, with t_k r_k = 1
    double residual = 0; ///< |1 + lambda|
    int iterations = 0;

    double frequency_hz() const;
    /// -Re(s)/|s|
    double damping_ratio() const;
    bool unstable() const { return s.real() > 0.0; }
};

struct ModeSearchResult {
    std::vector<Mode> modes;
    /// Smallest |1 + Lambda| seen along the sweep (margin when nothing is captured).
    double margin = 0.0;
    double margin_frequency_hz = 0.0;

    bool captured() const { return !modes.empty(); }
    bool stable() const;
};

/// Eigenvalue of L(s) tracked from a reference right eigenvector (largest expansion coefficient).
struct TrackedEigen {
    cplx lambda;
    CVector right;
    CVector left;
};
TrackedEigen track_eigenvalue(const CMatrix& l, const CVector& reference_right, double condition_cap = 1e12);

ModeSearchResult find_modes(const TransferMatrix& loop_gain, const ModeSearchOptions& opts = {});

/// Newton refinement of 1 + Lambda(s) = 0 starting from s0 on the trace nearest `lambda0`.
Mode refine_mode(const TransferMatrix& loop_gain, cplx s0, cplx lambda0, const ModeSearchOptions& opts = {});

/// Node participation: sum of diag(r_k t_k) over each node's scalar ports.
struct NodeParticipation {
    int node_id;
    cplx value;
};
std::vector<NodeParticipation> node_pf(const CVector& right, const CVector& left, const NodeTable& nodes);
/// Variant that decomposes `l_eval` and uses eigenvalue `k`.
std::vector<NodeParticipation> node_pf(const CMatrix& l_eval, Index k, const NodeTable& nodes);

/// Per-unit Z_net, Y_con and eigen data at one mode.
struct ModalContext {
    cplx s;
    CMatrix z;
    CMatrix y;
    cplx lambda;
    CVector right;
    CVector left;

    CMatrix participation() const { return right * left.transpose(); }
};
ModalContext modal_context(const EinSystem& sys, const Mode& mode, const EvalOptions& eval = {});
/// Same, at an arbitrary s (e.g. the j-omega grid point nearest a mode).
ModalContext modal_context(const EinSystem& sys, cplx s, const CVector& reference_right, const EvalOptions& eval = {});

/// Closed-form dLambda/dZ_ij = [Y PF]_ji and dLambda/dY_ij = [PF Z]_ji.
cplx sensitivity_z(const ModalContext& ctx, Index i, Index j);
cplx sensitivity_y(const ModalContext& ctx, Index i, Index j);

struct EntrySensitivity {
    std::string label;  ///< e.g. "Z_ac_g1-12"
    std::string component;
    Index row = 0, col = 0;  ///< global indices
    cplx value;              ///< component entry value (per unit) at s
    cplx sensitivity;
};

/// Every entry of every Z_net component.
std::vector<EntrySensitivity> z_sensitivities(const EinSystem& sys, const ModalContext& ctx);
/// Every entry of every converter EIM block.
std::vector<EntrySensitivity> y_sensitivities(const EinSystem& sys, const ModalContext& ctx);

/// Finite-difference oracle: central difference of the tracked eigenvalue under a relative
/// perturbation `step` of one entry of Z (side 'z') or Y (side 'y').
cplx finite_difference_sensitivity(const ModalContext& ctx, char side, Index i, Index j, double step = 1e-6);

struct ValidationRow {
    EntrySensitivity entry;
    cplx predicted;  ///< sensitivity * increment * entry value
    cplx actual;     ///< Lambda(perturbed) - Lambda at the same s
    double error;    ///< |predicted - actual| / |actual|
    bool track_lost = false;
};

/// Scales each entry by (1 + increment), re-evaluates Lambda_k at the same s and compares to the
/// first-order prediction. Entries whose eigenvalue cannot be matched get track_lost = true.
std::vector<ValidationRow> validate_sensitivity(const ModalContext& ctx, const std::vector<EntrySensitivity>& entries,
                                                char side, double increment);

struct ModeReport {
    Mode mode;
    std::vector<NodeParticipation> node_pf;
    std::vector<EntrySensitivity> z_sensitivity;
    std::vector<EntrySensitivity> y_sensitivity;
    std::vector<ValidationRow> z_validation;  ///< empty unless an increment was requested
    double pf_trace_error = 0.0;              ///< |sum diag(r t) - 1|
};

/// increment <= 0 skips the Z-side perturbation check.
ModeReport analyze_mode(const EinSystem& sys, const Mode& mode, double increment = 0.0, const EvalOptions& eval = {});

}  // namespace eimnet
