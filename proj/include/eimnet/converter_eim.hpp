#pragma once

// Four-port extended impedance model (EIM) of an averaged two-level VSC.
//
// Port order is (sync, ac-d, ac-q, dc). Inputs are the port "voltages"
// (d_omega_sync [rad/s], du_gd, du_gq [V], du_dc [V]); outputs are the port
// "currents" (dP_sync, di_gd, di_gq [A], di_dc [A]).
//
// Electrical port currents use load convention: i_g flows from the PoC into
// the converter, i_dc flows from the dc node into the converter. dq quantities
// use the amplitude-invariant Park transform, so P = 1.5 Re{u conj(i)}.
// dP_sync is the PoC q-voltage in the controller frame for a PLL converter and
// the deviation of absorbed active power (= minus delivered power) for a VSG.

#include "eimnet/lti.hpp"

#include <Eigen/Dense>

#include <string>
#include <variant>

namespace eimnet {

using Dq = Eigen::Vector2d;

enum class ConverterKind { gfl, gfm };

struct PiGains {
    double kp = 0.0;
    double ki = 0.0;
};

/// Which PoC power the GFL q-axis outer loop regulates.
enum class PqChannel { reactive, active };

/// Grid-following: PLL sync loop, dc-voltage outer loop on d, power loop on q.
struct GflControl {
    PiGains pll;  ///< rad/s per V of controller-frame q voltage
    PiGains dc;   ///< A per V of dc-voltage error
    PiGains pq;   ///< A per W (or var)
    PqChannel channel = PqChannel::reactive;
};

/// Grid-forming: VSG swing loop plus series R-L virtual admittance.
struct GfmControl {
    double inertia = 1.0;  ///< J [s], per-unit swing equation J dw/dt = p - D w
    double damping = 10.0; ///< D [p.u.]
    double r_vir = 0.0;    ///< virtual resistance [Ohm]
    double l_vir = 0.0;    ///< virtual inductance [H]
};

struct BaseValues {
    double s = 1.0;         ///< rated power [W]
    double v_ac = 1.0;      ///< rated ac peak phase voltage [V]
    double v_dc = 1.0;      ///< rated dc voltage [V]
    double omega = 1.0;     ///< rated angular frequency [rad/s]

    double i_ac() const { return 2.0 * s / (3.0 * v_ac); }
    double i_dc() const { return s / v_dc; }
    double z_ac() const { return v_ac / i_ac(); }
};

struct ConverterSpec {
    std::string name;
    double r_f = 0.0;      ///< filter resistance [Ohm]
    double l_f = 0.0;      ///< filter inductance [H]
    double delay = 0.0;    ///< lumped control/PWM delay T_s [s]
    double omega1 = 0.0;   ///< fundamental angular frequency [rad/s]
    PiGains current;       ///< inner current PI, V per A
    double decoupling = 0.0;  ///< dq decoupling gain [Ohm], nominally omega1 * l_f
    std::variant<GflControl, GfmControl> control;
    BaseValues base;

    ConverterKind kind() const {
        return std::holds_alternative<GflControl>(control) ? ConverterKind::gfl : ConverterKind::gfm;
    }
    const GflControl& gfl() const { return std::get<GflControl>(control); }
    const GfmControl& gfm() const { return std::get<GfmControl>(control); }

    /// Throws std::invalid_argument on non-physical values.
    void validate() const;
};

/// Steady state expressed in the converter's own sync frame (sync angle 0).
struct OperatingPoint {
    Dq u_g = Dq::Zero();   ///< PoC voltage
    Dq i_g = Dq::Zero();   ///< PoC current into the converter
    Dq u_c = Dq::Zero();   ///< bridge voltage
    double v_dc = 0.0;
    double i_dc = 0.0;     ///< dc current delivered by the converter: 1.5 Re{u_c conj(i_g)} = v_dc i_dc
    Dq m = Dq::Zero();     ///< modulation ratio, u_c = m v_dc
    double omega1 = 0.0;

    double p_poc() const { return 1.5 * u_g.dot(i_g); }
    double q_poc() const { return 1.5 * (u_g.y() * i_g.x() - u_g.x() * i_g.y()); }
    double p_bridge() const { return 1.5 * u_c.dot(i_g); }

    /// Max relative violation of the two consistency invariants.
    double invariant_error() const;
};

/// Where the active-power set-point of TerminalConditions applies.
enum class PowerReference { poc, dc_terminal };

struct TerminalConditions {
    double u_mag = 0.0;  ///< PoC voltage magnitude [V peak]
    double p = 0.0;      ///< active power absorbed by the converter [W]
    double q = 0.0;      ///< reactive power absorbed at the PoC [var]
    double v_dc = 0.0;   ///< dc terminal voltage [V]
    PowerReference p_at = PowerReference::poc;
};

struct NewtonOptions {
    int max_iterations = 50;
    double tolerance = 1e-12;  ///< relative residual
};

/// Damped Newton on the averaged steady-state equations. Throws NoConvergence.
OperatingPoint solve_operating_point(const ConverterSpec& spec, const TerminalConditions& tc,
                                     const NewtonOptions& opts = {});

/// Named partition of the 4x4 EIM (rows/cols in canonical port order).
enum class EimBlock { y_sync_fe, k_sync_ac, k_sync_dc, c, y_ac, a, d, b, y_dc };

struct BlockRange {
    Index row, col, rows, cols;
};

BlockRange block_range(EimBlock block);
const char* block_name(EimBlock block);
inline constexpr EimBlock kAllEimBlocks[] = {EimBlock::y_sync_fe, EimBlock::k_sync_ac, EimBlock::k_sync_dc,
                                             EimBlock::c,         EimBlock::y_ac,      EimBlock::a,
                                             EimBlock::d,         EimBlock::b,         EimBlock::y_dc};

struct FourPortEim {
    TransferMatrix y;          ///< 4x4, canonical (sync, d, q, dc)
    TransferMatrix z_sync_fo;  ///< 1x1 sync forward path, d_omega = z * dP_sync
    ConverterKind kind = ConverterKind::gfl;

    TransferMatrix block(EimBlock b) const;
};

/// H_pll(s) for GFL, (omega_b / S_b) / (J s + D) for GFM.
TransferMatrix sync_forward(const ConverterSpec& spec);

FourPortEim build_eim(const ConverterSpec& spec, const OperatingPoint& op);

/// The three-port (d, q, dc) admittance obtained by closing the sync port through z_sync_fo.
TransferMatrix close_sync_loop(const FourPortEim& eim);

/// Port order (ac-d, ac-q, dc, sync) <-> canonical (sync, ac-d, ac-q, dc).
CMatrix canonical_to_scan_order(const CMatrix& y4);
CMatrix scan_to_canonical_order(const CMatrix& y4);

/// a_z = (1/sqrt 2) [1 j; 1 -j]
Eigen::Matrix2cd sequence_transform();
/// A_Z y4 A_Z^{-1} with A_Z = blkdiag(a_z, I2); input in (ac-d, ac-q, dc, sync) order.
CMatrix dq_to_modified_sequence(const CMatrix& y4);
CMatrix modified_sequence_to_dq(const CMatrix& y4);

/// Per-port bases (canonical order): current-like base I_b and voltage-like base U_b.
struct PortBases {
    Eigen::Vector4d current;
    Eigen::Vector4d voltage;
};
PortBases port_bases(const ConverterSpec& spec);

}  // namespace eimnet
