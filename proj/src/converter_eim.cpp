#include "eimnet/converter_eim.hpp"

#include "eimnet/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace eimnet {

namespace {

using TM = TransferMatrix;

Eigen::Matrix2d rot90() {
    Eigen::Matrix2d j;
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

CMatrix row(double a, double b) {
    CMatrix m(1, 2);
    m << a, b;
    return m;
}

CMatrix col(double a, double b) {
    CMatrix m(2, 1);
    m << a, b;
    return m;
}

/// R I + X J: the dq image of a series R + jX.
TM dq_constant(double r, double x) {
    return TM::constant((r * Eigen::Matrix2d::Identity() + x * rot90()).cast<cplx>());
}

/// Linearized rotation into a frame lagging by d_theta = d_omega / s: (1/s)[x_q; -x_d].
TM frame_shift(const Dq& x0) { return TM::integrator() * TM::constant(col(x0.y(), -x0.x())); }

}  // namespace

void ConverterSpec::validate() const {
    auto require = [&](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument("converter '" + name + "': " + what);
    };
    require(r_f >= 0.0, "filter resistance must be >= 0");
    require(l_f > 0.0, "filter inductance must be > 0");
    require(delay >= 0.0, "delay must be >= 0");
    require(omega1 > 0.0, "fundamental frequency must be > 0");
    require(base.s > 0.0 && base.v_ac > 0.0 && base.v_dc > 0.0 && base.omega > 0.0, "base values must be > 0");
    if (kind() == ConverterKind::gfm) {
        const auto& g = gfm();
        require(g.inertia > 0.0, "VSG inertia must be > 0");
        require(g.damping >= 0.0, "VSG damping must be >= 0");
        require(g.r_vir >= 0.0 && g.l_vir >= 0.0 && (g.r_vir > 0.0 || g.l_vir > 0.0),
                "virtual impedance must be non-zero");
    }
}

double OperatingPoint::invariant_error() const {
    const double uc_scale = std::max(u_c.norm(), 1e-300);
    const double e_mod = (u_c - m * v_dc).norm() / uc_scale;
    const double p_scale = std::max(1.5 * u_c.norm() * i_g.norm(), 1e-300);
    const double e_pow = std::abs(p_bridge() - v_dc * i_dc) / p_scale;
    return std::max(e_mod, p_scale > 1e-300 ? e_pow : 0.0);
}

OperatingPoint solve_operating_point(const ConverterSpec& spec, const TerminalConditions& tc, const NewtonOptions& opts) {
    spec.validate();
    if (!(tc.u_mag > 0.0) || !(tc.v_dc > 0.0)) throw std::invalid_argument("terminal voltages must be > 0");

    const double u = tc.u_mag;
    const double r = spec.r_f;
    const bool at_dc = tc.p_at == PowerReference::dc_terminal;

    auto residual = [&](const Dq& i) {
        const double p = at_dc ? 1.5 * (u * i.x() - r * i.squaredNorm()) : 1.5 * u * i.x();
        const double q = -1.5 * u * i.y();
        return Dq(p - tc.p, q - tc.q);
    };
    auto jacobian = [&](const Dq& i) {
        Eigen::Matrix2d jac;
        if (at_dc)
            jac << 1.5 * (u - 2.0 * r * i.x()), -3.0 * r * i.y(), 0.0, -1.5 * u;
        else
            jac << 1.5 * u, 0.0, 0.0, -1.5 * u;
        return jac;
    };

    const double scale = std::max({1.0, std::abs(tc.p), std::abs(tc.q)});
    Dq i = Dq::Zero();
    Dq res = residual(i);
    int it = 0;
    for (; it < opts.max_iterations && res.norm() / scale > opts.tolerance; ++it) {
        const Eigen::Matrix2d jac = jacobian(i);
        if (std::abs(jac.determinant()) < 1e-300) throw NoConvergence(it, res.norm() / scale);
        const Dq step = jac.partialPivLu().solve(-res);
        double lambda = 1.0;
        Dq trial = i + step;
        Dq trial_res = residual(trial);
        while (trial_res.norm() >= res.norm() && lambda > 1e-6) {
            lambda *= 0.5;
            trial = i + lambda * step;
            trial_res = residual(trial);
        }
        if (trial_res.norm() >= res.norm()) throw NoConvergence(it + 1, res.norm() / scale);
        i = trial;
        res = trial_res;
    }
    if (res.norm() / scale > opts.tolerance) throw NoConvergence(it, res.norm() / scale);

    OperatingPoint op;
    op.omega1 = spec.omega1;
    op.u_g = Dq(u, 0.0);
    op.i_g = i;
    const double x = spec.omega1 * spec.l_f;
    op.u_c = op.u_g - Dq(r * i.x() - x * i.y(), r * i.y() + x * i.x());
    op.v_dc = tc.v_dc;
    op.m = op.u_c / tc.v_dc;
    op.i_dc = op.p_bridge() / tc.v_dc;
    return op;
}

BlockRange block_range(EimBlock block) {
    switch (block) {
        case EimBlock::y_sync_fe: return {0, 0, 1, 1};
        case EimBlock::k_sync_ac: return {0, 1, 1, 2};
        case EimBlock::k_sync_dc: return {0, 3, 1, 1};
        case EimBlock::c: return {1, 0, 2, 1};
        case EimBlock::y_ac: return {1, 1, 2, 2};
        case EimBlock::a: return {1, 3, 2, 1};
        case EimBlock::d: return {3, 0, 1, 1};
        case EimBlock::b: return {3, 1, 1, 2};
        case EimBlock::y_dc: return {3, 3, 1, 1};
    }
    throw std::invalid_argument("unknown EIM block");
}

const char* block_name(EimBlock block) {
    switch (block) {
        case EimBlock::y_sync_fe: return "Y_sync_fe";
        case EimBlock::k_sync_ac: return "k_sync_ac";
        case EimBlock::k_sync_dc: return "k_sync_dc";
        case EimBlock::c: return "c";
        case EimBlock::y_ac: return "Y_ac";
        case EimBlock::a: return "a";
        case EimBlock::d: return "d";
        case EimBlock::b: return "b";
        case EimBlock::y_dc: return "Y_dc";
    }
    return "?";
}

TransferMatrix FourPortEim::block(EimBlock b) const {
    const BlockRange r = block_range(b);
    return block_of(y, r.row, r.col, r.rows, r.cols);
}

TransferMatrix sync_forward(const ConverterSpec& spec) {
    spec.validate();
    if (spec.kind() == ConverterKind::gfl) return TM::pi(spec.gfl().pll.kp, spec.gfl().pll.ki);
    const auto& g = spec.gfm();
    return TM::rational({spec.base.omega / spec.base.s}, {g.inertia, g.damping});
}

FourPortEim build_eim(const ConverterSpec& spec, const OperatingPoint& op) {
    spec.validate();
    if (!(op.v_dc > 0.0)) throw std::invalid_argument("operating point dc voltage must be > 0");

    const double w1 = spec.omega1;
    const double vdc = op.v_dc;
    const TM I2 = TM::identity(2);
    const TM s = TM::s();

    const TM z_f = dq_constant(spec.r_f, w1 * spec.l_f) + cplx(spec.l_f) * (s * I2);
    const TM delay = TM::delay(spec.delay);
    const TM h_cc = TM::pi(spec.current.kp, spec.current.ki);
    const TM k_d = dq_constant(0.0, spec.decoupling);

    // Outer loop: di* = a_i di + a_u du + a_v dv + a_w dw (controller frame reference).
    TM a_i = TM::zero(2, 2), a_u = TM::zero(2, 2), a_v = TM::zero(2, 1), a_w = TM::zero(2, 1);
    if (spec.kind() == ConverterKind::gfl) {
        const auto& g = spec.gfl();
        const TM h_pq = TM::pi(g.pq.kp, g.pq.ki);
        const TM h_dc = TM::pi(g.dc.kp, g.dc.ki);
        const Dq& u0 = op.u_g;
        const Dq& i0 = op.i_g;
        // Row gradient of the regulated PoC power with respect to i_g and u_g.
        const bool reactive = g.channel == PqChannel::reactive;
        const CMatrix dpdi = reactive ? row(1.5 * u0.y(), -1.5 * u0.x()) : row(1.5 * u0.x(), 1.5 * u0.y());
        const CMatrix dpdu = reactive ? row(-1.5 * i0.y(), 1.5 * i0.x()) : row(1.5 * i0.x(), 1.5 * i0.y());
        a_i = vcat({TM::zero(1, 2), h_pq * TM::constant(dpdi)});
        a_u = vcat({TM::zero(1, 2), h_pq * TM::constant(dpdu)});
        a_v = vcat({-h_dc, TM::zero(1, 1)});
    } else {
        const auto& g = spec.gfm();
        const TM y_vir = inverse(dq_constant(g.r_vir, w1 * g.l_vir) + cplx(g.l_vir) * (s * I2));
        a_u = y_vir;
        a_w = y_vir * frame_shift(op.u_g);
    }

    // Filter voltage balance after substituting the modulation, current loop and frame shifts:
    //   M di = G_w dw + G_u du + G_v dv
    const TM h_eff = h_cc * I2 - k_d;
    const TM m_lhs = z_f + delay * (h_eff - h_cc * a_i);
    const TM g_w = delay * (h_cc * a_w) - delay * (h_eff * frame_shift(op.i_g)) + cplx(vdc) * frame_shift(op.m);
    const TM g_u = I2 + delay * (h_cc * a_u);
    const TM g_v = delay * (h_cc * a_v) - TM::constant(col(op.m.x(), op.m.y()));

    const TM t_i = inverse(m_lhs) * hcat({g_w, g_u, g_v});  // 2x4 over (w, u_d, u_q, v)

    CMatrix sel_u = CMatrix::Zero(2, 4);
    sel_u(0, 1) = 1.0;
    sel_u(1, 2) = 1.0;
    CMatrix sel_v = CMatrix::Zero(1, 4);
    sel_v(0, 3) = 1.0;
    const TM t_uc = TM::constant(sel_u) - z_f * t_i;

    const TM i_dc = cplx(-1.5 / vdc) * (TM::constant(row(op.u_c.x(), op.u_c.y())) * t_i +
                                        TM::constant(row(op.i_g.x(), op.i_g.y())) * t_uc) +
                    cplx(op.i_dc / vdc) * TM::constant(sel_v);

    TM p_sync;
    if (spec.kind() == ConverterKind::gfl) {
        // Controller-frame q voltage; no dc dependence.
        p_sync = hcat({cplx(-op.u_g.x()) * TM::integrator(), TM::constant(row(0.0, 1.0)), TM::zero(1, 1)});
    } else {
        p_sync = cplx(1.5) * (TM::constant(row(op.u_g.x(), op.u_g.y())) * t_i +
                              TM::constant(row(op.i_g.x(), op.i_g.y())) * TM::constant(sel_u));
    }

    FourPortEim out;
    out.kind = spec.kind();
    out.y = vcat({p_sync, t_i, i_dc});
    out.z_sync_fo = sync_forward(spec);
    return out;
}

TransferMatrix close_sync_loop(const FourPortEim& eim) {
    const TM y_ss = block_of(eim.y, 0, 0, 1, 1);
    const TM y_se = block_of(eim.y, 0, 1, 1, 3);
    const TM y_es = block_of(eim.y, 1, 0, 3, 1);
    const TM y_ee = block_of(eim.y, 1, 1, 3, 3);
    const TM& z = eim.z_sync_fo;
    return y_ee + y_es * z * inverse(TM::identity(1) - z * y_ss) * y_se;
}

namespace {
CMatrix permute_ports(const CMatrix& y4, const int (&order)[4]) {
    if (y4.rows() != 4 || y4.cols() != 4) throw DimensionMismatch("four-port matrix must be 4x4");
    CMatrix out(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out(i, j) = y4(order[i], order[j]);
    return out;
}
}  // namespace

CMatrix canonical_to_scan_order(const CMatrix& y4) { return permute_ports(y4, {1, 2, 3, 0}); }

CMatrix scan_to_canonical_order(const CMatrix& y4) { return permute_ports(y4, {3, 0, 1, 2}); }

Eigen::Matrix2cd sequence_transform() {
    Eigen::Matrix2cd a;
    a << 1.0, kJ, 1.0, -kJ;
    return a / std::sqrt(2.0);
}

CMatrix dq_to_modified_sequence(const CMatrix& y4) {
    if (y4.rows() != 4 || y4.cols() != 4) throw DimensionMismatch("four-port matrix must be 4x4");
    CMatrix a = CMatrix::Identity(4, 4);
    a.topLeftCorner(2, 2) = sequence_transform();
    // a_z is unitary, so its inverse is the adjoint.
    return a * y4 * a.adjoint();
}

CMatrix modified_sequence_to_dq(const CMatrix& y4) {
    if (y4.rows() != 4 || y4.cols() != 4) throw DimensionMismatch("four-port matrix must be 4x4");
    CMatrix a = CMatrix::Identity(4, 4);
    a.topLeftCorner(2, 2) = sequence_transform();
    return a.adjoint() * y4 * a;
}

PortBases port_bases(const ConverterSpec& spec) {
    const auto& b = spec.base;
    PortBases out;
    const double sync_current = spec.kind() == ConverterKind::gfl ? b.v_ac : b.s;
    out.current << sync_current, b.i_ac(), b.i_ac(), b.i_dc();
    out.voltage << b.omega, b.v_ac, b.v_ac, b.v_dc;
    return out;
}

}  // namespace eimnet
