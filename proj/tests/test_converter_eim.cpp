#include "eimnet/converter_eim.hpp"
#include "eimnet/eig.hpp"
#include "eimnet/errors.hpp"
#include "eimnet/scan.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace eimnet;
using namespace testutil;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Controller transfer from the time-domain rig with the sync injection held at zero:
// (u_d, u_q, v) -> (i_d, i_q, i_dc).
CMatrix rig_three_port(const LinearRig& r, cplx s) {
    const Index n = r.a.rows();
    const CMatrix g = r.c.cast<cplx>() * (s * CMatrix::Identity(n, n) - r.a.cast<cplx>()).partialPivLu().solve(r.b.cast<cplx>()) +
                      r.d.cast<cplx>();
    return g.block(1, 0, 3, 3);
}

}  // namespace

TEST_SUITE("converter_eim") {

TEST_CASE("PLL forward path is kp + ki/s") {
    ConverterSpec s = gfl_spec();
    std::get<GflControl>(s.control).pll = {0.2, 10.0};
    CHECK(rel_err(sync_forward(s).eval(cplx(0.0, 10.0))(0, 0), cplx(0.2, -1.0)) < 1e-15);
}

TEST_CASE("VSG forward path vanishes with infinite damping") {
    ConverterSpec s = gfm_spec();
    const cplx at(0.0, kTwoPi * 3.0);
    const double nominal = std::abs(sync_forward(s).eval(at)(0, 0));
    std::get<GfmControl>(s.control).damping = 1e15;
    CHECK(std::abs(sync_forward(s).eval(at)(0, 0)) < 1e-12 * nominal);
}

TEST_CASE("no-load operating point") {
    const ConverterSpec s = gfl_spec();
    const OperatingPoint op = nominal_op(s, 0.0);
    CHECK(op.i_g.norm() == 0.0);
    CHECK((op.u_c - op.u_g).norm() == 0.0);
    CHECK(op.i_dc == 0.0);
}

TEST_CASE("active power sets the d current") {
    ConverterSpec s = gfl_spec();
    s.l_f = 1e-9;  // practically resistive
    TerminalConditions tc;
    tc.u_mag = s.base.v_ac;
    tc.p = 0.7 * s.base.s;
    tc.v_dc = s.base.v_dc;
    const OperatingPoint op = solve_operating_point(s, tc);
    CHECK(op.u_g.y() == 0.0);
    CHECK(rel_err(cplx(op.i_g.x()), cplx(2.0 * tc.p / (3.0 * op.u_g.x()))) < 1e-12);
}

TEST_CASE("operating point invariants") {
    for (const ConverterSpec& s : {gfl_spec(), gfm_spec()})
        for (double p : {-0.9, -0.3, 0.4, 1.0}) {
            TerminalConditions tc;
            tc.u_mag = 1.02 * s.base.v_ac;
            tc.p = p * s.base.s;
            tc.q = 0.2 * s.base.s;
            tc.v_dc = s.base.v_dc;
            tc.p_at = p > 0.0 ? PowerReference::poc : PowerReference::dc_terminal;
            const OperatingPoint op = solve_operating_point(s, tc);
            CHECK(op.invariant_error() < 1e-9);
            CHECK(rel_err(cplx(op.q_poc()), cplx(tc.q)) < 1e-9);
            const double p_seen = tc.p_at == PowerReference::poc ? op.p_poc() : op.v_dc * op.i_dc;
            CHECK(rel_err(cplx(p_seen), cplx(tc.p)) < 1e-9);
        }
}

TEST_CASE("unreachable set-point does not converge") {
    const ConverterSpec s = gfl_spec();
    TerminalConditions tc;
    tc.u_mag = s.base.v_ac;
    tc.p = 1e4 * s.base.s;
    tc.v_dc = s.base.v_dc;
    tc.p_at = PowerReference::dc_terminal;
    CHECK_THROWS_AS(solve_operating_point(s, tc), NoConvergence);
}

TEST_CASE("controls disabled leave the filter admittance") {
    ConverterSpec s = gfl_spec();
    s.current = {0.0, 0.0};
    s.decoupling = 0.0;
    s.delay = 0.0;
    auto& g = std::get<GflControl>(s.control);
    g.pll = {0.0, 0.0};
    g.dc = {0.0, 0.0};
    g.pq = {0.0, 0.0};
    const FourPortEim eim = build_eim(s, nominal_op(s, 0.5));
    std::mt19937 rng(1);
    for (int k = 0; k < 20; ++k) {
        const cplx z = random_s(rng);
        Eigen::Matrix2cd zf;
        zf << s.r_f + z * s.l_f, -s.omega1 * s.l_f, s.omega1 * s.l_f, s.r_f + z * s.l_f;
        CHECK(rel_err(eim.block(EimBlock::y_ac).eval(z), CMatrix(zf.inverse())) < 1e-12);
    }
}

TEST_CASE("PLL converter has no sync-dc coupling") {
    const ConverterSpec s = gfl_spec();
    const FourPortEim eim = build_eim(s, nominal_op(s, -0.8));
    for (double f : log_grid(0.1, 5000.0, 50)) CHECK(eim.block(EimBlock::k_sync_dc).eval(cplx(0.0, kTwoPi * f))(0, 0) == 0.0);
}

TEST_CASE("block partition covers the four-port") {
    const ConverterSpec s = gfm_spec();
    const FourPortEim eim = build_eim(s, nominal_op(s, 0.8));
    const cplx at(0.0, kTwoPi * 12.0);
    const CMatrix y = eim.y.eval(at);
    CMatrix rebuilt = CMatrix::Zero(4, 4);
    for (EimBlock b : kAllEimBlocks) {
        const BlockRange r = block_range(b);
        rebuilt.block(r.row, r.col, r.rows, r.cols) += eim.block(b).eval(at);
    }
    CHECK(rebuilt == y);
}

TEST_CASE("closing the sync port matches the algebraic closure") {
    for (const ConverterSpec& s : {gfl_spec(), gfm_spec()}) {
        const FourPortEim eim = build_eim(s, nominal_op(s, s.kind() == ConverterKind::gfl ? -0.8 : 0.8));
        const TransferMatrix closed = close_sync_loop(eim);
        std::mt19937 rng(2);
        for (int k = 0; k < 20; ++k) {
            const cplx z = random_s(rng);
            const CMatrix y = eim.y.eval(z);
            const cplx zf = eim.z_sync_fo.eval(z)(0, 0);
            // d_omega = zf * (y_ss d_omega + y_se x)
            const CMatrix expect = y.bottomRightCorner(3, 3) + y.bottomLeftCorner(3, 1) * (zf / (1.0 - zf * y(0, 0))) *
                                                                  y.topRightCorner(1, 3);
            CHECK(rel_err(closed.eval(z), expect) < 1e-8);
        }
    }
}

TEST_CASE("closed sync loop equals the linearised time-domain converter") {
    // Without a delay the averaged model is rational, so the two derivations must coincide.
    for (ConverterSpec s : {gfl_spec(), gfm_spec()}) {
        s.delay = 0.0;
        const OperatingPoint op = nominal_op(s, s.kind() == ConverterKind::gfl ? -0.8 : 0.8);
        const TransferMatrix closed = close_sync_loop(build_eim(s, op));
        const LinearRig rig = linearize_rig(s, op, 2);
        const PortBases pb = port_bases(s);
        std::mt19937 rng(4);
        for (int k = 0; k < 20; ++k) {
            const cplx z = random_s(rng);
            CMatrix a = closed.eval(z), b = rig_three_port(rig, z);
            for (Index i = 0; i < 3; ++i)
                for (Index j = 0; j < 3; ++j) {
                    a(i, j) *= pb.voltage(j + 1) / pb.current(i + 1);
                    b(i, j) *= pb.voltage(j + 1) / pb.current(i + 1);
                }
            CHECK(rel_err(a, b) < 1e-5);
        }
    }
}

TEST_CASE("four-port equals the linearised rig with the sync port open") {
    for (ConverterSpec s : {gfl_spec(), gfm_spec()}) {
        s.delay = 0.0;
        const OperatingPoint op = nominal_op(s, s.kind() == ConverterKind::gfl ? -0.8 : 0.8);
        const FourPortEim eim = build_eim(s, op);
        const LinearRig rig = linearize_rig(s, op, 2);
        const PortBases pb = port_bases(s);
        for (double f : {1.0, 7.0, 45.0, 120.0, 900.0}) {
            const cplx z(0.0, kTwoPi * f);
            const CMatrix a = eim.y.eval(z), b = rig.eim(z);
            // Row by row in per unit: the rig is a finite-difference linearisation
            for (Index r = 0; r < 4; ++r) {
                double diff = 0.0, scale = 0.0;
                for (Index c = 0; c < 4; ++c) {
                    const double k = pb.voltage(c) / pb.current(r);
                    diff = std::max(diff, k * std::abs(b(r, c) - a(r, c)));
                    scale = std::max(scale, k * std::abs(a(r, c)));
                }
                INFO(s.name << " f=" << f << " row " << r);
                CHECK(diff < 1e-4 * scale);
            }
        }
    }
}

TEST_CASE("sequence transform") {
    const Eigen::Matrix2cd a = sequence_transform();
    CHECK((a * a.adjoint() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    const CMatrix eye = CMatrix::Identity(4, 4);
    CHECK(rel_err(dq_to_modified_sequence(eye), eye) < 1e-15);

    std::mt19937 rng(9);
    const CMatrix y = random_matrix(rng, 4, 4);
    const CMatrix m = dq_to_modified_sequence(y);
    CHECK(rel_err(modified_sequence_to_dq(m), y) < 1e-14);
    const CVector ey = Eigen::ComplexEigenSolver<CMatrix>(y, false).eigenvalues();
    const CVector em = Eigen::ComplexEigenSolver<CMatrix>(m, false).eigenvalues();
    const auto perm = match_eigenvalues(ey, em);
    for (Index k = 0; k < 4; ++k) CHECK(std::abs(ey(k) - em(perm[static_cast<std::size_t>(k)])) < 1e-12 * ey.cwiseAbs().maxCoeff());
}

TEST_CASE("port order helpers are inverse") {
    std::mt19937 rng(10);
    const CMatrix y = random_matrix(rng, 4, 4);
    const CMatrix scan = canonical_to_scan_order(y);
    CHECK(scan(3, 3) == y(0, 0));
    CHECK(scan(0, 1) == y(1, 2));
    CHECK(scan_to_canonical_order(scan) == y);
}

TEST_CASE("invalid specs are rejected") {
    ConverterSpec s = gfl_spec();
    s.l_f = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    ConverterSpec g = gfm_spec();
    std::get<GfmControl>(g.control).inertia = 0.0;
    CHECK_THROWS_AS(build_eim(g, nominal_op(gfm_spec(), 0.5)), std::invalid_argument);
}

}
