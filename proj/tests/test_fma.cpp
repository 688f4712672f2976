#include "eimnet/case_builder.hpp"
#include "eimnet/errors.hpp"
#include "eimnet/fma.hpp"
#include "eimnet/oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace eimnet;
using namespace testutil;

namespace {

NodeTable scalar_nodes(int n) {
    NodeTable t;
    for (int k = 1; k <= n; ++k) t.add({k, NodeKind::dc, "", 1.0, 1.0});
    return t;
}

ModalContext context_from(const CMatrix& z, const CMatrix& y, Index k) {
    const CMatrix l = z * y;
    Eigen::ComplexEigenSolver<CMatrix> es(l);
    ModalContext ctx;
    ctx.s = cplx(0.0, 1.0);
    ctx.z = z;
    ctx.y = y;
    ctx.lambda = es.eigenvalues()(k);
    ctx.right = es.eigenvectors().col(k);
    const CMatrix tinv = es.eigenvectors().inverse();
    ctx.left = tinv.row(k).transpose();
    return ctx;
}

Mode case_mode(const BuiltCase& bc) {
    const ModeSearchResult res = find_modes(loop_gain(bc.ein), mode_search_options(bc.config));
    REQUIRE(res.captured());
    return res.modes.front();
}

}  // namespace

TEST_SUITE("fma") {

TEST_CASE("first-order scalar loop, Newton from nearby") {
    // 1 + g/(s + a) = 0 at s = -a - g
    const TransferMatrix l = TransferMatrix::rational({-3.0}, {1.0, 1.0});
    const Mode m = refine_mode(l, cplx(1.5, 0.1), cplx(-1.0, 0.0));
    CHECK(std::abs(m.s - cplx(2.0, 0.0)) < 1e-9);
    CHECK(m.unstable());

    const TransferMatrix l2 = TransferMatrix::rational({3.0}, {1.0, 1.0});
    const Mode m2 = refine_mode(l2, cplx(-3.0, 0.2), cplx(-1.0, 0.0));
    CHECK(std::abs(m2.s - cplx(-4.0, 0.0)) < 1e-9);
    CHECK_FALSE(m2.unstable());
}

TEST_CASE("second-order scalar loop is found by the sweep") {
    // 1 + g/(s (s + a)) = 0 gives s^2 + a s + g = 0
    const double a = -0.5, g = std::pow(2.0 * std::numbers::pi * 10.0, 2);
    const TransferMatrix l = TransferMatrix::rational({g}, {1.0, a, 0.0});
    ModeSearchOptions mo;
    mo.f_min_hz = 1.0;
    mo.f_max_hz = 100.0;
    mo.grid_points = 300;
    const ModeSearchResult res = find_modes(l, mo);
    REQUIRE(res.captured());
    const cplx expect(-a / 2.0, std::sqrt(g - a * a / 4.0));
    CHECK(std::abs(res.modes.front().s - expect) < 1e-7 * std::abs(expect));
    CHECK(res.modes.front().residual < 1e-8);
    CHECK_FALSE(res.stable());
}

TEST_CASE("a well damped loop reports a margin and no modes") {
    const TransferMatrix l = TransferMatrix::rational({0.1}, {1.0, 10.0});
    ModeSearchOptions mo;
    mo.f_min_hz = 0.1;
    mo.f_max_hz = 100.0;
    const ModeSearchResult res = find_modes(l, mo);
    CHECK_FALSE(res.captured());
    CHECK(res.stable());
    CHECK(res.margin > 0.9);
}

TEST_CASE("participation of a diagonal loop") {
    CMatrix l = CMatrix::Zero(3, 3);
    l(0, 0) = 0.2;
    l(1, 1) = cplx(-1.0, 0.01);
    l(2, 2) = 5.0;
    const NodeTable nodes = scalar_nodes(3);
    const auto pf = node_pf(l, 1, nodes);
    REQUIRE(pf.size() == 3);
    CHECK(std::abs(pf[1].value - 1.0) < 1e-12);
    CHECK(std::abs(pf[0].value) < 1e-12);
    CHECK(std::abs(pf[2].value) < 1e-12);
}

TEST_CASE("participation sums to one") {
    std::mt19937 rng(31);
    const NodeTable nodes = scalar_nodes(6);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix l = random_matrix(rng, 6, 6);
        for (Index k = 0; k < 6; ++k) {
            cplx sum = 0.0;
            for (const auto& p : node_pf(l, k, nodes)) sum += p.value;
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("scalar sensitivities") {
    const ModalContext ctx = context_from(CMatrix::Constant(1, 1, 2.0), CMatrix::Constant(1, 1, 3.0), 0);
    CHECK(std::abs(ctx.lambda - 6.0) < 1e-14);
    CHECK(std::abs(sensitivity_z(ctx, 0, 0) - 3.0) < 1e-14);
    CHECK(std::abs(sensitivity_y(ctx, 0, 0) - 2.0) < 1e-14);
}

TEST_CASE("no converter admittance means no Z sensitivity") {
    std::mt19937 rng(32);
    const ModalContext ctx = context_from(random_matrix(rng, 4, 4), CMatrix::Zero(4, 4), 2);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) CHECK(std::abs(sensitivity_z(ctx, i, j)) == 0.0);
}

TEST_CASE("diagonal Z: Y sensitivity is participation times Z") {
    std::mt19937 rng(33);
    CMatrix z = CMatrix::Zero(4, 4);
    for (Index k = 0; k < 4; ++k) z(k, k) = cplx(1.0 + k, 0.3 * k);
    const ModalContext ctx = context_from(z, random_matrix(rng, 4, 4), 1);
    const CMatrix pf = ctx.participation();
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) CHECK(rel_err(sensitivity_y(ctx, i, j), pf(j, i) * z(i, i)) < 1e-12);
}

TEST_CASE("closed form matches central differences on random matrices") {
    std::mt19937 rng(34);
    for (int trial = 0; trial < 5; ++trial) {
        const ModalContext ctx = context_from(random_matrix(rng, 5, 5), random_matrix(rng, 5, 5), trial % 5);
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 5; ++j) {
                const cplx fz = finite_difference_sensitivity(ctx, 'z', i, j);
                const cplx fy = finite_difference_sensitivity(ctx, 'y', i, j);
                CHECK(std::abs(sensitivity_z(ctx, i, j) - fz) < 1e-6 * (1.0 + std::abs(fz)));
                CHECK(std::abs(sensitivity_y(ctx, i, j) - fy) < 1e-6 * (1.0 + std::abs(fy)));
            }
    }
}

TEST_CASE("tracking follows the reference vector") {
    CMatrix l = CMatrix::Zero(2, 2);
    l(0, 0) = 1.0;
    l(1, 1) = 1.001;
    l(0, 1) = 0.01;
    CVector ref(2);
    ref << 0.0, 1.0;
    const TrackedEigen t = track_eigenvalue(l, ref);
    CHECK(std::abs(t.lambda - 1.001) < 1e-12);
    CHECK(std::abs(t.left.dot(t.right) - 1.0) < 1e-12);
}

TEST_CASE("Case I: residual, trace and small increments") {
    const BuiltCase bc = build_case(load_config(EIMNET_TESTCASE, "case1"));
    const Mode m = case_mode(bc);
    CHECK(m.unstable());
    CHECK(m.residual < 1e-8);
    const CMatrix i_plus_l = CMatrix::Identity(8, 8) + loop_gain(bc.ein).eval(m.s);
    const Eigen::JacobiSVD<CMatrix> svd(i_plus_l);
    CHECK(svd.singularValues()(7) / svd.singularValues()(0) < 1e-8);

    const ModeReport rep = analyze_mode(bc.ein, m, 1e-4);
    CHECK(rep.pf_trace_error < 1e-9);
    REQUIRE_FALSE(rep.z_validation.empty());
    for (const auto& row : rep.z_validation) {
        if (std::abs(row.actual) == 0.0) continue;
        INFO(row.entry.label);
        CHECK_FALSE(row.track_lost);
        CHECK(row.error < 1e-3);
    }
    CHECK(rep.y_sensitivity.size() == 2 * 16);
}

}
