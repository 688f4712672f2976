#include "eimnet/errors.hpp"
#include "eimnet/lti.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace eimnet;
using namespace testutil;

TEST_SUITE("lti") {

TEST_CASE("pi block at s = j") {
    const CMatrix v = TransferMatrix::pi(1.0, 1.0).eval(kJ);
    CHECK(std::abs(v(0, 0) - cplx(1.0, -1.0)) < 1e-15);
}

TEST_CASE("zero delay is unity") {
    for (cplx s : {cplx(0.0, 1.0), cplx(-3.0, 700.0), cplx(2.0, 0.0)})
        CHECK(std::abs(TransferMatrix::delay(0.0).eval(s)(0, 0) - 1.0) == 0.0);
}

TEST_CASE("delay is the exact exponential") {
    const cplx s(0.5, 2.0 * 3.141592653589793 * 400.0);
    const cplx expect = std::exp(-s * 3e-4);
    CHECK(rel_err(TransferMatrix::delay(3e-4).eval(s)(0, 0), expect) < 1e-14);
}

TEST_CASE("constant ignores s") {
    CMatrix k(2, 2);
    k << 1.0, cplx(2.0, -1.0), 0.5, -4.0;
    CHECK(TransferMatrix::constant(k).eval(cplx(0.0, 100.0)) == k);
}

TEST_CASE("rational coefficients run from the highest power") {
    // (2s + 3) / (s^2 + s + 5)
    const TransferMatrix g = TransferMatrix::rational({2.0, 3.0}, {1.0, 1.0, 5.0});
    const cplx s(0.3, 7.0);
    CHECK(rel_err(g.eval(s)(0, 0), (2.0 * s + 3.0) / (s * s + s + 5.0)) < 1e-14);
}

TEST_CASE("evaluation distributes over composition") {
    std::mt19937 rng(7);
    const CMatrix ka = random_matrix(rng, 3, 3), kb = random_matrix(rng, 3, 3), kc = random_matrix(rng, 3, 2);
    const TransferMatrix g = TransferMatrix::rational({1.0, 2.0}, {1.0, 3.0, 40.0});
    const TransferMatrix d = TransferMatrix::delay(2e-4);
    const TransferMatrix a = TransferMatrix::constant(ka) * g + TransferMatrix::s() * TransferMatrix::identity(3);
    const TransferMatrix b = d * TransferMatrix::constant(kb) - TransferMatrix::pi(0.3, 20.0) * TransferMatrix::identity(3);
    const TransferMatrix c = TransferMatrix::constant(kc);

    const TransferMatrix prod = a * b, sum = a + b, inv = inverse(a), diag = blkdiag({a, g});
    const TransferMatrix stacked = hcat({a, c}), tall = vcat({b, TransferMatrix::constant(kc.transpose())});
    const TransferMatrix scaled = cplx(2.0, -1.0) * b;
    for (int k = 0; k < 100; ++k) {
        const cplx s = random_s(rng);
        const CMatrix ea = a.eval(s), eb = b.eval(s), ec = c.eval(s);
        CHECK(rel_err(prod.eval(s), CMatrix(ea * eb)) < 1e-12);
        CHECK(rel_err(sum.eval(s), CMatrix(ea + eb)) < 1e-12);
        CHECK(rel_err(inv.eval(s), CMatrix(ea.inverse())) < 1e-12);
        CHECK(rel_err(scaled.eval(s), CMatrix(cplx(2.0, -1.0) * eb)) < 1e-12);

        CMatrix bd = CMatrix::Zero(4, 4);
        bd.topLeftCorner(3, 3) = ea;
        bd(3, 3) = g.eval(s)(0, 0);
        CHECK(rel_err(diag.eval(s), bd) < 1e-12);

        CMatrix h(3, 5);
        h << ea, ec;
        CHECK(rel_err(stacked.eval(s), h) < 1e-12);
        CMatrix v(5, 3);
        v << eb, kc.transpose();
        CHECK(rel_err(tall.eval(s), v) < 1e-12);
    }
}

TEST_CASE("evaluation is pure") {
    const TransferMatrix m = inverse(TransferMatrix::s() * TransferMatrix::identity(2) +
                                     TransferMatrix::constant(CMatrix::Constant(2, 2, cplx(1.0, 1.0))));
    const cplx s(0.1, 30.0);
    CHECK(m.eval(s) == m.eval(s));
}

TEST_CASE("block selectors") {
    std::mt19937 rng(3);
    const CMatrix k = random_matrix(rng, 4, 4);
    const TransferMatrix m = TransferMatrix::constant(k) * TransferMatrix::integrator();
    const cplx s(0.0, 5.0);
    const CMatrix full = m.eval(s);
    CHECK(rel_err(rows_of(m, 1, 2).eval(s), CMatrix(full.middleRows(1, 2))) < 1e-15);
    CHECK(rel_err(cols_of(m, 3, 1).eval(s), CMatrix(full.col(3))) < 1e-15);
    CHECK(rel_err(block_of(m, 1, 1, 2, 2).eval(s), CMatrix(full.block(1, 1, 2, 2))) < 1e-15);
}

TEST_CASE("shapes are checked when built") {
    const TransferMatrix a = TransferMatrix::zero(2, 3), b = TransferMatrix::zero(2, 2);
    CHECK_THROWS_AS(a * b, DimensionMismatch);
    CHECK_THROWS_AS(a + b, DimensionMismatch);
    CHECK_THROWS_AS(inverse(a), DimensionMismatch);
    CHECK_THROWS_AS(vcat({a, TransferMatrix::zero(1, 2)}), DimensionMismatch);
    // 1x1 broadcasts as a scalar
    CHECK((TransferMatrix::scalar(2.0) * a).rows() == 2);
}

TEST_CASE("singular inversion raises SingularAtS") {
    const TransferMatrix m = inverse(TransferMatrix::s());
    CHECK_THROWS_AS(m.eval(cplx(0.0, 0.0)), SingularAtS);

    CMatrix k(2, 2);
    k << 1.0, 2.0, 2.0, 4.0;
    CHECK_THROWS_AS(inverse(TransferMatrix::constant(k)).eval(cplx(0.0, 1.0)), SingularAtS);
}

TEST_CASE("badly scaled but regular inverse") {
    // Rows and columns spanning twelve decades still invert cleanly.
    CMatrix k(2, 2);
    k << 4e9, 1.0, 1.0, 1e-3;
    const CMatrix inv = inverse(TransferMatrix::constant(k)).eval(kJ);
    CHECK(rel_err(CMatrix(k * inv), CMatrix(CMatrix::Identity(2, 2))) < 1e-12);
}

}
