#include "eimnet/eig.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <numbers>

using namespace eimnet;
using namespace testutil;

namespace {

double displacement(const CMatrix& v, Index row, const std::array<Index, 3>& perm) {
    double d = 0.0;
    for (Index k = 0; k < 3; ++k) d += std::abs(v(row + 1, perm[static_cast<std::size_t>(k)]) - v(row, k));
    return d;
}

}  // namespace

TEST_SUITE("eig") {

TEST_CASE("identity") {
    const EigenDecomposition d = eig_lr(Eigen::Matrix3d::Identity());
    for (Index k = 0; k < 3; ++k) CHECK(std::abs(d.values(k) - 1.0) < 1e-15);
    CHECK(rel_err(CMatrix(d.left * d.right), CMatrix(CMatrix::Identity(3, 3))) < 1e-15);
}

TEST_CASE("diagonal matrix gives unit basis vectors") {
    Eigen::Matrix2d a;
    a << 2.0, 0.0, 0.0, 5.0;
    const EigenDecomposition d = eig_lr(a);
    for (Index k = 0; k < 2; ++k) {
        const Index axis = std::abs(d.values(k) - 2.0) < 1e-12 ? 0 : 1;
        CHECK(std::abs(d.values(k) - (axis == 0 ? 2.0 : 5.0)) < 1e-12);
        CHECK(std::abs(std::abs(d.right(axis, k)) - 1.0) < 1e-12);
        CHECK(std::abs(d.participation(k)(axis, axis) - 1.0) < 1e-12);
    }
}

TEST_CASE("left eigenvectors are bi-orthonormal on random matrices") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix a = random_matrix(rng, 8, 8);
        const EigenDecomposition d = eig_lr(a);
        CHECK(rel_err(CMatrix(d.left * d.right), CMatrix(CMatrix::Identity(8, 8))) < 1e-8);
        for (Index k = 0; k < 8; ++k) {
            CHECK((a * d.right.col(k) - d.values(k) * d.right.col(k)).norm() < 1e-10 * a.norm());
            CHECK((d.left.row(k) * a - d.values(k) * d.left.row(k)).norm() < 1e-8 * a.norm() * d.left.row(k).norm());
        }
    }
}

TEST_CASE("defective matrix is rejected") {
    Eigen::Matrix2d jordan;
    jordan << 1.0, 1.0, 0.0, 1.0;
    CHECK_THROWS_AS(eig_lr(jordan), DefectiveMatrix);
}

TEST_CASE("integrator locus") {
    const std::vector<double> f = {0.5, 1.0, 7.0};
    const EigenLoci loci = eig_loci(TransferMatrix::integrator(), f);
    REQUIRE(loci.traces() == 1);
    for (std::size_t i = 0; i < loci.freqs_hz.size(); ++i) {
        const cplx expect(0.0, -1.0 / (2.0 * std::numbers::pi * loci.freqs_hz[i]));
        CHECK(rel_err(loci.values(static_cast<Index>(i), 0), expect) < 1e-14);
    }
}

TEST_CASE("distinct magnitudes are never swapped") {
    const TransferMatrix g = TransferMatrix::rational({1.0}, {1.0, 1.0});
    const TransferMatrix m = blkdiag({g, cplx(2.0) * g});
    const EigenLoci loci = eig_loci(m, {0.1, 0.2});
    REQUIRE(loci.traces() == 2);
    const double ratio0 = std::abs(loci.values(0, 1) / loci.values(0, 0));
    for (Index i = 0; i < loci.values.rows(); ++i)
        CHECK(std::abs(std::abs(loci.values(i, 1) / loci.values(i, 0)) - ratio0) < 1e-12);
}

TEST_CASE("near crossing of s and 1 - s stays assigned") {
    // Hide the diagonal structure behind a fixed similarity so the solver order is arbitrary.
    CMatrix q(2, 2);
    q << 1.0, 0.4, -0.3, 1.2;
    const TransferMatrix tq = TransferMatrix::constant(q), tqi = TransferMatrix::constant(q.inverse());
    CMatrix e0 = CMatrix::Zero(2, 2), e1 = CMatrix::Zero(2, 2);
    e0(0, 0) = 1.0;
    e1(1, 1) = 1.0;
    const TransferMatrix d = TransferMatrix::s() * TransferMatrix::constant(e0) +
                             (TransferMatrix::scalar(1.0) - TransferMatrix::s()) * TransferMatrix::constant(e1);
    const TransferMatrix m = tq * d * tqi;
    // On the j-omega axis the traces come closest at low frequency, where both are near 0.5 in magnitude.
    const EigenLoci loci = eig_loci(m, log_grid(0.01, 1.0, 60));
    for (Index i = 0; i < loci.values.rows(); ++i) {
        const cplx s(0.0, 2.0 * std::numbers::pi * loci.freqs_hz[static_cast<std::size_t>(i)]);
        const Index a = std::abs(loci.values(0, 0) - cplx(0.0, 2.0 * std::numbers::pi * 0.01)) < 1e-9 ? 0 : 1;
        CHECK(std::abs(loci.values(i, a) - s) < 1e-9);
        CHECK(std::abs(loci.values(i, 1 - a) - (1.0 - s)) < 1e-9);
        if (i + 1 < loci.values.rows()) {
            const double kept = std::abs(loci.values(i + 1, 0) - loci.values(i, 0)) +
                                std::abs(loci.values(i + 1, 1) - loci.values(i, 1));
            const double swapped = std::abs(loci.values(i + 1, 1) - loci.values(i, 0)) +
                                   std::abs(loci.values(i + 1, 0) - loci.values(i, 1));
            CHECK(kept <= swapped);
        }
    }
}

TEST_CASE("traces of smooth 3x3 families are permutation-minimal") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const TransferMatrix m = TransferMatrix::constant(random_matrix(rng, 3, 3)) +
                                 TransferMatrix::rational({1.0}, {1.0, 2.0}) * TransferMatrix::constant(random_matrix(rng, 3, 3)) +
                                 TransferMatrix::s() * TransferMatrix::constant(0.05 * random_matrix(rng, 3, 3));
        const EigenLoci loci = eig_loci(m, log_grid(0.05, 20.0, 80));
        for (Index i = 0; i + 1 < loci.values.rows(); ++i) {
            std::array<Index, 3> perm = {0, 1, 2};
            const double kept = displacement(loci.values, i, perm);
            double best = kept;
            do {
                best = std::min(best, displacement(loci.values, i, perm));
            } while (std::next_permutation(perm.begin(), perm.end()));
            CHECK(kept <= best * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("matching pairs nearest values") {
    CVector prev(3), next(3);
    prev << 1.0, cplx(0.0, 1.0), -2.0;
    next << -2.1, 1.05, cplx(0.0, 0.9);
    const auto perm = match_eigenvalues(prev, next);
    CHECK(perm == std::vector<Index>{1, 2, 0});
}

TEST_CASE("log grid endpoints") {
    const auto g = log_grid(0.5, 1000.0, 7);
    REQUIRE(g.size() == 7);
    CHECK(g.front() == doctest::Approx(0.5));
    CHECK(g.back() == doctest::Approx(1000.0));
    CHECK(g[3] * g[3] == doctest::Approx(g[2] * g[4]));
}

}
