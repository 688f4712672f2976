#include "eimnet/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eimnet {

std::vector<Index> match_eigenvalues(const CVector& prev, const CVector& next) {
    const Index n = prev.size();
    if (next.size() != n) throw DimensionMismatch("eigenvalue sets of different size");
    struct Pair {
        double dist;
        Index i, j;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(n * n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) pairs.push_back({std::abs(prev(i) - next(j)), i, j});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });

    std::vector<Index> perm(static_cast<std::size_t>(n), -1);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    Index assigned = 0;
    for (const auto& p : pairs) {
        if (assigned == n) break;
        if (perm[static_cast<std::size_t>(p.i)] >= 0 || used[static_cast<std::size_t>(p.j)]) continue;
        perm[static_cast<std::size_t>(p.i)] = p.j;
        used[static_cast<std::size_t>(p.j)] = true;
        ++assigned;
    }
    return perm;
}

std::vector<double> log_grid(double f_min, double f_max, int n) {
    if (!(f_min > 0.0) || !(f_max > f_min) || n < 2) throw std::invalid_argument("log_grid: need 0 < f_min < f_max, n >= 2");
    std::vector<double> out(static_cast<std::size_t>(n));
    const double a = std::log(f_min), b = std::log(f_max);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    out.front() = f_min;
    out.back() = f_max;
    return out;
}

namespace {

CVector eigenvalues_at(const TransferMatrix& m, double f, const EvalOptions& opts) {
    const cplx s{0.0, 2.0 * std::numbers::pi * f};
    // SingularAtS already carries s = j 2 pi f.
    const CMatrix a = m.eval(s, opts);
    Eigen::ComplexEigenSolver<CMatrix> solver(a, false);
    if (solver.info() != Eigen::Success) {
        DefectiveMatrix e(INFINITY);
        e.frequency_hz = f;
        throw e;
    }
    return solver.eigenvalues();
}

bool step_too_large(const CVector& prev, const CVector& next, double threshold) {
    const double scale = prev.cwiseAbs().maxCoeff();
    for (Index i = 0; i < prev.size(); ++i) {
        const double local = std::max(std::abs(prev(i)), 1e-6 * scale + 1e-300);
        if (std::abs(next(i) - prev(i)) > threshold * local) return true;
    }
    return false;
}

CVector permuted(const CVector& v, const std::vector<Index>& perm) {
    CVector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out(i) = v(perm[static_cast<std::size_t>(i)]);
    return out;
}

// Appends the matched eigenvalues on (f0, f1] to the trace lists, bisecting when the step is large.
void advance(const TransferMatrix& m, double f0, const CVector& v0, double f1, const CVector& raw1,
             const EigenLociOptions& opts, int depth, std::vector<double>& fs, std::vector<CVector>& vs) {
    CVector v1 = permuted(raw1, match_eigenvalues(v0, raw1));
    if (depth < opts.max_bisect_depth && step_too_large(v0, v1, opts.bisect_threshold)) {
        const double fm = 0.5 * (f0 + f1);
        const CVector rawm = eigenvalues_at(m, fm, opts.eval);
        advance(m, f0, v0, fm, rawm, opts, depth + 1, fs, vs);
        const CVector vm = vs.back();
        advance(m, fm, vm, f1, raw1, opts, depth + 1, fs, vs);
        return;
    }
    fs.push_back(f1);
    vs.push_back(v1);
}

}  // namespace

EigenLoci eig_loci(const TransferMatrix& m, const std::vector<double>& grid_hz, const EigenLociOptions& opts) {
    if (m.rows() != m.cols()) throw DimensionMismatch("eig_loci needs a square transfer matrix");
    if (grid_hz.size() < 2) throw std::invalid_argument("eig_loci: grid needs at least 2 points");
    for (std::size_t i = 1; i < grid_hz.size(); ++i)
        if (!(grid_hz[i] > grid_hz[i - 1])) throw std::invalid_argument("eig_loci: grid must be strictly increasing");

    std::vector<CVector> raw;
    raw.reserve(grid_hz.size());
    for (double f : grid_hz) raw.push_back(eigenvalues_at(m, f, opts.eval));

    std::vector<double> fs{grid_hz.front()};
    std::vector<CVector> vs{raw.front()};
    for (std::size_t i = 1; i < grid_hz.size(); ++i) {
        const CVector prev = vs.back();
        advance(m, fs.back(), prev, grid_hz[i], raw[i], opts, 0, fs, vs);
    }

    EigenLoci out;
    out.freqs_hz = std::move(fs);
    out.values.resize(static_cast<Index>(vs.size()), m.rows());
    for (std::size_t i = 0; i < vs.size(); ++i) out.values.row(static_cast<Index>(i)) = vs[i].transpose();
    return out;
}

}  // namespace eimnet
