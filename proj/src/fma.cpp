#include "eimnet/fma.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace eimnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Tracked {
    TrackedEigen eig;
    double best = 0.0;    ///< expansion share of the chosen eigenvector
    double second = 0.0;  ///< runner-up share
};

// Picks the eigenvector carrying the largest share of `ref` when `ref` is expanded in the
// new eigenbasis (T ref, unit-norm columns of R). Plain overlaps mislead for a non-normal L,
// where distinct eigenvectors can be nearly parallel.
Tracked track(const CMatrix& l, const CVector& ref, double cap) {
    const EigenDecomposition d = eig_lr(l, cap);
    const CVector coeff = d.left * ref;
    const double total = coeff.cwiseAbs().sum();
    Index k = 0;
    Tracked out;
    for (Index i = 0; i < d.size(); ++i) {
        const double o = total > 0.0 ? std::abs(coeff(i)) / total : 0.0;
        if (o > out.best) {
            out.second = out.best;
            out.best = o;
            k = i;
        } else if (o > out.second) {
            out.second = o;
        }
    }
    out.eig = {d.values(k), d.right.col(k), d.left.row(k).transpose()};
    return out;
}

// Closest eigenvalue to lambda0, used once to pick the trace a Newton run starts on.
TrackedEigen nearest(const CMatrix& l, cplx lambda0, double cap) {
    const EigenDecomposition d = eig_lr(l, cap);
    Index k = 0;
    (d.values.array() - lambda0).abs().minCoeff(&k);
    return {d.values(k), d.right.col(k), d.left.row(k).transpose()};
}

cplx dlambda_ds(const TransferMatrix& lg, cplx s, const CVector& ref, const EvalOptions& eval) {
    const double h = std::max(std::abs(s), 1e-3) * 1e-6;
    const cplx lp = track(lg.eval(s + h, eval), ref, eval.condition_cap).eig.lambda;
    const cplx lm = track(lg.eval(s - h, eval), ref, eval.condition_cap).eig.lambda;
    return (lp - lm) / (2.0 * h);
}

}  // namespace

double Mode::frequency_hz() const { return s.imag() / kTwoPi; }

double Mode::damping_ratio() const {
    const double m = std::abs(s);
    return m > 0.0 ? -s.real() / m : 0.0;
}

bool ModeSearchResult::stable() const {
    return std::none_of(modes.begin(), modes.end(), [](const Mode& m) { return m.unstable(); });
}

TrackedEigen track_eigenvalue(const CMatrix& l, const CVector& reference_right, double condition_cap) {
    return track(l, reference_right, condition_cap).eig;
}

Mode refine_mode(const TransferMatrix& lg, cplx s0, cplx lambda0, const ModeSearchOptions& opts) {
    if (lg.rows() != lg.cols()) throw DimensionMismatch("loop gain must be square");
    TrackedEigen cur = nearest(lg.eval(s0, opts.eval), lambda0, opts.eval.condition_cap);
    cplx s = s0;
    double res = std::abs(1.0 + cur.lambda);
    int it = 0;
    for (; it < opts.max_iterations && res > opts.newton_tolerance; ++it) {
        const cplx deriv = dlambda_ds(lg, s, cur.right, opts.eval);
        if (!(std::abs(deriv) > 0.0) || !std::isfinite(std::abs(deriv))) throw NewtonDiverged(s);
        const cplx step = -(1.0 + cur.lambda) / deriv;
        double damp = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30 && !accepted; ++k, damp *= 0.5) {
            const cplx trial = s + damp * step;
            try {
                const Tracked t = track(lg.eval(trial, opts.eval), cur.right, opts.eval.condition_cap);
                const double r = std::abs(1.0 + t.eig.lambda);
                if (r < res) {
                    s = trial;
                    cur = t.eig;
                    res = r;
                    accepted = true;
                }
            } catch (const Error&) {
                // singular or defective at the trial point; shorten the step
            }
        }
        if (!accepted) throw NewtonDiverged(s);
    }
    if (res > opts.newton_tolerance) throw NewtonDiverged(s);

    // Report the root with Im(s) >= 0; L is real-rational so the conjugate is also a root.
    if (s.imag() < 0.0) {
        s = std::conj(s);
        const Tracked t = track(lg.eval(s, opts.eval), cur.right.conjugate(), opts.eval.condition_cap);
        cur = t.eig;
        res = std::abs(1.0 + cur.lambda);
    }
    Mode m;
    m.s = s;
    m.lambda = cur.lambda;
    m.right = cur.right;
    m.left = cur.left;
    m.residual = res;
    m.iterations = it;
    return m;
}

ModeSearchResult find_modes(const TransferMatrix& lg, const ModeSearchOptions& opts) {
    if (lg.rows() != lg.cols()) throw DimensionMismatch("loop gain must be square");
    if (!(opts.f_min_hz > 0.0) || !(opts.f_max_hz > opts.f_min_hz))
        throw std::invalid_argument("find_modes: need 0 < f_min < f_max");

    EigenLociOptions lo;
    lo.eval = opts.eval;
    const EigenLoci loci = eig_loci(lg, log_grid(opts.f_min_hz, opts.f_max_hz, opts.grid_points), lo);
    const Index n = static_cast<Index>(loci.freqs_hz.size());

    ModeSearchResult out;
    out.margin = INFINITY;
    std::vector<std::pair<double, cplx>> seeds;  // (f, lambda)
    for (Index k = 0; k < loci.traces(); ++k) {
        auto dist = [&](Index i) { return std::abs(1.0 + loci.values(i, k)); };
        for (Index i = 0; i < n; ++i) {
            const double d = dist(i);
            if (d < out.margin) {
                out.margin = d;
                out.margin_frequency_hz = loci.freqs_hz[static_cast<std::size_t>(i)];
            }
            if (d >= opts.capture_radius) continue;
            const bool left_ok = i == 0 || d <= dist(i - 1);
            const bool right_ok = i == n - 1 || d < dist(i + 1);
            if (left_ok && right_ok) seeds.emplace_back(loci.freqs_hz[static_cast<std::size_t>(i)], loci.values(i, k));
        }
    }

    std::optional<NewtonDiverged> failure;
    for (const auto& [f, lambda0] : seeds) {
        Mode m;
        try {
            m = refine_mode(lg, cplx(0.0, kTwoPi * f), lambda0, opts);
        } catch (const NewtonDiverged& e) {
            failure = e;
            continue;
        }
        const bool dup = std::any_of(out.modes.begin(), out.modes.end(), [&](const Mode& o) {
            return std::abs(o.s - m.s) <= 1e-6 * std::max(1.0, std::abs(m.s));
        });
        if (!dup) out.modes.push_back(std::move(m));
    }
    if (out.modes.empty() && failure) throw *failure;
    std::sort(out.modes.begin(), out.modes.end(), [](const Mode& a, const Mode& b) { return a.s.real() > b.s.real(); });
    return out;
}

std::vector<NodeParticipation> node_pf(const CVector& right, const CVector& left, const NodeTable& nodes) {
    if (right.size() != left.size() || right.size() != nodes.total_width())
        throw DimensionMismatch("eigenvector length does not match the node table");
    std::vector<NodeParticipation> out;
    for (const auto& n : nodes.nodes()) {
        const Index off = nodes.offset(n.id);
        cplx sum = 0.0;
        for (int k = 0; k < n.width(); ++k) sum += right(off + k) * left(off + k);
        out.push_back({n.id, sum});
    }
    return out;
}

std::vector<NodeParticipation> node_pf(const CMatrix& l_eval, Index k, const NodeTable& nodes) {
    const EigenDecomposition d = eig_lr(l_eval);
    if (k < 0 || k >= d.size()) throw std::out_of_range("eigenvalue index out of range");
    return node_pf(d.right.col(k), d.left.row(k).transpose(), nodes);
}

ModalContext modal_context(const EinSystem& sys, cplx s, const CVector& reference_right, const EvalOptions& eval) {
    auto [z, y] = per_unit(sys, assemble_znet(sys), assemble_ycon(sys));
    ModalContext ctx;
    ctx.s = s;
    ctx.z = z.eval(s, eval);
    ctx.y = y.eval(s, eval);
    const TrackedEigen t = track_eigenvalue(ctx.z * ctx.y, reference_right, eval.condition_cap);
    ctx.lambda = t.lambda;
    ctx.right = t.right;
    ctx.left = t.left;
    return ctx;
}

ModalContext modal_context(const EinSystem& sys, const Mode& mode, const EvalOptions& eval) {
    return modal_context(sys, mode.s, mode.right, eval);
}

cplx sensitivity_z(const ModalContext& ctx, Index i, Index j) {
    // [Y r t^T]_ji = (Y r)_j t_i
    return (ctx.y.row(j) * ctx.right)(0) * ctx.left(i);
}

cplx sensitivity_y(const ModalContext& ctx, Index i, Index j) {
    // [r t^T Z]_ji = r_j (t^T Z)_i
    return ctx.right(j) * (ctx.left.transpose() * ctx.z.col(i))(0);
}

namespace {

std::string entry_suffix(Index a, Index b) { return "-" + std::to_string(a + 1) + std::to_string(b + 1); }

}  // namespace

std::vector<EntrySensitivity> z_sensitivities(const EinSystem& sys, const ModalContext& ctx) {
    std::vector<EntrySensitivity> out;
    for (const auto& comp : z_components(sys)) {
        const auto& ix = comp.indices;
        const bool scalar = ix.size() == 1;
        for (std::size_t a = 0; a < ix.size(); ++a)
            for (std::size_t b = 0; b < ix.size(); ++b) {
                EntrySensitivity e;
                e.component = comp.label;
                e.label = scalar ? comp.label : comp.label + entry_suffix(static_cast<Index>(a), static_cast<Index>(b));
                e.row = ix[a];
                e.col = ix[b];
                e.value = ctx.z(e.row, e.col);
                e.sensitivity = sensitivity_z(ctx, e.row, e.col);
                out.push_back(std::move(e));
            }
    }
    return out;
}

std::vector<EntrySensitivity> y_sensitivities(const EinSystem& sys, const ModalContext& ctx) {
    std::vector<EntrySensitivity> out;
    for (const auto& comp : y_components(sys)) {
        const bool scalar = comp.rows.size() == 1 && comp.cols.size() == 1;
        for (std::size_t a = 0; a < comp.rows.size(); ++a)
            for (std::size_t b = 0; b < comp.cols.size(); ++b) {
                EntrySensitivity e;
                e.component = comp.label;
                e.label = scalar ? comp.label : comp.label + entry_suffix(static_cast<Index>(a), static_cast<Index>(b));
                e.row = comp.rows[a];
                e.col = comp.cols[b];
                e.value = ctx.y(e.row, e.col);
                e.sensitivity = sensitivity_y(ctx, e.row, e.col);
                out.push_back(std::move(e));
            }
    }
    return out;
}

namespace {

Tracked perturbed(const ModalContext& ctx, char side, Index i, Index j, cplx delta) {
    if (side != 'z' && side != 'y') throw std::invalid_argument("side must be 'z' or 'y'");
    CMatrix z = ctx.z, y = ctx.y;
    (side == 'z' ? z : y)(i, j) += delta;
    return track(z * y, ctx.right, 1e12);
}

// Eigenvalue of the perturbed loop gain by bordered Newton from the base pair,
// with normalisation t^T r = 1. The residual of the base pair is kept as one
// precomputed term, so a central difference cancels it exactly.
cplx perturbed_lambda(const ModalContext& ctx, const CMatrix& l0, const CVector& res0,
                      const Eigen::PartialPivLU<CMatrix>& border, char side, Index i, Index j, cplx delta) {
    const Index n = l0.rows();
    auto dl_times = [&](const CVector& r) {
        CVector out = CVector::Zero(n);
        if (side == 'z')
            out(i) = delta * (ctx.y.row(j) * r)(0);
        else
            out = ctx.z.col(i) * (delta * r(j));
        return out;
    };
    cplx lambda = ctx.lambda;
    CVector r = ctx.right;
    for (int it = 0; it < 6; ++it) {
        const CVector dr = r - ctx.right;
        const cplx dlam = lambda - ctx.lambda;
        CVector rhs(n + 1);
        rhs.head(n) = -(res0 + (l0 * dr - ctx.lambda * dr) - dlam * r + dl_times(r));
        rhs(n) = -((ctx.left.transpose() * r)(0) - 1.0);
        const CVector step = border.solve(rhs);
        r += step.head(n);
        lambda += step(n);
        if (std::abs(step(n)) <= 1e-15 * std::abs(lambda)) break;
    }
    return lambda;
}

}  // namespace

cplx finite_difference_sensitivity(const ModalContext& ctx, char side, Index i, Index j, double step) {
    if (side != 'z' && side != 'y') throw std::invalid_argument("side must be 'z' or 'y'");
    const CMatrix& m = side == 'z' ? ctx.z : ctx.y;
    cplx h = step * m(i, j);
    // Zero entries get an absolute step scaled to the matrix.
    if (std::abs(h) == 0.0) h = step * std::max(m.cwiseAbs().maxCoeff(), 1.0);

    const CMatrix l0 = ctx.z * ctx.y;
    const Index n = l0.rows();
    const CVector res0 = l0 * ctx.right - ctx.lambda * ctx.right;
    CMatrix b = CMatrix::Zero(n + 1, n + 1);
    b.topLeftCorner(n, n) = l0 - ctx.lambda * CMatrix::Identity(n, n);
    b.topRightCorner(n, 1) = -ctx.right;
    b.bottomLeftCorner(1, n) = ctx.left.transpose();
    const Eigen::PartialPivLU<CMatrix> border(b);

    const cplx lp = perturbed_lambda(ctx, l0, res0, border, side, i, j, h);
    const cplx lm = perturbed_lambda(ctx, l0, res0, border, side, i, j, -h);
    return (lp - lm) / (2.0 * h);
}

std::vector<ValidationRow> validate_sensitivity(const ModalContext& ctx, const std::vector<EntrySensitivity>& entries,
                                                char side, double increment) {
    if (!(increment > 0.0) || increment > 0.2) throw std::invalid_argument("increment must be in (0, 0.2]");
    std::vector<ValidationRow> out;
    for (const auto& e : entries) {
        ValidationRow row;
        row.entry = e;
        row.predicted = e.sensitivity * increment * e.value;
        const Tracked t = perturbed(ctx, side, e.row, e.col, increment * e.value);
        row.actual = t.eig.lambda - ctx.lambda;
        // Ambiguous when no eigenvector dominates the expansion of the reference.
        row.track_lost = t.best < 0.5 || t.second > 0.5 * t.best;
        const double mag = std::abs(row.actual);
        row.error = mag > 0.0 ? std::abs(row.predicted - row.actual) / mag : (std::abs(row.predicted) == 0.0 ? 0.0 : INFINITY);
        out.push_back(std::move(row));
    }
    return out;
}

ModeReport analyze_mode(const EinSystem& sys, const Mode& mode, double increment, const EvalOptions& eval) {
    const ModalContext ctx = modal_context(sys, mode, eval);
    ModeReport r;
    r.mode = mode;
    r.node_pf = node_pf(ctx.right, ctx.left, sys.nodes);
    r.pf_trace_error = std::abs((ctx.left.transpose() * ctx.right)(0) - 1.0);
    r.z_sensitivity = z_sensitivities(sys, ctx);
    r.y_sensitivity = y_sensitivities(sys, ctx);
    if (increment > 0.0) r.z_validation = validate_sensitivity(ctx, r.z_sensitivity, 'z', increment);
    return r;
}

}  // namespace eimnet
