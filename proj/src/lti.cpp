#include "eimnet/lti.hpp"

#include "eimnet/errors.hpp"

#include <cmath>
#include <string>
#include <variant>

namespace eimnet {
namespace detail {

struct Constant {
    CMatrix value;
};
struct Rational {
    std::vector<double> num;
    std::vector<double> den;
};
struct Delay {
    double seconds;
};
struct Sum {
    TransferMatrix a, b;
};
struct Product {
    TransferMatrix a, b;
};
struct Stack {
    enum class Kind { diagonal, horizontal, vertical } kind;
    std::vector<TransferMatrix> parts;
};
struct Inverse {
    TransferMatrix a;
};

struct Node {
    Index rows;
    Index cols;
    std::variant<Constant, Rational, Delay, Sum, Product, Stack, Inverse> expr;
};

}  // namespace detail

namespace {

using detail::Node;

cplx horner(const std::vector<double>& c, cplx s) {
    cplx acc{0.0, 0.0};
    for (double v : c) acc = acc * s + v;
    return acc;
}

bool all_finite(const CMatrix& m) {
    return m.allFinite();
}

CMatrix eval_node(const Node& n, cplx s, const EvalOptions& opts);

struct Evaluator {
    cplx s;
    const EvalOptions& opts;
    const Node& self;

    CMatrix operator()(const detail::Constant& c) const { return c.value; }

    CMatrix operator()(const detail::Rational& r) const {
        const cplx q = horner(r.den, s);
        const cplx p = horner(r.num, s);
        const double scale = std::max(std::abs(p), 1.0);
        if (std::abs(q) == 0.0 || std::abs(q) * opts.condition_cap < scale)
            throw SingularAtS(s, std::abs(q) == 0.0 ? INFINITY : scale / std::abs(q));
        return CMatrix::Constant(1, 1, p / q);
    }

    CMatrix operator()(const detail::Delay& d) const {
        return CMatrix::Constant(1, 1, std::exp(-s * d.seconds));
    }

    CMatrix operator()(const detail::Sum& x) const {
        return x.a.eval(s, opts) + x.b.eval(s, opts);
    }

    CMatrix operator()(const detail::Product& x) const {
        CMatrix a = x.a.eval(s, opts);
        CMatrix b = x.b.eval(s, opts);
        if (a.cols() == b.rows()) return a * b;
        if (a.size() == 1) return a(0, 0) * b;
        return b(0, 0) * a;
    }

    CMatrix operator()(const detail::Stack& x) const {
        CMatrix out = CMatrix::Zero(self.rows, self.cols);
        Index r = 0, c = 0;
        for (const auto& part : x.parts) {
            CMatrix v = part.eval(s, opts);
            out.block(r, c, v.rows(), v.cols()) = v;
            if (x.kind != detail::Stack::Kind::horizontal) r += v.rows();
            if (x.kind != detail::Stack::Kind::vertical) c += v.cols();
        }
        return out;
    }

    CMatrix operator()(const detail::Inverse& x) const {
        CMatrix a = x.a.eval(s, opts);
        // Row then column equilibration, so mixed physical units do not read as ill-conditioning.
        Eigen::VectorXd dr = a.cwiseAbs().rowwise().maxCoeff();
        if (!(dr.minCoeff() > 0.0)) throw SingularAtS(s, INFINITY);
        dr = dr.cwiseInverse();
        const CMatrix ar = dr.asDiagonal() * a;
        Eigen::VectorXd dc = ar.cwiseAbs().colwise().maxCoeff().transpose();
        if (!(dc.minCoeff() > 0.0)) throw SingularAtS(s, INFINITY);
        dc = dc.cwiseInverse();
        Eigen::PartialPivLU<CMatrix> lu(ar * dc.asDiagonal());
        const double rcond = lu.rcond();
        if (!(rcond > 0.0) || 1.0 / rcond > opts.condition_cap)
            throw SingularAtS(s, rcond > 0.0 ? 1.0 / rcond : INFINITY);
        return dc.asDiagonal() * lu.inverse() * dr.asDiagonal();
    }
};

CMatrix eval_node(const Node& n, cplx s, const EvalOptions& opts) {
    CMatrix out = std::visit(Evaluator{s, opts, n}, n.expr);
    if (!all_finite(out)) throw SingularAtS(s, INFINITY);
    return out;
}

std::string shape(const TransferMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

TransferMatrix::TransferMatrix() : TransferMatrix(zero(1, 1)) {}

TransferMatrix::TransferMatrix(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}

TransferMatrix TransferMatrix::constant(CMatrix k) {
    const Index r = k.rows(), c = k.cols();
    if (r == 0 || c == 0) throw DimensionMismatch("constant block must be non-empty");
    return TransferMatrix(std::make_shared<const Node>(Node{r, c, detail::Constant{std::move(k)}}));
}

TransferMatrix TransferMatrix::scalar(cplx value) {
    return constant(CMatrix::Constant(1, 1, value));
}

TransferMatrix TransferMatrix::zero(Index rows, Index cols) {
    return constant(CMatrix::Zero(rows, cols));
}

TransferMatrix TransferMatrix::identity(Index n) {
    return constant(CMatrix::Identity(n, n));
}

TransferMatrix TransferMatrix::rational(std::vector<double> num, std::vector<double> den) {
    if (num.empty() || den.empty()) throw DimensionMismatch("rational block needs coefficients");
    bool nonzero_den = false;
    for (double d : den) nonzero_den = nonzero_den || d != 0.0;
    if (!nonzero_den) throw DimensionMismatch("rational block has zero denominator");
    return TransferMatrix(std::make_shared<const Node>(Node{1, 1, detail::Rational{std::move(num), std::move(den)}}));
}

TransferMatrix TransferMatrix::s() { return rational({1.0, 0.0}, {1.0}); }

TransferMatrix TransferMatrix::integrator() { return rational({1.0}, {1.0, 0.0}); }

TransferMatrix TransferMatrix::pi(double kp, double ki) { return rational({kp, ki}, {1.0, 0.0}); }

TransferMatrix TransferMatrix::delay(double seconds) {
    if (seconds < 0.0) throw DimensionMismatch("delay must be non-negative");
    return TransferMatrix(std::make_shared<const Node>(Node{1, 1, detail::Delay{seconds}}));
}

Index TransferMatrix::rows() const { return node_->rows; }
Index TransferMatrix::cols() const { return node_->cols; }

CMatrix TransferMatrix::eval(cplx s, const EvalOptions& opts) const { return eval_node(*node_, s, opts); }

TransferMatrix TransferMatrix::inverse() const {
    if (rows() != cols()) throw DimensionMismatch("inverse of non-square " + shape(*this));
    return TransferMatrix(std::make_shared<const Node>(Node{rows(), cols(), detail::Inverse{*this}}));
}

TransferMatrix operator+(const TransferMatrix& a, const TransferMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("sum of " + shape(a) + " and " + shape(b));
    return TransferMatrix(std::make_shared<const Node>(Node{a.rows(), a.cols(), detail::Sum{a, b}}));
}

TransferMatrix operator-(const TransferMatrix& a) { return cplx{-1.0, 0.0} * a; }

TransferMatrix operator-(const TransferMatrix& a, const TransferMatrix& b) { return a + (-b); }

TransferMatrix operator*(const TransferMatrix& a, const TransferMatrix& b) {
    Index r, c;
    if (a.cols() == b.rows()) {
        r = a.rows();
        c = b.cols();
    } else if (a.rows() == 1 && a.cols() == 1) {
        r = b.rows();
        c = b.cols();
    } else if (b.rows() == 1 && b.cols() == 1) {
        r = a.rows();
        c = a.cols();
    } else {
        throw DimensionMismatch("product of " + shape(a) + " and " + shape(b));
    }
    return TransferMatrix(std::make_shared<const Node>(Node{r, c, detail::Product{a, b}}));
}

TransferMatrix operator*(cplx k, const TransferMatrix& a) { return TransferMatrix::scalar(k) * a; }

TransferMatrix blkdiag(const std::vector<TransferMatrix>& parts) {
    if (parts.empty()) throw DimensionMismatch("blkdiag of nothing");
    Index r = 0, c = 0;
    for (const auto& p : parts) {
        r += p.rows();
        c += p.cols();
    }
    return TransferMatrix(std::make_shared<const detail::Node>(
        detail::Node{r, c, detail::Stack{detail::Stack::Kind::diagonal, parts}}));
}

TransferMatrix hcat(const std::vector<TransferMatrix>& parts) {
    if (parts.empty()) throw DimensionMismatch("hcat of nothing");
    Index c = 0;
    for (const auto& p : parts) {
        if (p.rows() != parts.front().rows())
            throw DimensionMismatch("hcat row mismatch: " + shape(parts.front()) + " vs " + shape(p));
        c += p.cols();
    }
    return TransferMatrix(std::make_shared<const detail::Node>(
        detail::Node{parts.front().rows(), c, detail::Stack{detail::Stack::Kind::horizontal, parts}}));
}

TransferMatrix vcat(const std::vector<TransferMatrix>& parts) {
    if (parts.empty()) throw DimensionMismatch("vcat of nothing");
    Index r = 0;
    for (const auto& p : parts) {
        if (p.cols() != parts.front().cols())
            throw DimensionMismatch("vcat column mismatch: " + shape(parts.front()) + " vs " + shape(p));
        r += p.rows();
    }
    return TransferMatrix(std::make_shared<const detail::Node>(
        detail::Node{r, parts.front().cols(), detail::Stack{detail::Stack::Kind::vertical, parts}}));
}

TransferMatrix rows_of(const TransferMatrix& m, Index first, Index count) {
    return block_of(m, first, 0, count, m.cols());
}

TransferMatrix cols_of(const TransferMatrix& m, Index first, Index count) {
    return block_of(m, 0, first, m.rows(), count);
}

TransferMatrix block_of(const TransferMatrix& m, Index row, Index col, Index rows, Index cols) {
    if (row < 0 || col < 0 || rows <= 0 || cols <= 0 || row + rows > m.rows() || col + cols > m.cols())
        throw DimensionMismatch("block out of range of " + shape(m));
    CMatrix left = CMatrix::Zero(rows, m.rows());
    left.block(0, row, rows, rows) = CMatrix::Identity(rows, rows);
    CMatrix right = CMatrix::Zero(m.cols(), cols);
    right.block(col, 0, cols, cols) = CMatrix::Identity(cols, cols);
    return TransferMatrix::constant(left) * m * TransferMatrix::constant(right);
}

}  // namespace eimnet
