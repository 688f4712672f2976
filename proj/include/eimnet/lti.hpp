#pragma once

// Matrix-valued functions of the complex frequency s.
//
// A TransferMatrix is an immutable expression tree. Leaves are constant
// complex matrices, scalar rational blocks p(s)/q(s) and pure delays e^{-sT};
// interior nodes are sums, products, block stacking and inversion. Shapes are
// checked when the expression is built; eval() only does arithmetic.

#include <Eigen/Dense>

#include <complex>
#include <initializer_list>
#include <memory>
#include <vector>

namespace eimnet {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr cplx kJ{0.0, 1.0};

struct EvalOptions {
    /// Inversions whose condition number (after row/column equilibration) exceeds this cap raise SingularAtS.
    double condition_cap = 1e12;
};

namespace detail {
struct Node;
}

class TransferMatrix {
public:
    /// 1x1 zero.
    TransferMatrix();

    static TransferMatrix constant(CMatrix k);
    static TransferMatrix scalar(cplx value);
    static TransferMatrix zero(Index rows, Index cols);
    static TransferMatrix identity(Index n);
    /// p(s)/q(s); coefficients are ordered from the highest power down.
    static TransferMatrix rational(std::vector<double> num, std::vector<double> den);
    /// The Laplace variable s itself.
    static TransferMatrix s();
    static TransferMatrix integrator();
    /// kp + ki/s
    static TransferMatrix pi(double kp, double ki);
    static TransferMatrix delay(double seconds);

    Index rows() const;
    Index cols() const;

    CMatrix eval(cplx s, const EvalOptions& opts = {}) const;

    TransferMatrix inverse() const;

    friend TransferMatrix operator+(const TransferMatrix& a, const TransferMatrix& b);
    friend TransferMatrix operator-(const TransferMatrix& a, const TransferMatrix& b);
    friend TransferMatrix operator-(const TransferMatrix& a);
    /// Matrix product; a 1x1 operand on either side broadcasts as a scalar.
    friend TransferMatrix operator*(const TransferMatrix& a, const TransferMatrix& b);
    friend TransferMatrix operator*(cplx k, const TransferMatrix& a);

    const detail::Node& node() const { return *node_; }

private:
    explicit TransferMatrix(std::shared_ptr<const detail::Node> node);
    std::shared_ptr<const detail::Node> node_;

    friend TransferMatrix blkdiag(const std::vector<TransferMatrix>& parts);
    friend TransferMatrix hcat(const std::vector<TransferMatrix>& parts);
    friend TransferMatrix vcat(const std::vector<TransferMatrix>& parts);
};

TransferMatrix blkdiag(const std::vector<TransferMatrix>& parts);
TransferMatrix hcat(const std::vector<TransferMatrix>& parts);
TransferMatrix vcat(const std::vector<TransferMatrix>& parts);

inline TransferMatrix inverse(const TransferMatrix& m) { return m.inverse(); }
inline CMatrix eval(const TransferMatrix& m, cplx s, const EvalOptions& opts = {}) { return m.eval(s, opts); }

/// Rows [first, first+count) of m, built as a constant selector product.
TransferMatrix rows_of(const TransferMatrix& m, Index first, Index count);
/// Columns [first, first+count) of m.
TransferMatrix cols_of(const TransferMatrix& m, Index first, Index count);
/// Sub-block of m.
TransferMatrix block_of(const TransferMatrix& m, Index row, Index col, Index rows, Index cols);

}  // namespace eimnet
