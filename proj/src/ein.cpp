#include "eimnet/ein.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace eimnet {

namespace {

using TM = TransferMatrix;

CMatrix selector(Index n, Index offset, Index width) {
    CMatrix e = CMatrix::Zero(n, width);
    e.block(offset, 0, width, width) = CMatrix::Identity(width, width);
    return e;
}

/// E y E^T for a single-node stamp.
TM stamp(const CMatrix& left, const TM& y, const CMatrix& right) {
    return TM::constant(left) * y * TM::constant(right.transpose());
}

}  // namespace

void NodeTable::add(NetworkNode node) {
    if (contains(node.id)) throw std::invalid_argument("duplicate node id " + std::to_string(node.id));
    if (!(node.current_base > 0.0) || !(node.voltage_base > 0.0))
        throw std::invalid_argument("node " + std::to_string(node.id) + ": base values must be > 0");
    auto pos = std::lower_bound(nodes_.begin(), nodes_.end(), node.id,
                                [](const NetworkNode& n, int id) { return n.id < id; });
    nodes_.insert(pos, std::move(node));
}

bool NodeTable::contains(int id) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [id](const NetworkNode& n) { return n.id == id; });
}

const NetworkNode& NodeTable::node(int id) const {
    for (const auto& n : nodes_)
        if (n.id == id) return n;
    throw std::invalid_argument("unknown node id " + std::to_string(id));
}

Index NodeTable::offset(int id) const {
    Index off = 0;
    for (const auto& n : nodes_) {
        if (n.id == id) return off;
        off += n.width();
    }
    throw std::invalid_argument("unknown node id " + std::to_string(id));
}

Index NodeTable::total_width() const {
    Index w = 0;
    for (const auto& n : nodes_) w += n.width();
    return w;
}

TransferMatrix dq_series_rl(double r, double l, double omega1) {
    Eigen::Matrix2d k;
    k << r, -omega1 * l, omega1 * l, r;
    return TM::constant(k.cast<cplx>()) + cplx(l) * (TM::s() * TM::identity(2));
}

TransferMatrix dq_shunt_c(double c, double omega1) {
    Eigen::Matrix2d k;
    k << 0.0, -omega1 * c, omega1 * c, 0.0;
    return TM::constant(k.cast<cplx>()) + cplx(c) * (TM::s() * TM::identity(2));
}

PassiveElement ac_rl_to_ground(std::string label, std::string group, int node, double r, double l, double omega1) {
    return {std::move(label), std::move(group), node, std::nullopt, inverse(dq_series_rl(r, l, omega1))};
}

PassiveElement ac_shunt_c(std::string label, std::string group, int node, double c, double omega1) {
    return {std::move(label), std::move(group), node, std::nullopt, dq_shunt_c(c, omega1)};
}

PassiveElement ac_series_rl(std::string label, std::string group, int a, int b, double r, double l, double omega1) {
    return {std::move(label), std::move(group), a, b, inverse(dq_series_rl(r, l, omega1))};
}

PassiveElement dc_shunt_c(std::string label, std::string group, int node, double c) {
    return {std::move(label), std::move(group), node, std::nullopt, TM::rational({c, 0.0}, {1.0})};
}

PassiveElement dc_shunt_g(std::string label, std::string group, int node, double g) {
    return {std::move(label), std::move(group), node, std::nullopt, TM::scalar(g)};
}

PassiveElement dc_series_rl(std::string label, std::string group, int a, int b, double r, double l) {
    return {std::move(label), std::move(group), a, b, TM::rational({1.0}, {l, r})};
}

void EinSystem::validate() const {
    std::map<int, int> sync_owners;
    for (const auto& conv : converters) {
        auto check = [&](int id, NodeKind kind, const char* what) {
            const auto& n = nodes.node(id);
            if (n.kind != kind)
                throw std::invalid_argument("converter '" + conv.name + "': " + what + " node " + std::to_string(id) +
                                            " has the wrong kind");
        };
        check(conv.sync_node, NodeKind::sync, "sync");
        check(conv.ac_node, NodeKind::ac, "ac");
        check(conv.dc_node, NodeKind::dc, "dc");
        if (++sync_owners[conv.sync_node] > 1)
            throw std::invalid_argument("sync node " + std::to_string(conv.sync_node) + " owned by two converters");
        if (conv.eim.y.rows() != 4 || conv.eim.y.cols() != 4)
            throw std::invalid_argument("converter '" + conv.name + "': EIM must be 4x4");
    }
    for (const auto& n : nodes.nodes())
        if (n.kind == NodeKind::sync && sync_owners[n.id] != 1)
            throw std::invalid_argument("sync node " + std::to_string(n.id) + " has no converter");
    for (const auto& e : elements) {
        const auto& na = nodes.node(e.a);
        if (na.kind == NodeKind::sync) throw std::invalid_argument("element '" + e.label + "' touches a sync node");
        if (e.y.rows() != na.width() || e.y.cols() != na.width())
            throw std::invalid_argument("element '" + e.label + "' width does not match node " + std::to_string(e.a));
        if (e.b) {
            const auto& nb = nodes.node(*e.b);
            if (nb.kind != na.kind) throw std::invalid_argument("element '" + e.label + "' joins nodes of different kinds");
            if (*e.b == e.a) throw std::invalid_argument("element '" + e.label + "' is a self loop");
        }
    }
}

std::vector<Index> converter_port_indices(const EinSystem& sys, const ConverterAttachment& conv) {
    const Index s = sys.nodes.offset(conv.sync_node);
    const Index a = sys.nodes.offset(conv.ac_node);
    const Index d = sys.nodes.offset(conv.dc_node);
    return {s, a, a + 1, d};
}

TransferMatrix assemble_node_admittance(const EinSystem& sys) {
    sys.validate();
    const Index n = sys.nodes.total_width();
    TM total = TM::zero(n, n);
    for (const auto& e : sys.elements) {
        const Index w = e.y.rows();
        const CMatrix ea = selector(n, sys.nodes.offset(e.a), w);
        total = total + stamp(ea, e.y, ea);
        if (e.b) {
            const CMatrix eb = selector(n, sys.nodes.offset(*e.b), w);
            total = total + stamp(eb, e.y, eb) - stamp(ea, e.y, eb) - stamp(eb, e.y, ea);
        }
    }
    for (const auto& conv : sys.converters) {
        const CMatrix es = selector(n, sys.nodes.offset(conv.sync_node), 1);
        total = total + stamp(es, -inverse(conv.eim.z_sync_fo), es);
    }
    return total;
}

TransferMatrix assemble_znet(const EinSystem& sys) { return inverse(assemble_node_admittance(sys)); }

TransferMatrix assemble_ycon(const EinSystem& sys) {
    sys.validate();
    const Index n = sys.nodes.total_width();
    TM total = TM::zero(n, n);
    for (const auto& conv : sys.converters) {
        const auto idx = converter_port_indices(sys, conv);
        CMatrix p = CMatrix::Zero(n, 4);
        for (Index k = 0; k < 4; ++k) p(idx[static_cast<std::size_t>(k)], k) = 1.0;
        total = total + TM::constant(p) * conv.eim.y * TM::constant(p.transpose());
    }
    return total;
}

BaseVectors base_vectors(const EinSystem& sys) {
    const Index n = sys.nodes.total_width();
    BaseVectors b{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (const auto& node : sys.nodes.nodes()) {
        const Index off = sys.nodes.offset(node.id);
        for (int k = 0; k < node.width(); ++k) {
            b.current(off + k) = node.current_base;
            b.voltage(off + k) = node.voltage_base;
        }
    }
    return b;
}

std::pair<TransferMatrix, TransferMatrix> per_unit(const EinSystem& sys, const TransferMatrix& z, const TransferMatrix& y) {
    const BaseVectors b = base_vectors(sys);
    const TM ib = TM::constant(b.current.asDiagonal().toDenseMatrix().cast<cplx>());
    const TM ib_inv = TM::constant(b.current.cwiseInverse().asDiagonal().toDenseMatrix().cast<cplx>());
    const TM ub = TM::constant(b.voltage.asDiagonal().toDenseMatrix().cast<cplx>());
    const TM ub_inv = TM::constant(b.voltage.cwiseInverse().asDiagonal().toDenseMatrix().cast<cplx>());
    return {ub_inv * z * ib, ib_inv * y * ub};
}

TransferMatrix loop_gain(const EinSystem& sys) {
    auto [z, y] = per_unit(sys, assemble_znet(sys), assemble_ycon(sys));
    return z * y;
}

CVector closed_loop_voltage(const EinSystem& sys, const CVector& i_node, cplx s, const EvalOptions& opts) {
    const Index n = sys.nodes.total_width();
    if (i_node.size() != n) throw DimensionMismatch("injection vector has the wrong length");
    const CMatrix z = assemble_znet(sys).eval(s, opts);
    const CMatrix y = assemble_ycon(sys).eval(s, opts);
    const CMatrix a = CMatrix::Identity(n, n) + z * y;
    Eigen::PartialPivLU<CMatrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 0.0) || 1.0 / rcond > opts.condition_cap) throw SingularAtS(s, rcond > 0.0 ? 1.0 / rcond : INFINITY);
    return lu.solve(z * i_node);
}

std::vector<ZComponent> z_components(const EinSystem& sys) {
    sys.validate();
    const auto& nodes = sys.nodes.nodes();
    std::map<int, int> parent;
    for (const auto& n : nodes) parent[n.id] = n.id;
    auto find = [&](int id) {
        while (parent[id] != id) id = parent[id] = parent[parent[id]];
        return id;
    };
    for (const auto& e : sys.elements)
        if (e.b) parent[find(e.a)] = find(*e.b);

    std::map<int, std::string> group_name;
    for (const auto& e : sys.elements) group_name.try_emplace(find(e.a), e.group);
    for (const auto& c : sys.converters) group_name[find(c.sync_node)] = "sync_fo_" + c.name;

    std::vector<ZComponent> out;
    std::map<int, std::size_t> slot;
    for (const auto& n : nodes) {
        const int root = find(n.id);
        auto [it, fresh] = slot.try_emplace(root, out.size());
        if (fresh) {
            auto name = group_name.find(root);
            out.push_back({"Z_" + (name != group_name.end() ? name->second : "node" + std::to_string(n.id)), {}});
        }
        auto& comp = out[it->second];
        const Index off = sys.nodes.offset(n.id);
        for (int k = 0; k < n.width(); ++k) comp.indices.push_back(off + k);
    }
    for (auto& c : out) std::sort(c.indices.begin(), c.indices.end());
    return out;
}

std::vector<YComponent> y_components(const EinSystem& sys) {
    std::vector<YComponent> out;
    for (const auto& conv : sys.converters) {
        const auto idx = converter_port_indices(sys, conv);
        for (EimBlock b : kAllEimBlocks) {
            const BlockRange r = block_range(b);
            YComponent c{std::string(block_name(b)) + "_" + conv.name, {}, {}};
            for (Index i = 0; i < r.rows; ++i) c.rows.push_back(idx[static_cast<std::size_t>(r.row + i)]);
            for (Index j = 0; j < r.cols; ++j) c.cols.push_back(idx[static_cast<std::size_t>(r.col + j)]);
            out.push_back(std::move(c));
        }
    }
    return out;
}

}  // namespace eimnet
