#include "eimnet/case_builder.hpp"

#include "eimnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace eimnet {

namespace {

const DcNodeConfig& dc_node(const SystemConfig& cfg, int id) {
    for (const auto& n : cfg.dc_nodes)
        if (n.id == id) return n;
    throw std::invalid_argument("unknown dc node " + std::to_string(id));
}

}  // namespace

SystemOperatingPoint solve_system_operating_point(const SystemConfig& cfg) {
    const std::size_t nc = cfg.converters.size();
    SystemOperatingPoint out;
    out.converters.resize(nc);

    // Nodes held by a PLL converter's dc loop.
    std::map<int, double> slack;
    for (const auto& c : cfg.converters) {
        if (c.spec.kind() != ConverterKind::gfl) continue;
        auto [it, fresh] = slack.emplace(c.dc_node, c.v_dc);
        if (!fresh && it->second != c.v_dc)
            throw std::invalid_argument("dc node " + std::to_string(c.dc_node) + " has two different voltage references");
    }

    // VSG bridge powers do not depend on the dc voltage.
    std::vector<double> p_bridge(nc, 0.0);
    for (std::size_t k = 0; k < nc; ++k) {
        const auto& c = cfg.converters[k];
        if (c.spec.kind() != ConverterKind::gfm) continue;
        p_bridge[k] = solve_operating_point(c.spec, {c.u, c.p, c.q, c.spec.base.v_dc, PowerReference::poc}).p_bridge();
    }

    std::vector<int> free_nodes;
    for (const auto& n : cfg.dc_nodes)
        if (!slack.count(n.id)) free_nodes.push_back(n.id);

    double v_start = 0.0;
    for (const auto& [id, v] : slack) v_start += v / static_cast<double>(slack.size());

    std::map<int, double> v;
    for (const auto& [id, vs] : slack) v[id] = vs;
    for (int id : free_nodes) v[id] = v_start;

    // Current leaving node `id` into passive elements, minus VSG deliveries.
    auto passive_out = [&](int id, const std::map<int, double>& vv) {
        double i = dc_node(cfg, id).g * vv.at(id);
        for (const auto& l : cfg.dc_lines) {
            if (l.from == id) i += (vv.at(id) - vv.at(l.to)) / l.r;
            if (l.to == id) i += (vv.at(id) - vv.at(l.from)) / l.r;
        }
        for (std::size_t k = 0; k < nc; ++k)
            if (cfg.converters[k].dc_node == id && cfg.converters[k].spec.kind() == ConverterKind::gfm)
                i -= p_bridge[k] / vv.at(id);
        return i;
    };

    const std::size_t nf = free_nodes.size();
    if (nf > 0) {
        auto residual = [&](const std::map<int, double>& vv) {
            Eigen::VectorXd r(static_cast<Index>(nf));
            for (std::size_t a = 0; a < nf; ++a) r(static_cast<Index>(a)) = passive_out(free_nodes[a], vv);
            return r;
        };
        Eigen::VectorXd r = residual(v);
        const double scale = std::max(1.0, v_start);
        int it = 0;
        for (; it < 50 && r.norm() * scale > 1e-9 * std::max(1.0, std::abs(v_start)); ++it) {
            Eigen::MatrixXd jac(static_cast<Index>(nf), static_cast<Index>(nf));
            for (std::size_t b = 0; b < nf; ++b) {
                auto vp = v, vm = v;
                const double h = 1e-6 * std::max(1.0, std::abs(v[free_nodes[b]]));
                vp[free_nodes[b]] += h;
                vm[free_nodes[b]] -= h;
                jac.col(static_cast<Index>(b)) = (residual(vp) - residual(vm)) / (2.0 * h);
            }
            const Eigen::VectorXd step = jac.fullPivLu().solve(-r);
            double lambda = 1.0;
            bool ok = false;
            for (int k = 0; k < 30 && !ok; ++k, lambda *= 0.5) {
                auto trial = v;
                for (std::size_t b = 0; b < nf; ++b) trial[free_nodes[b]] += lambda * step(static_cast<Index>(b));
                bool positive = true;
                for (int id : free_nodes) positive = positive && trial[id] > 0.0;
                if (!positive) continue;
                const Eigen::VectorXd rt = residual(trial);
                if (rt.norm() < r.norm()) {
                    v = trial;
                    r = rt;
                    ok = true;
                }
            }
            if (!ok) throw NoConvergence(it, r.norm());
        }
    }

    for (std::size_t k = 0; k < nc; ++k) {
        const auto& c = cfg.converters[k];
        const double vk = v.at(c.dc_node);
        if (c.spec.kind() == ConverterKind::gfm) {
            out.converters[k] = solve_operating_point(c.spec, {c.u, c.p, c.q, vk, PowerReference::poc});
        } else {
            // Delivered current the dc node needs from this converter.
            const double need = passive_out(c.dc_node, v);
            out.converters[k] = solve_operating_point(c.spec, {c.u, vk * need, c.q, vk, PowerReference::dc_terminal});
        }
    }
    out.dc_voltages = v;
    return out;
}

EinSystem build_ein(const SystemConfig& cfg, const SystemOperatingPoint& op) {
    EinSystem sys;
    const double w1 = cfg.omega1();
    std::map<int, const ConverterConfig*> dc_owner;
    for (const auto& c : cfg.converters) dc_owner.try_emplace(c.dc_node, &c);

    for (std::size_t k = 0; k < cfg.converters.size(); ++k) {
        const auto& c = cfg.converters[k];
        const PortBases b = port_bases(c.spec);
        sys.nodes.add({c.sync_node, NodeKind::sync, c.spec.name, b.current(0), b.voltage(0)});
        sys.nodes.add({c.ac_node, NodeKind::ac, c.spec.name, b.current(1), b.voltage(1)});
        sys.converters.push_back({c.spec.name, build_eim(c.spec, op.converters[k]), c.sync_node, c.ac_node, c.dc_node});
    }
    for (const auto& n : cfg.dc_nodes) {
        const auto it = dc_owner.find(n.id);
        const ConverterSpec& s = (it != dc_owner.end() ? it->second : &cfg.converters.front())->spec;
        sys.nodes.add({n.id, NodeKind::dc, it != dc_owner.end() ? s.name : "", s.base.i_dc(), s.base.v_dc});
    }

    for (const auto& g : cfg.ac_grids) {
        const std::string group = "ac_" + g.name;
        sys.elements.push_back(ac_rl_to_ground(g.name + ".rl", group, g.node, g.r, g.l, w1));
        sys.elements.push_back(ac_shunt_c(g.name + ".c", group, g.node, g.c, w1));
    }
    const std::string dc_group = "dc_" + cfg.dc_name;
    for (const auto& n : cfg.dc_nodes) {
        sys.elements.push_back(dc_shunt_c("dc" + std::to_string(n.id) + ".c", dc_group, n.id, n.c));
        if (n.g > 0.0) sys.elements.push_back(dc_shunt_g("dc" + std::to_string(n.id) + ".g", dc_group, n.id, n.g));
    }
    for (const auto& l : cfg.dc_lines) sys.elements.push_back(dc_series_rl(l.name, dc_group, l.from, l.to, l.r, l.l));
    sys.validate();
    return sys;
}

SimModel build_sim(const SystemConfig& cfg, const SystemOperatingPoint& op) {
    std::vector<SimAcBus> ac;
    std::map<int, int> ac_index;
    for (const auto& g : cfg.ac_grids) {
        SimAcBus b;
        b.name = g.name;
        b.r_g = g.r;
        b.l_g = g.l;
        b.c = g.c;
        for (std::size_t k = 0; k < cfg.converters.size(); ++k)
            if (cfg.converters[k].ac_node == g.node) b.u0 = op.converters[k].u_g;
        ac_index[g.node] = static_cast<int>(ac.size());
        ac.push_back(b);
    }
    std::vector<SimDcBus> dc;
    std::map<int, int> dc_index;
    for (const auto& n : cfg.dc_nodes) {
        SimDcBus b;
        b.name = "dc" + std::to_string(n.id);
        b.v0 = op.dc_voltages.at(n.id);
        b.c = n.c;
        b.g = n.g;
        dc_index[n.id] = static_cast<int>(dc.size());
        dc.push_back(b);
    }
    std::vector<SimDcLine> lines;
    for (const auto& l : cfg.dc_lines) lines.push_back({l.name, dc_index.at(l.from), dc_index.at(l.to), l.r, l.l});
    std::vector<SimConverter> conv;
    for (std::size_t k = 0; k < cfg.converters.size(); ++k) {
        const auto& c = cfg.converters[k];
        conv.push_back({c.spec, op.converters[k], ac_index.at(c.ac_node), dc_index.at(c.dc_node)});
    }
    return SimModel(std::move(ac), std::move(dc), std::move(lines), std::move(conv), cfg.simulation.pade_order);
}

BuiltCase build_case(const SystemConfig& cfg) {
    BuiltCase bc;
    bc.config = cfg;
    bc.op = solve_system_operating_point(cfg);
    bc.ein = build_ein(cfg, bc.op);
    return bc;
}

}  // namespace eimnet
