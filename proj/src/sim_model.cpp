#include "eimnet/sim_model.hpp"

#include "eimnet/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace eimnet {

namespace {

// j x in dq: [-x_q; x_d]
inline Dq jrot(const Dq& x) { return Dq(-x.y(), x.x()); }

// R(-theta) x: system frame -> controller frame
inline Dq to_ctrl(const Dq& x, double c, double s) { return Dq(c * x.x() + s * x.y(), -s * x.x() + c * x.y()); }
inline Dq to_sys(const Dq& x, double c, double s) { return Dq(c * x.x() - s * x.y(), s * x.x() + c * x.y()); }

}  // namespace

PadeRealization pade_delay(double seconds, int order) {
    if (seconds < 0.0 || order < 0) throw std::invalid_argument("pade_delay: need T >= 0 and order >= 0");
    PadeRealization p;
    if (seconds == 0.0 || order == 0) {
        p.a.resize(0, 0);
        p.b.resize(0);
        p.c.resize(0);
        p.d = 1.0;
        return p;
    }
    const int n = order;
    std::vector<double> ck(static_cast<std::size_t>(n + 1));
    // c_k = (2n-k)! n! / ((2n)! k! (n-k)!)
    for (int k = 0; k <= n; ++k)
        ck[static_cast<std::size_t>(k)] =
            std::exp(std::lgamma(2 * n - k + 1) + std::lgamma(n + 1) - std::lgamma(2 * n + 1) - std::lgamma(k + 1) -
                     std::lgamma(n - k + 1));
    const double lead = ck[static_cast<std::size_t>(n)] * std::pow(seconds, n);
    Eigen::VectorXd den(n), num(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double tk = ck[static_cast<std::size_t>(k)] * std::pow(seconds, k) / lead;
        if (k < n) den(k) = tk;
        num(k) = (k % 2 ? -tk : tk);
    }
    p.a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) p.a(i, i + 1) = 1.0;
    for (int k = 0; k < n; ++k) p.a(n - 1, k) = -den(k);
    p.b = Eigen::VectorXd::Zero(n);
    p.b(n - 1) = 1.0;
    p.d = num(n);
    p.c.resize(n);
    for (int k = 0; k < n; ++k) p.c(k) = num(k) - p.d * den(k);
    return p;
}

SimModel::SimModel(std::vector<SimAcBus> ac, std::vector<SimDcBus> dc, std::vector<SimDcLine> lines,
                   std::vector<SimConverter> converters, int pade_order)
    : ac_(std::move(ac)), dc_(std::move(dc)), lines_(std::move(lines)), conv_(std::move(converters)) {
    if (pade_order < 0) throw std::invalid_argument("pade order must be >= 0");
    auto add = [&](const std::string& name) {
        names_.push_back(name);
        return n_++;
    };

    for (const auto& bus : ac_) {
        if (bus.ideal) {
            ac_off_.push_back(-1);
            continue;
        }
        if (!(bus.l_g > 0.0) || !(bus.c > 0.0) || bus.r_g < 0.0)
            throw std::invalid_argument("ac bus '" + bus.name + "': grid needs l_g > 0, c > 0, r_g >= 0");
        ac_off_.push_back(n_);
        add(bus.name + ".is_d");
        add(bus.name + ".is_q");
        add(bus.name + ".u_d");
        add(bus.name + ".u_q");
    }
    for (const auto& bus : dc_) {
        if (bus.ideal) {
            dc_off_.push_back(-1);
            continue;
        }
        if (!(bus.c > 0.0) || bus.g < 0.0) throw std::invalid_argument("dc bus '" + bus.name + "': needs c > 0, g >= 0");
        dc_off_.push_back(add(bus.name + ".v"));
    }
    for (const auto& line : lines_) {
        if (!(line.r > 0.0) || !(line.l > 0.0)) throw std::invalid_argument("dc line '" + line.name + "': needs r, l > 0");
        auto bad = [&](int b) { return b < 0 || b >= static_cast<int>(dc_.size()); };
        if (bad(line.from) || bad(line.to) || line.from == line.to)
            throw std::invalid_argument("dc line '" + line.name + "': bad terminals");
        line_off_.push_back(add(line.name + ".i"));
    }
    for (const auto& c : conv_) {
        c.spec.validate();
        if (c.spec.omega1 != conv_.front().spec.omega1)
            throw std::invalid_argument("all converters must share the fundamental frequency");
        if (c.ac_bus < 0 || c.ac_bus >= static_cast<int>(ac_.size()) || c.dc_bus < 0 ||
            c.dc_bus >= static_cast<int>(dc_.size()))
            throw std::invalid_argument("converter '" + c.spec.name + "': bad bus index");
        const std::string& nm = c.spec.name;
        conv_off_.push_back(n_);
        add(nm + ".i_d");
        add(nm + ".i_q");
        add(nm + ".theta");
        add(nm + (c.spec.kind() == ConverterKind::gfl ? ".x_pll" : ".dw"));
        add(nm + ".xcc_d");
        add(nm + ".xcc_q");
        const PadeRealization pade = pade_delay(c.spec.delay, pade_order);
        for (Index k = 0; k < pade.order(); ++k) add(nm + ".pade_d" + std::to_string(k));
        for (Index k = 0; k < pade.order(); ++k) add(nm + ".pade_q" + std::to_string(k));
        if (c.spec.kind() == ConverterKind::gfl) {
            add(nm + ".x_dc");
            add(nm + ".x_pq");
        } else {
            add(nm + ".iv_d");
            add(nm + ".iv_q");
        }

        Derived d;
        d.pade = pade;
        d.v_norm = c.op.v_dc;
        if (c.spec.kind() == ConverterKind::gfl) {
            d.v_ref = c.op.v_dc;
            d.pq_ref = c.spec.gfl().channel == PqChannel::reactive ? c.op.q_poc() : c.op.p_poc();
        } else {
            const auto& g = c.spec.gfm();
            d.p_ref = c.op.p_poc();
            d.e_vir = c.op.u_g - g.r_vir * c.op.i_g - c.spec.omega1 * g.l_vir * jrot(c.op.i_g);
        }
        derived_.push_back(d);
    }

    // Grid sources that hold each bus at u0.
    for (std::size_t b = 0; b < ac_.size(); ++b) {
        auto& bus = ac_[b];
        if (bus.ideal) continue;
        const double w1 = conv_.empty() ? 0.0 : conv_.front().spec.omega1;
        Dq is = bus.c * w1 * jrot(bus.u0);
        for (const auto& c : conv_)
            if (c.ac_bus == static_cast<int>(b)) is += c.op.i_g;
        bus.e_g = bus.u0 + bus.r_g * is + w1 * bus.l_g * jrot(is);
    }
}

SimInputs SimModel::zero_inputs() const {
    SimInputs in;
    in.ac.assign(ac_.size(), Dq::Zero());
    in.dc.assign(dc_.size(), 0.0);
    in.sync.assign(conv_.size(), 0.0);
    return in;
}

Dq SimModel::bus_voltage(const Eigen::VectorXd& x, const SimInputs& in, int bus) const {
    const auto b = static_cast<std::size_t>(bus);
    if (ac_[b].ideal) return ac_[b].u0 + in.ac[b];
    const Index o = ac_off_[b];
    return Dq(x(o + 2), x(o + 3));
}

double SimModel::dc_voltage(const Eigen::VectorXd& x, const SimInputs& in, int bus) const {
    const auto b = static_cast<std::size_t>(bus);
    if (dc_[b].ideal) return dc_[b].v0 + in.dc[b];
    return x(dc_off_[b]);
}

Eigen::VectorXd SimModel::initial_state() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    const double w1 = conv_.empty() ? 0.0 : conv_.front().spec.omega1;
    for (std::size_t b = 0; b < ac_.size(); ++b) {
        if (ac_[b].ideal) continue;
        Dq is = ac_[b].c * w1 * jrot(ac_[b].u0);
        for (const auto& c : conv_)
            if (c.ac_bus == static_cast<int>(b)) is += c.op.i_g;
        x.segment<2>(ac_off_[b]) = is;
        x.segment<2>(ac_off_[b] + 2) = ac_[b].u0;
    }
    for (std::size_t b = 0; b < dc_.size(); ++b)
        if (!dc_[b].ideal) x(dc_off_[b]) = dc_[b].v0;
    for (std::size_t l = 0; l < lines_.size(); ++l)
        x(line_off_[l]) = (dc_[static_cast<std::size_t>(lines_[l].from)].v0 - dc_[static_cast<std::size_t>(lines_[l].to)].v0) /
                          lines_[l].r;
    for (std::size_t k = 0; k < conv_.size(); ++k) {
        const auto& c = conv_[k];
        const auto& d = derived_[k];
        const Index o = conv_off_[k];
        const Index n = d.pade.order();
        x.segment<2>(o) = c.op.i_g;
        // u_ref = -x_cc - K_d i at rest, and u_ref = u_c0.
        x.segment<2>(o + 4) = -c.op.u_c - c.spec.decoupling * jrot(c.op.i_g);
        if (n > 0) {
            const Eigen::VectorXd unit = -d.pade.a.partialPivLu().solve(d.pade.b);
            x.segment(o + 6, n) = unit * c.op.u_c.x();
            x.segment(o + 6 + n, n) = unit * c.op.u_c.y();
        }
        x.segment<2>(o + 6 + 2 * n) = c.op.i_g;
    }
    return x;
}

void SimModel::converter_core(const Eigen::VectorXd& x, const SimInputs& in, std::size_t k, Eigen::VectorXd* dx,
                              ConverterSignals* sig) const {
    const auto& c = conv_[k];
    const auto& spec = c.spec;
    const auto& d = derived_[k];
    const Index o = conv_off_[k];
    const Index n = d.pade.order();
    const Index outer = o + 6 + 2 * n;
    const double w1 = spec.omega1;

    const Dq i(x(o), x(o + 1));
    const double theta = x(o + 2);
    const double sync = x(o + 3);
    const Dq xcc(x(o + 4), x(o + 5));
    const Dq u = bus_voltage(x, in, c.ac_bus);
    const double v = dc_voltage(x, in, c.dc_bus);
    const double ct = std::cos(theta), st = std::sin(theta);
    const Dq uc = to_ctrl(u, ct, st);
    const Dq ic = to_ctrl(i, ct, st);
    const double p_abs = 1.5 * u.dot(i);

    double omega = 0.0, p_sync = 0.0, dsync = 0.0;
    Dq iref = Dq::Zero(), douter = Dq::Zero();
    if (spec.kind() == ConverterKind::gfl) {
        const auto& g = spec.gfl();
        const double e_pll = uc.y() + in.sync[k];
        omega = g.pll.kp * e_pll + sync;
        dsync = g.pll.ki * e_pll;
        p_sync = uc.y();
        const double e_dc = d.v_ref - v;
        const double meas = g.channel == PqChannel::reactive ? 1.5 * (u.y() * i.x() - u.x() * i.y()) : p_abs;
        const double e_pq = meas - d.pq_ref;
        iref = Dq(g.dc.kp * e_dc + x(outer), g.pq.kp * e_pq + x(outer + 1));
        douter = Dq(g.dc.ki * e_dc, g.pq.ki * e_pq);
    } else {
        const auto& g = spec.gfm();
        omega = sync;
        dsync = ((spec.base.omega / spec.base.s) * (p_abs - d.p_ref + in.sync[k]) - g.damping * sync) / g.inertia;
        p_sync = p_abs;
        if (g.l_vir > 0.0) {
            const Dq iv(x(outer), x(outer + 1));
            iref = iv;
            douter = (uc - d.e_vir - g.r_vir * iv - w1 * g.l_vir * jrot(iv)) / g.l_vir;
        } else {
            iref = (uc - d.e_vir) / g.r_vir;
        }
    }

    const Dq e = iref - ic;
    const Dq uref = -(spec.current.kp * e + xcc) - spec.decoupling * jrot(ic);
    Dq mc;
    if (n > 0) {
        const auto zd = x.segment(o + 6, n);
        const auto zq = x.segment(o + 6 + n, n);
        mc = Dq(d.pade.c.dot(zd) + d.pade.d * uref.x(), d.pade.c.dot(zq) + d.pade.d * uref.y()) / d.v_norm;
        if (dx) {
            dx->segment(o + 6, n) = d.pade.a * zd + d.pade.b * uref.x();
            dx->segment(o + 6 + n, n) = d.pade.a * zq + d.pade.b * uref.y();
        }
    } else {
        mc = uref / d.v_norm;
    }
    const Dq m = to_sys(mc, ct, st);
    const Dq ucv = m * v;

    if (dx) {
        dx->segment<2>(o) = (u - ucv - spec.r_f * i - w1 * spec.l_f * jrot(i)) / spec.l_f;
        (*dx)(o + 2) = omega;
        (*dx)(o + 3) = dsync;
        dx->segment<2>(o + 4) = spec.current.ki * e;
        dx->segment<2>(outer) = douter;
    }
    if (sig) {
        sig->u_g = u;
        sig->i_g = i;
        sig->v_dc = v;
        sig->i_dc = -1.5 * ucv.dot(i) / v;
        sig->omega = omega;
        sig->p_sync = p_sync;
        sig->theta = theta;
    }
}

void SimModel::rhs(const Eigen::VectorXd& x, const SimInputs& in, Eigen::VectorXd& dx) const {
    dx.setZero(n_);
    std::vector<Dq> i_ac(ac_.size(), Dq::Zero());
    std::vector<double> i_dc(dc_.size(), 0.0);  // delivered into each dc bus
    for (std::size_t k = 0; k < conv_.size(); ++k) {
        ConverterSignals sig;
        converter_core(x, in, k, &dx, &sig);
        i_ac[static_cast<std::size_t>(conv_[k].ac_bus)] += sig.i_g;
        i_dc[static_cast<std::size_t>(conv_[k].dc_bus)] -= sig.i_dc;
    }
    for (std::size_t l = 0; l < lines_.size(); ++l) {
        const auto& line = lines_[l];
        const double il = x(line_off_[l]);
        dx(line_off_[l]) = (dc_voltage(x, in, line.from) - dc_voltage(x, in, line.to) - line.r * il) / line.l;
        i_dc[static_cast<std::size_t>(line.from)] -= il;
        i_dc[static_cast<std::size_t>(line.to)] += il;
    }
    for (std::size_t b = 0; b < dc_.size(); ++b) {
        if (dc_[b].ideal) continue;
        const double v = x(dc_off_[b]);
        dx(dc_off_[b]) = (i_dc[b] - dc_[b].g * v) / dc_[b].c;
    }
    const double w1 = conv_.empty() ? 0.0 : conv_.front().spec.omega1;
    for (std::size_t b = 0; b < ac_.size(); ++b) {
        const auto& bus = ac_[b];
        if (bus.ideal) continue;
        const Index o = ac_off_[b];
        const Dq is(x(o), x(o + 1));
        const Dq u(x(o + 2), x(o + 3));
        dx.segment<2>(o) = (bus.e_g - u - bus.r_g * is - w1 * bus.l_g * jrot(is)) / bus.l_g;
        dx.segment<2>(o + 2) = (is - i_ac[b] - w1 * bus.c * jrot(u)) / bus.c;
    }
}

Eigen::VectorXd SimModel::rhs(const Eigen::VectorXd& x, const SimInputs& in) const {
    Eigen::VectorXd dx;
    rhs(x, in, dx);
    return dx;
}

ConverterSignals SimModel::signals(const Eigen::VectorXd& x, const SimInputs& in, std::size_t converter) const {
    if (converter >= conv_.size()) throw std::out_of_range("converter index");
    ConverterSignals sig;
    converter_core(x, in, converter, nullptr, &sig);
    return sig;
}

}  // namespace eimnet
