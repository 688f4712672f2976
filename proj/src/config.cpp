#include "eimnet/config.hpp"

#include "eimnet/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace eimnet {

namespace {

int line_of(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    return m.is_null() ? 0 : m.line + 1;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads one YAML map and remembers which keys were consumed.
class MapReader {
public:
    MapReader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError(path_, line_of(node_), "expected a mapping");
    }

    const std::string& path() const { return path_; }
    int line() const { return line_of(node_); }

    bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

    YAML::Node child(const std::string& key) {
        used_.insert(key);
        return node_[key];
    }

    YAML::Node required(const std::string& key) {
        YAML::Node n = child(key);
        if (!n) throw ConfigError(join(path_, key), line(), "missing required key");
        return n;
    }

    double number(const std::string& key) { return as_number(required(key), join(path_, key)); }
    double number(const std::string& key, double fallback) {
        YAML::Node n = child(key);
        return n ? as_number(n, join(path_, key)) : fallback;
    }
    double positive(const std::string& key) {
        const double v = number(key);
        if (!(v > 0.0)) throw ConfigError(join(path_, key), line_of(node_[key]), "must be > 0");
        return v;
    }
    double positive(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) throw ConfigError(join(path_, key), line_of(node_[key]), "must be > 0");
        return v;
    }
    double non_negative(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) throw ConfigError(join(path_, key), line_of(node_[key]), "must be >= 0");
        return v;
    }
    int integer(const std::string& key) { return as_int(required(key), join(path_, key)); }
    int integer(const std::string& key, int fallback) {
        YAML::Node n = child(key);
        return n ? as_int(n, join(path_, key)) : fallback;
    }
    std::string text(const std::string& key) { return as_text(required(key), join(path_, key)); }
    std::string text(const std::string& key, const std::string& fallback) {
        YAML::Node n = child(key);
        return n ? as_text(n, join(path_, key)) : fallback;
    }
    bool flag(const std::string& key, bool fallback) {
        YAML::Node n = child(key);
        if (!n) return fallback;
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            throw ConfigError(join(path_, key), line_of(n), "expected true or false");
        }
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& kv : node_) {
            const std::string key = kv.first.as<std::string>();
            if (!used_.count(key)) throw ConfigError(join(path_, key), line_of(kv.first), "unknown key");
        }
    }

    static double as_number(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) throw ConfigError(path, line_of(n), "expected a number");
        try {
            const double v = n.as<double>();
            if (!std::isfinite(v)) throw ConfigError(path, line_of(n), "must be finite");
            return v;
        } catch (const YAML::Exception&) {
            throw ConfigError(path, line_of(n), "expected a number, got '" + n.Scalar() + "'");
        }
    }
    static int as_int(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) throw ConfigError(path, line_of(n), "expected an integer");
        try {
            return n.as<int>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path, line_of(n), "expected an integer, got '" + n.Scalar() + "'");
        }
    }
    static std::string as_text(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) throw ConfigError(path, line_of(n), "expected a string");
        return n.Scalar();
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

std::vector<YAML::Node> sequence(const YAML::Node& n, const std::string& path) {
    if (!n) return {};
    if (!n.IsSequence()) throw ConfigError(path, line_of(n), "expected a list");
    std::vector<YAML::Node> out;
    for (const auto& item : n) out.push_back(item);
    return out;
}

// Display path of a list item: by name when it has one.
std::string item_path(const std::string& list, const YAML::Node& item, std::size_t index) {
    if (item.IsMap() && item["name"] && item["name"].IsScalar()) return list + "." + item["name"].Scalar();
    return list + "[" + std::to_string(index) + "]";
}

PiGains pu_gains(MapReader& r, double scale) {
    PiGains g;
    g.kp = r.non_negative("kp_pu", 0.0) * scale;
    g.ki = r.non_negative("ki_pu", 0.0) * scale;
    return g;
}

ConverterConfig parse_converter(const YAML::Node& node, const std::string& path, double omega1) {
    MapReader r(node, path);
    ConverterConfig cc;
    ConverterSpec& spec = cc.spec;
    spec.name = r.text("name");
    spec.omega1 = omega1;
    const std::string kind = r.text("kind");
    if (kind != "gfl" && kind != "gfm") throw ConfigError(join(path, "kind"), line_of(node["kind"]), "must be gfl or gfm");
    const bool gfl = kind == "gfl";

    {
        MapReader n(r.required("nodes"), join(path, "nodes"));
        cc.sync_node = n.integer("sync");
        cc.ac_node = n.integer("ac");
        cc.dc_node = n.integer("dc");
        n.finish();
    }
    {
        MapReader b(r.required("rating"), join(path, "rating"));
        spec.base.s = b.positive("power_mva") * 1e6;
        spec.base.v_ac = b.positive("ac_voltage_kv") * 1e3 * std::sqrt(2.0 / 3.0);
        spec.base.v_dc = b.positive("dc_voltage_kv") * 1e3;
        spec.base.omega = omega1;
        b.finish();
    }
    const double zb = spec.base.z_ac();
    {
        MapReader f(r.required("filter"), join(path, "filter"));
        spec.r_f = f.non_negative("r_pu", 0.0) * zb;
        spec.l_f = f.positive("l_pu") * zb / omega1;
        f.finish();
    }
    spec.delay = r.non_negative("delay_us", 0.0) * 1e-6;
    {
        MapReader c(r.required("current_loop"), join(path, "current_loop"));
        if (c.has("bandwidth_hz")) {
            const double a = 2.0 * std::numbers::pi * c.positive("bandwidth_hz");
            spec.current = {a * spec.l_f, a * spec.r_f};
        } else {
            spec.current = {c.positive("kp"), c.non_negative("ki", 0.0)};
        }
        c.finish();
    }
    spec.decoupling = r.flag("decoupling", true) ? omega1 * spec.l_f : 0.0;

    MapReader sp(r.required("setpoint"), join(path, "setpoint"));
    cc.u = sp.positive("u_pu") * spec.base.v_ac;
    cc.q = sp.number("q_pu", 0.0) * spec.base.s;

    const char* foreign_gfl[] = {"vsg"};
    const char* foreign_gfm[] = {"pll", "dc_loop", "pq_loop"};
    if (gfl) {
        for (const char* k : foreign_gfl)
            if (r.has(k)) throw ConfigError(join(path, k), line_of(node[k]), "not allowed for a gfl converter");
        GflControl g;
        {
            MapReader p(r.required("pll"), join(path, "pll"));
            if (p.has("bandwidth_hz")) {
                const double wn = 2.0 * std::numbers::pi * p.positive("bandwidth_hz");
                const double zeta = p.positive("damping", 0.707);
                g.pll = {2.0 * zeta * wn / cc.u, wn * wn / cc.u};
            } else {
                g.pll = {p.positive("kp"), p.non_negative("ki", 0.0)};
            }
            p.finish();
        }
        {
            MapReader d(r.required("dc_loop"), join(path, "dc_loop"));
            g.dc = pu_gains(d, spec.base.i_ac() / spec.base.v_dc);
            d.finish();
        }
        {
            MapReader q(r.required("pq_loop"), join(path, "pq_loop"));
            const std::string ch = q.text("channel", "reactive");
            if (ch != "reactive" && ch != "active")
                throw ConfigError(join(q.path(), "channel"), line_of(node["pq_loop"]["channel"]), "must be reactive or active");
            g.channel = ch == "reactive" ? PqChannel::reactive : PqChannel::active;
            g.pq = pu_gains(q, spec.base.i_ac() / spec.base.s);
            q.finish();
        }
        spec.control = g;
        cc.v_dc = sp.positive("v_dc_pu") * spec.base.v_dc;
    } else {
        for (const char* k : foreign_gfm)
            if (r.has(k)) throw ConfigError(join(path, k), line_of(node[k]), "not allowed for a gfm converter");
        GfmControl g;
        MapReader v(r.required("vsg"), join(path, "vsg"));
        g.inertia = v.positive("inertia_s");
        g.damping = v.non_negative("damping_pu", 10.0);
        g.r_vir = v.non_negative("r_vir_pu", 0.0) * zb;
        g.l_vir = v.non_negative("l_vir_pu", 0.0) * zb / omega1;
        if (!(g.r_vir > 0.0 || g.l_vir > 0.0))
            throw ConfigError(v.path(), v.line(), "virtual impedance needs r_vir_pu or l_vir_pu > 0");
        v.finish();
        spec.control = g;
        cc.p = sp.number("p_pu") * spec.base.s;
    }
    sp.finish();
    r.finish();
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, r.line(), e.what());
    }
    return cc;
}

// Walks `path` (dots; list items addressed by name or index) and replaces the leaf with `value`.
void apply_override(YAML::Node root, const std::string& path, const YAML::Node& value, int line) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    if (parts.empty()) throw ConfigError(path, line, "empty override path");

    YAML::Node cur = root;
    std::string walked;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string& key = parts[i];
        walked = join(walked, key);
        const bool last = i + 1 == parts.size();
        if (cur.IsSequence()) {
            std::optional<std::size_t> hit;
            for (std::size_t k = 0; k < cur.size(); ++k)
                if (cur[k].IsMap() && cur[k]["name"] && cur[k]["name"].Scalar() == key) hit = k;
            if (!hit && !key.empty() && key.find_first_not_of("0123456789") == std::string::npos &&
                std::stoul(key) < cur.size())
                hit = std::stoul(key);
            if (!hit) throw ConfigError(walked, line, "override target not found");
            if (last) throw ConfigError(walked, line, "cannot replace a whole list item");
            cur.reset(cur[*hit]);
        } else if (cur.IsMap()) {
            if (!cur[key]) throw ConfigError(walked, line, "override target not found");
            if (last) {
                cur[key] = value;
                return;
            }
            cur.reset(cur[key]);
        } else {
            throw ConfigError(walked, line, "override path descends into a scalar");
        }
    }
}

std::vector<CaseDefinition> parse_cases(const YAML::Node& n) {
    std::vector<CaseDefinition> out;
    const auto items = sequence(n, "cases");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string path = item_path("cases", items[i], i);
        MapReader r(items[i], path);
        CaseDefinition c;
        c.name = r.text("name");
        c.description = r.text("description", "");
        YAML::Node set = r.required("set");
        if (!set.IsMap()) throw ConfigError(join(path, "set"), line_of(set), "expected a mapping of path: value");
        for (const auto& kv : set) {
            if (!kv.second.IsScalar()) throw ConfigError(join(path, "set"), line_of(kv.second), "override values must be scalars");
            c.overrides.push_back({kv.first.as<std::string>(), kv.second.Scalar()});
        }
        r.finish();
        for (const auto& o : out)
            if (o.name == c.name) throw ConfigError(path, r.line(), "duplicate case name");
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

double SystemConfig::omega1() const { return 2.0 * std::numbers::pi * frequency_hz; }

const ConverterConfig& SystemConfig::converter(const std::string& n) const {
    for (const auto& c : converters)
        if (c.spec.name == n) return c;
    throw std::invalid_argument("unknown converter '" + n + "'");
}

SystemConfig parse_config(const std::string& text, const std::string& case_name, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
    }
    if (!root || !root.IsMap()) throw ConfigError(source, 0, "top level must be a mapping");

    SystemConfig cfg;
    cfg.cases = parse_cases(root["cases"]);
    if (!case_name.empty()) {
        const YAML::Node items = root["cases"];
        bool found = false;
        for (std::size_t i = 0; items && i < items.size(); ++i) {
            if (items[i]["name"].Scalar() != case_name) continue;
            found = true;
            for (const auto& kv : items[i]["set"]) apply_override(root, kv.first.as<std::string>(), kv.second, line_of(kv.first));
        }
        if (!found) throw ConfigError("cases", 0, "unknown case '" + case_name + "'");
        cfg.active_case = case_name;
    }

    MapReader r(root, "");
    r.child("cases");
    cfg.name = r.text("name", "system");
    cfg.frequency_hz = r.positive("frequency_hz", 50.0);
    const double w1 = cfg.omega1();

    std::set<int> node_ids;
    auto claim = [&](int id, const std::string& path, int line) {
        if (id <= 0) throw ConfigError(path, line, "node ids must be positive");
        if (!node_ids.insert(id).second) throw ConfigError(path, line, "node id " + std::to_string(id) + " used twice");
    };

    const auto convs = sequence(r.required("converters"), "converters");
    if (convs.empty()) throw ConfigError("converters", line_of(root["converters"]), "at least one converter is required");
    std::set<int> dc_of_converters;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const std::string path = item_path("converters", convs[i], i);
        ConverterConfig cc = parse_converter(convs[i], path, w1);
        for (const auto& o : cfg.converters)
            if (o.spec.name == cc.spec.name) throw ConfigError(path, line_of(convs[i]), "duplicate converter name");
        claim(cc.sync_node, join(path, "nodes.sync"), line_of(convs[i]["nodes"]));
        claim(cc.ac_node, join(path, "nodes.ac"), line_of(convs[i]["nodes"]));
        dc_of_converters.insert(cc.dc_node);
        cfg.converters.push_back(std::move(cc));
    }

    const auto grids = sequence(r.required("ac_grids"), "ac_grids");
    std::set<int> grid_nodes;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const std::string path = item_path("ac_grids", grids[i], i);
        MapReader g(grids[i], path);
        AcGridConfig gc;
        gc.name = g.text("name");
        gc.node = g.integer("node");
        const ConverterConfig* owner = nullptr;
        for (const auto& c : cfg.converters)
            if (c.ac_node == gc.node) owner = &c;
        if (!owner) throw ConfigError(join(path, "node"), g.line(), "no converter ac node with this id");
        if (!grid_nodes.insert(gc.node).second) throw ConfigError(join(path, "node"), g.line(), "node already has a grid");
        const double zb = owner->spec.base.z_ac();
        if (g.has("scr")) {
            if (g.has("r_ohm") || g.has("l_mh")) throw ConfigError(path, g.line(), "give either scr or r_ohm/l_mh");
            const double scr = g.positive("scr");
            const double xr = g.positive("x_over_r", 10.0);
            const double z = zb / scr;
            gc.r = z / std::sqrt(1.0 + xr * xr);
            gc.l = xr * gc.r / w1;
        } else {
            gc.r = g.non_negative("r_ohm", 0.0);
            gc.l = g.positive("l_mh") * 1e-3;
        }
        gc.c = g.positive("shunt_c_pu") / (zb * w1);
        g.finish();
        for (const auto& o : cfg.ac_grids)
            if (o.name == gc.name) throw ConfigError(path, g.line(), "duplicate grid name");
        cfg.ac_grids.push_back(gc);
    }
    for (const auto& c : cfg.converters)
        if (!grid_nodes.count(c.ac_node))
            throw ConfigError("ac_grids", line_of(root["ac_grids"]), "converter '" + c.spec.name + "' ac node has no grid");

    {
        MapReader d(r.required("dc_network"), "dc_network");
        cfg.dc_name = d.text("name", "g");
        const auto nodes = sequence(d.required("nodes"), "dc_network.nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::string path = "dc_network.nodes[" + std::to_string(i) + "]";
            MapReader n(nodes[i], path);
            DcNodeConfig dn;
            dn.id = n.integer("id");
            claim(dn.id, join(path, "id"), n.line());
            dn.c = n.positive("c_uf") * 1e-6;
            dn.g = n.non_negative("g_us", 0.0) * 1e-6;
            n.finish();
            cfg.dc_nodes.push_back(dn);
        }
        for (int id : dc_of_converters) {
            bool ok = false;
            for (const auto& n : cfg.dc_nodes) ok = ok || n.id == id;
            if (!ok) throw ConfigError("dc_network.nodes", d.line(), "converter dc node " + std::to_string(id) + " is not listed");
        }
        const auto lines = sequence(d.child("lines"), "dc_network.lines");
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string path = item_path("dc_network.lines", lines[i], i);
            MapReader l(lines[i], path);
            DcLineConfig dl;
            dl.name = l.text("name", "line" + std::to_string(i + 1));
            dl.from = l.integer("from");
            dl.to = l.integer("to");
            dl.r = l.positive("r_ohm");
            dl.l = l.positive("l_mh") * 1e-3;
            l.finish();
            auto known = [&](int id) {
                for (const auto& n : cfg.dc_nodes)
                    if (n.id == id) return true;
                return false;
            };
            if (!known(dl.from) || !known(dl.to) || dl.from == dl.to)
                throw ConfigError(path, l.line(), "line terminals must be two different dc nodes");
            cfg.dc_lines.push_back(dl);
        }
        d.finish();
    }

    if (YAML::Node a = r.child("analysis")) {
        MapReader m(a, "analysis");
        auto& an = cfg.analysis;
        an.f_min_hz = m.positive("freq_min_hz", an.f_min_hz);
        an.f_max_hz = m.positive("freq_max_hz", an.f_max_hz);
        an.grid_points = m.integer("grid_points", an.grid_points);
        an.capture_radius = m.positive("capture_radius", an.capture_radius);
        an.newton_tolerance = m.positive("newton_tolerance", an.newton_tolerance);
        an.max_iterations = m.integer("max_iterations", an.max_iterations);
        an.increment = m.positive("increment", an.increment);
        an.condition_cap = m.positive("condition_cap", an.condition_cap);
        m.finish();
        if (an.f_max_hz <= an.f_min_hz) throw ConfigError("analysis", m.line(), "freq_max_hz must exceed freq_min_hz");
        if (an.grid_points < 2) throw ConfigError("analysis.grid_points", m.line(), "must be >= 2");
        if (an.increment > 0.2) throw ConfigError("analysis.increment", m.line(), "must be <= 0.2");
    }
    if (YAML::Node s = r.child("scan")) {
        MapReader m(s, "scan");
        auto& sc = cfg.scan;
        sc.f_min_hz = m.positive("freq_min_hz", sc.f_min_hz);
        sc.f_max_hz = m.positive("freq_max_hz", sc.f_max_hz);
        sc.points = m.integer("points", sc.points);
        sc.amplitude = m.non_negative("amplitude", sc.amplitude);
        sc.max_dt = m.positive("max_dt", sc.max_dt);
        m.finish();
        if (sc.f_max_hz < sc.f_min_hz) throw ConfigError("scan", m.line(), "freq_max_hz must be >= freq_min_hz");
        if (sc.points < 1) throw ConfigError("scan.points", m.line(), "must be >= 1");
    }
    if (YAML::Node s = r.child("simulation")) {
        MapReader m(s, "simulation");
        auto& si = cfg.simulation;
        si.dt = m.positive("dt", si.dt);
        si.t_end = m.positive("t_end", si.t_end);
        si.kick = m.positive("kick", si.kick);
        si.pade_order = m.integer("pade_order", si.pade_order);
        m.finish();
        if (si.pade_order < 0) throw ConfigError("simulation.pade_order", m.line(), "must be >= 0");
    }
    r.finish();

    std::size_t gfl = 0;
    for (const auto& c : cfg.converters) gfl += c.spec.kind() == ConverterKind::gfl;
    if (gfl == 0) throw ConfigError("converters", line_of(root["converters"]), "a gfl converter must regulate the dc voltage");
    return cfg;
}

SystemConfig load_config(const std::string& path, const std::string& case_name) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), case_name, path);
}

}  // namespace eimnet
