// Command-line front end: build, scan, analyze, oracle.

#include "eimnet/case_builder.hpp"
#include "eimnet/errors.hpp"
#include "eimnet/fma.hpp"
#include "eimnet/oracle.hpp"
#include "eimnet/report.hpp"
#include "eimnet/scan.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace eimnet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kDisagree = 3, kNumerical = 4 };

struct Options {
    std::string config;
    std::string case_name;
    std::string out;
    std::optional<double> f_min, f_max, increment;
    std::optional<int> grid_points;
    unsigned seed = 1;
    std::string converter;
};

// Writes into `out/name`, or to stdout when no directory was given.
template <typename F>
void emit(const Options& o, const std::string& name, F&& write) {
    if (o.out.empty()) {
        std::cout << "# " << name << '\n';
        write(std::cout);
        return;
    }
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(o.out) / name).string());
    write(f);
}

SystemConfig load(const Options& o) {
    SystemConfig cfg = load_config(o.config, o.case_name);
    if (o.f_min) cfg.analysis.f_min_hz = cfg.scan.f_min_hz = *o.f_min;
    if (o.f_max) cfg.analysis.f_max_hz = cfg.scan.f_max_hz = *o.f_max;
    if (o.grid_points) cfg.analysis.grid_points = cfg.scan.points = *o.grid_points;
    if (o.increment) cfg.analysis.increment = *o.increment;
    if (cfg.analysis.f_max_hz <= cfg.analysis.f_min_hz) throw ConfigError("--freq-max", 0, "must exceed --freq-min");
    if (cfg.analysis.grid_points < 2) throw ConfigError("--grid-points", 0, "must be >= 2");
    if (!(cfg.analysis.increment > 0.0 && cfg.analysis.increment <= 0.2))
        throw ConfigError("--increment", 0, "must be in (0, 0.2]");
    return cfg;
}

int cmd_build(const Options& o) {
    const BuiltCase bc = build_case(load(o));
    emit(o, "operating_point.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.header({"converter", "kind", "u_g_d", "u_g_q", "i_g_d", "i_g_q", "u_c_d", "u_c_q", "v_dc", "i_dc", "p_poc",
                  "q_poc"});
        for (std::size_t k = 0; k < bc.config.converters.size(); ++k) {
            const auto& c = bc.config.converters[k];
            const auto& op = bc.op.converters[k];
            w.cell(c.spec.name).cell(std::string(c.spec.kind() == ConverterKind::gfl ? "gfl" : "gfm"));
            w.cell(op.u_g.x()).cell(op.u_g.y()).cell(op.i_g.x()).cell(op.i_g.y()).cell(op.u_c.x()).cell(op.u_c.y());
            w.cell(op.v_dc).cell(op.i_dc).cell(op.p_poc()).cell(op.q_poc());
            w.end_row();
        }
    });
    emit(o, "nodes.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.header({"node", "kind", "owner", "current_base", "voltage_base", "first_port"});
        for (const auto& n : bc.ein.nodes.nodes()) {
            const char* kind = n.kind == NodeKind::sync ? "sync" : n.kind == NodeKind::ac ? "ac" : "dc";
            w.cell(n.id).cell(std::string(kind)).cell(n.owner).cell(n.current_base).cell(n.voltage_base);
            w.cell(static_cast<int>(bc.ein.nodes.offset(n.id)));
            w.end_row();
        }
    });
    const auto f = log_grid(bc.config.analysis.f_min_hz, bc.config.analysis.f_max_hz, bc.config.analysis.grid_points);
    const auto [z, y] = per_unit(bc.ein, assemble_znet(bc.ein), assemble_ycon(bc.ein));
    std::vector<CMatrix> zv, yv;
    for (double fk : f) {
        const cplx s(0.0, 2.0 * std::numbers::pi * fk);
        zv.push_back(z.eval(s));
        yv.push_back(y.eval(s));
    }
    emit(o, "znet.csv", [&](std::ostream& os) { write_matrix_sweep_csv(os, f, zv, "Z"); });
    emit(o, "ycon.csv", [&](std::ostream& os) { write_matrix_sweep_csv(os, f, yv, "Y"); });
    for (const auto& conv : bc.ein.converters) {
        std::vector<CMatrix> ev;
        for (double fk : f) ev.push_back(conv.eim.y.eval(cplx(0.0, 2.0 * std::numbers::pi * fk)));
        emit(o, "eim_" + conv.name + ".csv", [&](std::ostream& os) { write_matrix_sweep_csv(os, f, ev, "Y"); });
    }
    return kOk;
}

int cmd_scan(const Options& o) {
    const SystemConfig cfg = load(o);
    const BuiltCase bc = build_case(cfg);
    ScanOptions so;
    so.amplitude = cfg.scan.amplitude;
    so.max_dt = cfg.scan.max_dt;
    so.pade_order = cfg.simulation.pade_order;
    std::mt19937 rng(o.seed);
    so.phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const auto grid = log_grid(cfg.scan.f_min_hz, cfg.scan.f_max_hz, std::max(cfg.scan.points, 2));
    bool any = false;
    std::ostringstream summary;
    CsvWriter sw(summary);
    sw.header({"converter", "entry", "worst_error", "freq_hz"});
    for (std::size_t k = 0; k < cfg.converters.size(); ++k) {
        const auto& c = cfg.converters[k];
        if (!o.converter.empty() && c.spec.name != o.converter) continue;
        any = true;
        const ScanResult r = scan_eim(c.spec, bc.op.converters[k], grid, so);
        std::vector<CMatrix> analytic;
        const FourPortEim eim = build_eim(c.spec, bc.op.converters[k]);
        for (double f : grid) analytic.push_back(eim.y.eval(cplx(0.0, 2.0 * std::numbers::pi * f)));
        emit(o, "scan_" + c.spec.name + ".csv", [&](std::ostream& os) { write_scan_csv(os, r, analytic); });

        // Worst relative error of each entry against the analytic model.
        const PortBases pb = port_bases(c.spec);
        double overall = 0.0;
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 4; ++j) {
                double worst = 0.0, at = grid.front();
                for (std::size_t p = 0; p < grid.size(); ++p) {
                    const double e = entry_relative_error(r.points[p].y_dq, analytic[p], pb, i, j, 1e-3);
                    if (e > worst) {
                        worst = e;
                        at = grid[p];
                    }
                }
                overall = std::max(overall, worst);
                sw.cell(c.spec.name).cell("Y_" + std::to_string(i + 1) + std::to_string(j + 1)).cell(worst).cell(at);
                sw.end_row();
            }
        std::cerr << c.spec.name << ": worst entry error " << 100.0 * overall << " %\n";
    }
    if (!any) throw ConfigError("--converter", 0, "no converter named '" + o.converter + "'");
    emit(o, "scan_summary.csv", [&](std::ostream& os) { os << summary.str(); });
    return kOk;
}

int cmd_analyze(const Options& o) {
    const SystemConfig cfg = load(o);
    const BuiltCase bc = build_case(cfg);
    const ModeSearchOptions mo = mode_search_options(cfg);
    const ModeSearchResult res = find_modes(loop_gain(bc.ein), mo);
    emit(o, "modes.csv", [&](std::ostream& os) { write_modes_csv(os, res.modes); });
    if (res.modes.empty()) {
        std::cerr << "no mode captured; minimum |1+lambda| = " << res.margin << " at " << res.margin_frequency_hz
                  << " Hz\n";
        return kOk;
    }
    const ModeReport rep = analyze_mode(bc.ein, res.modes.front(), cfg.analysis.increment, mo.eval);
    emit(o, "node_pf.csv", [&](std::ostream& os) { write_node_pf_csv(os, rep.node_pf); });
    emit(o, "z_sensitivity.csv", [&](std::ostream& os) { write_sensitivity_csv(os, rep.z_sensitivity); });
    emit(o, "y_sensitivity.csv", [&](std::ostream& os) { write_sensitivity_csv(os, rep.y_sensitivity); });
    emit(o, "z_validation.csv", [&](std::ostream& os) { write_validation_csv(os, rep.z_validation); });
    return kOk;
}

int cmd_oracle(const Options& o) {
    const SystemConfig cfg = load(o);
    const BuiltCase bc = build_case(cfg);
    const OracleResult r = run_oracle(bc);
    emit(o, "oracle.csv", [&](std::ostream& os) {
        write_oracle_csv(os, cfg.active_case.empty() ? "baseline" : cfg.active_case, r);
    });
    emit(o, "ss_eigenvalues.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.header({"index", "s_re", "s_im", "freq_hz"});
        for (Index k = 0; k < r.ss.eigenvalues.size(); ++k) {
            const cplx e = r.ss.eigenvalues(k);
            w.cell(static_cast<int>(k)).cell(e).cell(e.imag() / (2.0 * std::numbers::pi)).end_row();
        }
    });
    return r.verdicts_agree() ? kOk : kDisagree;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extended impedance network analysis of converter-based grids"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "system YAML file")->required()->check(CLI::ExistingFile);
        sub->add_option("--case", o.case_name, "named case from the config's cases list");
        sub->add_option("--out", o.out, "output directory (stdout when omitted)");
        sub->add_option("--freq-min", o.f_min, "lowest frequency [Hz]");
        sub->add_option("--freq-max", o.f_max, "highest frequency [Hz]");
        sub->add_option("--grid-points", o.grid_points, "frequency grid size");
        sub->add_option("--increment", o.increment, "relative perturbation for the sensitivity check");
        sub->add_option("--seed", o.seed, "seed for the injection phase");
    };
    auto* build = app.add_subcommand("build", "operating point, node table, Z_net and Y_con sweeps");
    auto* scan = app.add_subcommand("scan", "time-domain EIM scan of each converter");
    auto* analyze = app.add_subcommand("analyze", "modes, participation factors and sensitivities");
    auto* oracle = app.add_subcommand("oracle", "cross-check against state space and simulation");
    for (auto* s : {build, scan, analyze, oracle}) common(s);
    scan->add_option("--converter", o.converter, "scan only this converter");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*build) return cmd_build(o);
        if (*scan) return cmd_scan(o);
        if (*analyze) return cmd_analyze(o);
        return cmd_oracle(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
}
