#pragma once

// System description read from YAML. Unknown keys are rejected; every error
// carries the dotted key path and the source line.

#include "eimnet/converter_eim.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eimnet {

struct ConverterConfig {
    ConverterSpec spec;
    int sync_node = 0;
    int ac_node = 0;
    int dc_node = 0;
    double u = 0.0;      ///< PoC voltage magnitude [V peak]
    double p = 0.0;      ///< VSG: absorbed PoC active power [W]
    double q = 0.0;      ///< absorbed PoC reactive power [var]
    double v_dc = 0.0;   ///< PLL converter: regulated dc voltage [V]
};

struct AcGridConfig {
    std::string name;
    int node = 0;
    double r = 0.0;  ///< [Ohm]
    double l = 0.0;  ///< [H]
    double c = 0.0;  ///< shunt capacitance at the node [F]
};

struct DcNodeConfig {
    int id = 0;
    double c = 0.0;  ///< [F]
    double g = 0.0;  ///< [S]
};

struct DcLineConfig {
    std::string name;
    int from = 0, to = 0;
    double r = 0.0;  ///< [Ohm]
    double l = 0.0;  ///< [H]
};

struct AnalysisConfig {
    double f_min_hz = 0.1;
    double f_max_hz = 1000.0;
    int grid_points = 400;
    double capture_radius = 0.3;
    double newton_tolerance = 1e-8;
    int max_iterations = 50;
    double increment = 0.05;
    double condition_cap = 1e12;
};

struct ScanConfig {
    double f_min_hz = 2.0;
    double f_max_hz = 500.0;
    int points = 24;
    double amplitude = 0.01;
    double max_dt = 1e-5;
};

struct SimulationConfig {
    double dt = 2e-5;
    double t_end = 6.0;
    double kick = 0.01;  ///< initial sync-angle offset [rad], and the same fraction on dc voltages
    int pade_order = 2;
};

struct CaseOverride {
    std::string path;
    std::string value;
};

struct CaseDefinition {
    std::string name;
    std::string description;
    std::vector<CaseOverride> overrides;
};

struct SystemConfig {
    std::string name;
    double frequency_hz = 50.0;
    std::vector<ConverterConfig> converters;
    std::vector<AcGridConfig> ac_grids;
    std::string dc_name = "g";
    std::vector<DcNodeConfig> dc_nodes;
    std::vector<DcLineConfig> dc_lines;
    AnalysisConfig analysis;
    ScanConfig scan;
    SimulationConfig simulation;
    std::vector<CaseDefinition> cases;
    std::string active_case;  ///< empty for the baseline

    double omega1() const;
    const ConverterConfig& converter(const std::string& name) const;
};

/// Parses `text`; when `case_name` is non-empty its overrides are applied before validation.
SystemConfig parse_config(const std::string& text, const std::string& case_name = "",
                          const std::string& source = "<config>");
SystemConfig load_config(const std::string& path, const std::string& case_name = "");

}  // namespace eimnet
