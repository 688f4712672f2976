#pragma once

// Turns a SystemConfig into operating points, the extended impedance network
// and the time-domain model of the same system.

#include "eimnet/config.hpp"
#include "eimnet/ein.hpp"
#include "eimnet/sim_model.hpp"

#include <map>
#include <vector>

namespace eimnet {

struct SystemOperatingPoint {
    std::vector<OperatingPoint> converters;  ///< same order as SystemConfig::converters
    std::map<int, double> dc_voltages;       ///< by dc node id
};

/// PLL converters hold their dc node voltage; VSG converters fix their PoC power. Damped Newton on
/// the dc-network KCL of the remaining nodes. Throws NoConvergence.
SystemOperatingPoint solve_system_operating_point(const SystemConfig& cfg);

EinSystem build_ein(const SystemConfig& cfg, const SystemOperatingPoint& op);
SimModel build_sim(const SystemConfig& cfg, const SystemOperatingPoint& op);

struct BuiltCase {
    SystemConfig config;
    SystemOperatingPoint op;
    EinSystem ein;
};
BuiltCase build_case(const SystemConfig& cfg);

}  // namespace eimnet
