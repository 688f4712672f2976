#pragma once

// Three independent stability verdicts on one system: the impedance-network
// mode search, eigenvalues of the linearised time-domain model, and a kicked
// nonlinear simulation.

#include "eimnet/case_builder.hpp"
#include "eimnet/fma.hpp"
#include "eimnet/simulate.hpp"

#include <optional>
#include <string>

namespace eimnet {

enum class SimVerdict { settled, growing, blowup, inconclusive };
std::string to_string(SimVerdict v);

struct SimOutcome {
    SimVerdict verdict = SimVerdict::inconclusive;
    double growth = 0.0;        ///< late-window / early-window peak deviation
    double end_time = 0.0;      ///< t_end, or the blowup time
    double peak_hz = 0.0;       ///< DFT peak of the dominant probe, 0 when nothing moved
    std::string peak_probe;
    bool unstable() const { return verdict == SimVerdict::growing || verdict == SimVerdict::blowup; }
};

struct OracleOptions {
    double record_dt = 2e-4;       ///< decimated sample spacing
    double early_start = 2.0;      ///< skip the kick transient
    double window = 1.0;           ///< growth comparison windows [s]
    double growth_unstable = 1.5;
    double growth_stable = 0.67;
    double f_lo_hz = 0.5;
    double f_hi_hz = 1000.0;
};

struct OracleResult {
    ModeSearchResult ein;
    std::optional<Mode> ein_mode;  ///< least-damped captured mode
    LinearizedModel ss;
    cplx ss_rightmost;             ///< eigenvalue with the largest real part
    std::optional<cplx> ss_match;  ///< oscillatory eigenvalue nearest ein_mode
    SimOutcome sim;

    bool ein_unstable() const { return !ein.stable(); }
    bool ss_unstable() const { return ss_rightmost.real() > 0.0; }
    bool verdicts_agree() const;
};

ModeSearchOptions mode_search_options(const SystemConfig& cfg);

SimOutcome run_kicked_simulation(const SimModel& model, const SystemConfig& cfg, const OracleOptions& opts = {});

OracleResult run_oracle(const BuiltCase& bc, const OracleOptions& opts = {});

}  // namespace eimnet
