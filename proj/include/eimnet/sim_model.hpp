#pragma once

// Averaged nonlinear model of converters on ac buses and a dc network.
//
// Every ac bus carries its own dq frame rotating at omega1. A bus is either an
// ideal source (voltage prescribed, plus injection) or a Thevenin grid
// (source e_g behind R_g + L_g) with a shunt capacitor at the bus. DC buses are
// ideal sources or capacitor nodes joined by series R-L lines.
//
// Converter i_g flows from the ac bus into the converter; the converter
// delivers p_bridge / v_dc into its dc bus. The lumped control delay is a
// Pade approximant acting on the controller-frame voltage reference.

#include "eimnet/converter_eim.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace eimnet {

struct SimAcBus {
    std::string name;
    bool ideal = false;
    Dq u0 = Dq::Zero();   ///< equilibrium bus voltage (bus frame)
    Dq e_g = Dq::Zero();  ///< grid source (non-ideal only)
    double r_g = 0.0;
    double l_g = 0.0;
    double c = 0.0;       ///< shunt capacitance at the bus
};

struct SimDcBus {
    std::string name;
    bool ideal = false;
    double v0 = 0.0;
    double c = 0.0;
    double g = 0.0;  ///< shunt conductance
};

struct SimDcLine {
    std::string name;
    int from = 0, to = 0;  ///< dc bus indices
    double r = 0.0;
    double l = 0.0;
};

/// A converter with the set-points that hold `op` as its equilibrium.
struct SimConverter {
    ConverterSpec spec;
    OperatingPoint op;  ///< in the bus frame, sync angle zero
    int ac_bus = 0;
    int dc_bus = 0;
};

/// External inputs at one instant.
struct SimInputs {
    std::vector<Dq> ac;          ///< added to ideal ac bus voltages
    std::vector<double> dc;      ///< added to ideal dc bus voltages
    std::vector<double> sync;    ///< added to each converter's sync-loop input
};

/// Per-converter port quantities, in the same units as the EIM ports.
struct ConverterSignals {
    Dq u_g;          ///< bus frame
    Dq i_g;
    double v_dc;
    double i_dc;     ///< drawn from the dc bus
    double omega;    ///< sync frequency deviation [rad/s]
    double p_sync;   ///< PLL: controller-frame u_q; VSG: absorbed PoC power
    double theta;
};

/// Pade (n, n) approximant of e^{-sT} in controllable canonical form.
struct PadeRealization {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    double d = 1.0;

    Index order() const { return a.rows(); }
};
PadeRealization pade_delay(double seconds, int order);

class SimModel {
public:
    SimModel(std::vector<SimAcBus> ac, std::vector<SimDcBus> dc, std::vector<SimDcLine> lines,
             std::vector<SimConverter> converters, int pade_order = 2);

    Index size() const { return n_; }
    const std::vector<std::string>& state_names() const { return names_; }
    const std::vector<SimConverter>& converters() const { return conv_; }
    const std::vector<SimAcBus>& ac_buses() const { return ac_; }
    const std::vector<SimDcBus>& dc_buses() const { return dc_; }

    SimInputs zero_inputs() const;

    /// Equilibrium assembled from the operating points (no iteration).
    Eigen::VectorXd initial_state() const;

    void rhs(const Eigen::VectorXd& x, const SimInputs& in, Eigen::VectorXd& dx) const;
    Eigen::VectorXd rhs(const Eigen::VectorXd& x, const SimInputs& in) const;

    ConverterSignals signals(const Eigen::VectorXd& x, const SimInputs& in, std::size_t converter) const;

    /// Index of the first state of a converter (i_gd).
    Index converter_offset(std::size_t converter) const { return conv_off_[converter]; }

private:
    struct Derived {
        PadeRealization pade;
        double v_ref = 0.0;   ///< GFL dc reference
        double pq_ref = 0.0;  ///< GFL outer-loop power reference
        double p_ref = 0.0;   ///< VSG absorbed power reference
        Dq e_vir = Dq::Zero();  ///< VSG virtual emf (controller frame)
        double v_norm = 1.0;    ///< modulation normalisation
    };

    Dq bus_voltage(const Eigen::VectorXd& x, const SimInputs& in, int bus) const;
    double dc_voltage(const Eigen::VectorXd& x, const SimInputs& in, int bus) const;
    /// Controller reference currents, controller-frame u and i, sync deviation.
    void converter_core(const Eigen::VectorXd& x, const SimInputs& in, std::size_t k, Eigen::VectorXd* dx,
                        ConverterSignals* sig) const;

    std::vector<SimAcBus> ac_;
    std::vector<SimDcBus> dc_;
    std::vector<SimDcLine> lines_;
    std::vector<SimConverter> conv_;
    std::vector<Derived> derived_;

    std::vector<Index> ac_off_, dc_off_, line_off_, conv_off_;
    std::vector<std::string> names_;
    Index n_ = 0;
};

}  // namespace eimnet
