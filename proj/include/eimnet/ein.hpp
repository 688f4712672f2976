#pragma once

// Extended impedance network: node-admittance assembly with virtual sync
// nodes, converter admittance stacking, per-unit scaling and loop gain.

#include "eimnet/converter_eim.hpp"
#include "eimnet/lti.hpp"

#include <optional>
#include <string>
#include <vector>

namespace eimnet {

enum class NodeKind { sync, ac, dc };

inline int node_width(NodeKind k) { return k == NodeKind::ac ? 2 : 1; }

struct NetworkNode {
    int id = 0;
    NodeKind kind = NodeKind::ac;
    std::string owner;
    double current_base = 1.0;
    double voltage_base = 1.0;

    int width() const { return node_width(kind); }
};

/// Ordered node list (ascending id) with scalar offsets.
class NodeTable {
public:
    void add(NetworkNode node);

    const std::vector<NetworkNode>& nodes() const { return nodes_; }
    const NetworkNode& node(int id) const;
    bool contains(int id) const;
    /// First scalar index of the node in the global ordering.
    Index offset(int id) const;
    Index total_width() const;

private:
    std::vector<NetworkNode> nodes_;
};

/// A passive stamp: `y` between node `a` and node `b`, or from `a` to ground when `b` is empty.
struct PassiveElement {
    std::string label;
    std::string group;  ///< component name used for sensitivity reporting (e.g. "ac_g1")
    int a = 0;
    std::optional<int> b;
    TransferMatrix y;
};

/// R + sL in the dq frame rotating at omega1 (2x2 impedance).
TransferMatrix dq_series_rl(double r, double l, double omega1);
/// sC in the dq frame (2x2 admittance).
TransferMatrix dq_shunt_c(double c, double omega1);

PassiveElement ac_rl_to_ground(std::string label, std::string group, int node, double r, double l, double omega1);
PassiveElement ac_shunt_c(std::string label, std::string group, int node, double c, double omega1);
PassiveElement ac_series_rl(std::string label, std::string group, int a, int b, double r, double l, double omega1);
PassiveElement dc_shunt_c(std::string label, std::string group, int node, double c);
PassiveElement dc_shunt_g(std::string label, std::string group, int node, double g);
PassiveElement dc_series_rl(std::string label, std::string group, int a, int b, double r, double l);

struct ConverterAttachment {
    std::string name;
    FourPortEim eim;
    int sync_node = 0;
    int ac_node = 0;
    int dc_node = 0;
};

struct EinSystem {
    NodeTable nodes;
    std::vector<PassiveElement> elements;
    std::vector<ConverterAttachment> converters;

    /// Checks node kinds, sync-node ownership and element terminals. Throws std::invalid_argument.
    void validate() const;
};

/// Global scalar indices of a converter's ports in canonical (sync, d, q, dc) order.
std::vector<Index> converter_port_indices(const EinSystem& sys, const ConverterAttachment& conv);

/// Stamped node-admittance matrix, sync diagonals carrying -1/Z_sync_fo.
TransferMatrix assemble_node_admittance(const EinSystem& sys);
TransferMatrix assemble_znet(const EinSystem& sys);
TransferMatrix assemble_ycon(const EinSystem& sys);

/// Diagonal I_b and U_b over the global scalar ordering.
struct BaseVectors {
    Eigen::VectorXd current;
    Eigen::VectorXd voltage;
};
BaseVectors base_vectors(const EinSystem& sys);

/// (U_b^{-1} Z I_b, I_b^{-1} Y U_b)
std::pair<TransferMatrix, TransferMatrix> per_unit(const EinSystem& sys, const TransferMatrix& z, const TransferMatrix& y);

/// Per-unit Z_net * Y_con.
TransferMatrix loop_gain(const EinSystem& sys);

/// [I + Z Y]^{-1} Z i_node (physical units). Throws SingularAtS at a mode.
CVector closed_loop_voltage(const EinSystem& sys, const CVector& i_node, cplx s, const EvalOptions& opts = {});

/// A connected block of Z_net (one passive component group, or one sync node).
struct ZComponent {
    std::string label;             ///< e.g. "Z_ac_g1", "Z_sync_fo_SEC"
    std::vector<Index> indices;    ///< global scalar indices, ascending
};
std::vector<ZComponent> z_components(const EinSystem& sys);

/// One named block of one converter's EIM, located in the global ordering.
struct YComponent {
    std::string label;             ///< e.g. "Y_ac_SEC"
    std::vector<Index> rows, cols; ///< global scalar indices
};
std::vector<YComponent> y_components(const EinSystem& sys);

}  // namespace eimnet
