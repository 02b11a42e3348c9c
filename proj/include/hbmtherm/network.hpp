#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"
#include "hbmtherm/geometry.hpp"
#include "hbmtherm/linalg.hpp"

namespace hbmtherm {

// Thermal RC parameters of the stack. The vertical resistance folds in
// bonding interfaces and TSV density; it exceeds the lateral one in any
// physically meaningful configuration. r_sink may be +infinity to model an
// adiabatic bottom (test scenarios only).
struct MaterialParams {
    double r_lat = 2.0;        ///< K/W between in-plane neighbors
    double r_vert = 20.0;      ///< K/W between stacked neighbors
    double c_bank = 5e-3;      ///< J/K per bank
    double r_sink = 10.0;      ///< K/W from each layer-0 bank to ambient
    double t_ambient = 318.15; ///< K

    void validate() const {
        if (!(r_lat > 0.0)) throw DomainError("material: r_lat must be > 0");
        if (!(r_vert > 0.0)) throw DomainError("material: r_vert must be > 0");
        if (!(c_bank > 0.0)) throw DomainError("material: c_bank must be > 0");
        if (!(r_sink > 0.0)) throw DomainError("material: r_sink must be > 0");
        if (!(t_ambient > 0.0)) throw DomainError("material: t_ambient must be > 0");
    }
};

// Heat flow from node i to node j through resistance r. Antisymmetric in
// the two temperatures.
inline double pairwise_flux(double t_i, double t_j, double r) {
    if (!(r > 0.0)) {
        throw DomainError("pairwise_flux: thermal resistance must be > 0");
    }
    return (t_i - t_j) / r;
}

// The assembled RC network for C dTheta/dt + G Theta = P, where Theta is
// temperature rise over ambient. G couples each lattice edge with -1/r off
// the diagonal; each diagonal entry carries the negated row sum plus the
// sink conductance, so every row of G sums to the node's sink coupling.
// Immutable after build_network; safe to share across threads.
struct ThermalNetwork {
    int n = 0;
    CsrMatrix conductance;                 ///< G, W/K, symmetric
    std::vector<double> capacitance;       ///< C diagonal, J/K
    std::vector<double> sink_conductance;  ///< W/K, nonzero only on layer 0
    double t_ambient = 318.15;
    StackGeometry geometry;

    bool has_sink() const {
        for (double g : sink_conductance) {
            if (g > 0.0) return true;
        }
        return false;
    }
};

inline ThermalNetwork build_network(const StackGeometry& geom, const MaterialParams& params) {
    geom.validate();
    params.validate();

    const int n = geom.total_banks();
    const double g_lat = 1.0 / params.r_lat;
    const double g_vert = 1.0 / params.r_vert;
    const double g_sink = std::isinf(params.r_sink) ? 0.0 : 1.0 / params.r_sink;

    CsrBuilder builder(n);
    std::vector<double> sink(static_cast<std::size_t>(n), 0.0);
    for (BankId i = 0; i < n; ++i) {
        double diag = 0.0;
        for (const Neighbor& nb : neighbors(i, geom)) {
            const double g = (nb.kind == NeighborKind::Lateral) ? g_lat : g_vert;
            builder.add(i, nb.id, -g);
            diag += g;
        }
        if (coord_of(i, geom).layer == 0) {
            sink[static_cast<std::size_t>(i)] = g_sink;
            diag += g_sink;
        }
        builder.add(i, i, diag);
    }

    ThermalNetwork net;
    net.n = n;
    net.conductance = builder.build();
    net.capacitance.assign(static_cast<std::size_t>(n), params.c_bank);
    net.sink_conductance = std::move(sink);
    net.t_ambient = params.t_ambient;
    net.geometry = geom;
    return net;
}

} // namespace hbmtherm
