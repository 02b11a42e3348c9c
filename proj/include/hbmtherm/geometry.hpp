#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbmtherm/errors.hpp"

namespace hbmtherm {

using BankId = std::int32_t;

// W x D x L lattice of memory banks. Layer 0 is the die next to the logic
// die and heat sink; banks are numbered row-major within a layer,
// layer-major across the stack.
struct StackGeometry {
    int width = 4;  ///< banks per row
    int depth = 4;  ///< rows per layer
    int layers = 8; ///< stacked dies

    int total_banks() const { return width * depth * layers; }
    int banks_per_layer() const { return width * depth; }

    void validate() const {
        if (width < 1 || depth < 1 || layers < 1) {
            throw DomainError("geometry: width, depth and layers must each be >= 1");
        }
    }

    bool operator==(const StackGeometry&) const = default;
};

struct BankCoord {
    int layer = 0;
    int row = 0;
    int col = 0;

    bool operator==(const BankCoord&) const = default;
};

enum class NeighborKind { Lateral, Vertical };

struct Neighbor {
    BankId id;
    NeighborKind kind;
};

inline BankId linear_index(const BankCoord& c, const StackGeometry& g) {
    g.validate();
    if (c.layer < 0 || c.layer >= g.layers || c.row < 0 || c.row >= g.depth ||
        c.col < 0 || c.col >= g.width) {
        throw DomainError("geometry: coordinate (" + std::to_string(c.layer) + "," +
                          std::to_string(c.row) + "," + std::to_string(c.col) +
                          ") outside lattice");
    }
    return static_cast<BankId>(c.layer * g.banks_per_layer() + c.row * g.width + c.col);
}

inline BankCoord coord_of(BankId id, const StackGeometry& g) {
    g.validate();
    if (id < 0 || id >= g.total_banks()) {
        throw DomainError("geometry: bank id " + std::to_string(id) + " outside [0, " +
                          std::to_string(g.total_banks()) + ")");
    }
    const int per_layer = g.banks_per_layer();
    BankCoord c;
    c.layer = id / per_layer;
    const int rem = id % per_layer;
    c.row = rem / g.width;
    c.col = rem % g.width;
    return c;
}

// In-plane 4-neighborhood (no diagonals, no wraparound) plus the aligned
// banks one layer up and down. The relation is symmetric.
inline std::vector<Neighbor> neighbors(BankId id, const StackGeometry& g) {
    const BankCoord c = coord_of(id, g);
    std::vector<Neighbor> out;
    out.reserve(6);
    auto push = [&](int layer, int row, int col, NeighborKind kind) {
        out.push_back({linear_index({layer, row, col}, g), kind});
    };
    if (c.row > 0) push(c.layer, c.row - 1, c.col, NeighborKind::Lateral);
    if (c.row + 1 < g.depth) push(c.layer, c.row + 1, c.col, NeighborKind::Lateral);
    if (c.col > 0) push(c.layer, c.row, c.col - 1, NeighborKind::Lateral);
    if (c.col + 1 < g.width) push(c.layer, c.row, c.col + 1, NeighborKind::Lateral);
    if (c.layer > 0) push(c.layer - 1, c.row, c.col, NeighborKind::Vertical);
    if (c.layer + 1 < g.layers) push(c.layer + 1, c.row, c.col, NeighborKind::Vertical);
    return out;
}

} // namespace hbmtherm
