#include "catch2/catch_amalgamated.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include "hbmtherm/geometry.hpp"

using namespace hbmtherm;

namespace {

std::set<BankId> ids_of_kind(const std::vector<Neighbor>& nbs, NeighborKind kind) {
    std::set<BankId> out;
    for (const Neighbor& nb : nbs) {
        if (nb.kind == kind) out.insert(nb.id);
    }
    return out;
}

} // namespace

TEST_CASE("linear index is layer-major then row-major") {
    const StackGeometry geom{4, 4, 8};
    CHECK(linear_index({0, 0, 0}, geom) == 0);
    CHECK(linear_index({0, 2, 1}, geom) == 9);
    CHECK(linear_index({1, 2, 1}, geom) == 25);
    CHECK(linear_index({2, 2, 1}, geom) == 41);
    CHECK(linear_index({7, 3, 3}, geom) == 127);
}

TEST_CASE("coord_of inverts linear_index") {
    const StackGeometry geom{4, 4, 8};
    const BankCoord c25 = coord_of(25, geom);
    CHECK(c25.layer == 1);
    CHECK(c25.row == 2);
    CHECK(c25.col == 1);
    const BankCoord c127 = coord_of(127, geom);
    CHECK(c127.layer == 7);
    CHECK(c127.row == 3);
    CHECK(c127.col == 3);

    for (const StackGeometry g : {StackGeometry{4, 4, 8}, StackGeometry{1, 1, 1},
                                  StackGeometry{3, 2, 5}}) {
        for (BankId id = 0; id < g.total_banks(); ++id) {
            CHECK(linear_index(coord_of(id, g), g) == id);
        }
    }
}

TEST_CASE("index bounds are enforced") {
    const StackGeometry geom{4, 4, 8};
    CHECK_THROWS_AS(linear_index({8, 0, 0}, geom), DomainError);
    CHECK_THROWS_AS(linear_index({0, 4, 0}, geom), DomainError);
    CHECK_THROWS_AS(linear_index({0, 0, -1}, geom), DomainError);
    CHECK_THROWS_AS(coord_of(-1, geom), DomainError);
    CHECK_THROWS_AS(coord_of(128, geom), DomainError);
    CHECK_THROWS_AS((StackGeometry{0, 4, 8}).validate(), DomainError);
}

TEST_CASE("bank 25 touches 24/26 laterally and 9/41 vertically") {
    const StackGeometry geom{4, 4, 8};
    const std::vector<Neighbor> nbs = neighbors(25, geom);
    CHECK(ids_of_kind(nbs, NeighborKind::Lateral) == std::set<BankId>{21, 24, 26, 29});
    CHECK(ids_of_kind(nbs, NeighborKind::Vertical) == std::set<BankId>{9, 41});
}

TEST_CASE("corner bank 0 has two lateral and one vertical neighbor") {
    const StackGeometry geom{4, 4, 8};
    const std::vector<Neighbor> nbs = neighbors(0, geom);
    CHECK(ids_of_kind(nbs, NeighborKind::Lateral) == std::set<BankId>{1, 4});
    CHECK(ids_of_kind(nbs, NeighborKind::Vertical) == std::set<BankId>{16});
}

TEST_CASE("a single-bank stack has no neighbors") {
    CHECK(neighbors(0, StackGeometry{1, 1, 1}).empty());
}

TEST_CASE("adjacency is symmetric and each neighbor appears once") {
    for (const StackGeometry g : {StackGeometry{4, 4, 8}, StackGeometry{2, 3, 1},
                                  StackGeometry{1, 1, 4}, StackGeometry{3, 3, 3}}) {
        std::size_t degree_sum = 0;
        for (BankId i = 0; i < g.total_banks(); ++i) {
            const std::vector<Neighbor> nbs = neighbors(i, g);
            degree_sum += nbs.size();
            std::set<BankId> seen;
            for (const Neighbor& nb : nbs) {
                CHECK(seen.insert(nb.id).second);
                const std::vector<Neighbor> back = neighbors(nb.id, g);
                CHECK(std::any_of(back.begin(), back.end(),
                                  [&](const Neighbor& b) { return b.id == i; }));
            }
        }
        CHECK(degree_sum % 2 == 0);
    }
}

TEST_CASE("4x4x8 edge counts: 24 lateral per layer, 112 vertical, 304 total") {
    const StackGeometry geom{4, 4, 8};
    int lateral_layer0 = 0;
    int vertical = 0;
    int total = 0;
    for (BankId i = 0; i < geom.total_banks(); ++i) {
        for (const Neighbor& nb : neighbors(i, geom)) {
            if (nb.id < i) continue; // count each edge once
            ++total;
            if (nb.kind == NeighborKind::Vertical) ++vertical;
            else if (coord_of(i, geom).layer == 0) ++lateral_layer0;
        }
    }
    CHECK(lateral_layer0 == 24);
    CHECK(vertical == 112);
    CHECK(total == 304);
}
