#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gridmrf/grid_model.hpp"
#include "test_support.hpp"

using namespace gridmrf;

TEST_CASE("grid edges form the 4-neighbor lattice") {
    const GridMrf mrf = test::potts_model(3, 4, 2, 0.5, 0.1, 11);
    CHECK(mrf.n_nodes() == 12);
    CHECK(mrf.edges().size() == 3 * 3 + 2 * 4);  // right edges + down edges

    std::set<std::pair<int, int>> seen;
    for (const auto& e : mrf.edges()) {
        REQUIRE(e.a < e.b);
        const int ra = mrf.node_row(e.a), ca = mrf.node_col(e.a);
        const int rb = mrf.node_row(e.b), cb = mrf.node_col(e.b);
        CHECK(std::abs(ra - rb) + std::abs(ca - cb) == 1);
        CHECK(seen.insert({e.a, e.b}).second);
    }

    // Incidence lists mirror the edge list exactly.
    std::size_t total = 0;
    for (int v = 0; v < mrf.n_nodes(); ++v) {
        for (const auto& inc : mrf.incident(v)) {
            const auto& e = mrf.edges()[inc.edge];
            CHECK(((e.a == v && e.b == inc.other) || (e.b == v && e.a == inc.other)));
        }
        total += mrf.incident(v).size();
    }
    CHECK(total == 2 * mrf.edges().size());
}

TEST_CASE("smoothing-prior potentials fold observations into unaries") {
    const std::vector<int> obs{0, 1, 2, 1};
    PotentialSpec spec;
    spec.kind = PotentialSpec::Kind::potts;
    spec.potts_coupling = 0.8;
    spec.potts_obs_strength = 0.5;
    const GridMrf mrf = build_grid_mrf(2, 2, 3, spec, obs);

    CHECK_FALSE(mrf.per_edge_tables());
    for (int i = 0; i < 4; ++i) {
        for (int s = 0; s < 3; ++s)
            CHECK(mrf.unary(i)[s] == (s == obs[i] ? 0.5 : 0.0));
    }
    const auto t = mrf.edge_table(0);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(t[a * 3 + b] == (a == b ? 0.8 : 0.0));
}

TEST_CASE("random-table potentials are seeded, bounded, and deterministic") {
    const GridMrf m1 = test::random_table_model(2, 3, 3, 77, 5);
    const GridMrf m2 = test::random_table_model(2, 3, 3, 77, 5);
    const GridMrf m3 = test::random_table_model(2, 3, 3, 78, 5);

    bool any_diff = false;
    for (int i = 0; i < m1.n_nodes(); ++i) {
        for (int s = 0; s < 3; ++s) {
            CHECK(m1.unary(i)[s] == m2.unary(i)[s]);
            CHECK(std::abs(m1.unary(i)[s]) <= 1.0);
            if (m1.unary(i)[s] != m3.unary(i)[s]) any_diff = true;
        }
    }
    for (int v = 0; v < 9; ++v) {
        CHECK(m1.edge_table(0)[v] == m2.edge_table(0)[v]);
        CHECK(std::abs(m1.edge_table(0)[v]) <= 1.0);
    }
    CHECK(any_diff);

    // Two nodes with the same observation share the same unary column.
    const auto obs = m1.observations();
    for (int i = 0; i < m1.n_nodes(); ++i)
        for (int j = i + 1; j < m1.n_nodes(); ++j)
            if (obs[i] == obs[j])
                for (int s = 0; s < 3; ++s) CHECK(m1.unary(i)[s] == m1.unary(j)[s]);
}

TEST_CASE("model construction rejects malformed input") {
    PotentialSpec spec;
    const std::vector<int> obs4{0, 1, 0, 1};
    CHECK_THROWS_AS((void)build_grid_mrf(0, 2, 2, spec, obs4), std::invalid_argument);
    CHECK_THROWS_AS((void)build_grid_mrf(2, 2, 1, spec, obs4), std::invalid_argument);
    CHECK_THROWS_AS((void)build_grid_mrf(2, 2, 2, spec, std::vector<int>{0, 1, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)build_grid_mrf(2, 2, 2, spec, std::vector<int>{0, 1, 0, 2}),
                    std::invalid_argument);

    // Explicit builder: wrong unary or pairwise sizes, non-finite entries.
    CHECK_THROWS_AS((void)build_grid_mrf_explicit(1, 2, 2, std::vector<int>{0, 0},
                                                  std::vector<double>(3, 0.0),
                                                  std::vector<double>(4, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)build_grid_mrf_explicit(1, 2, 2, std::vector<int>{0, 0},
                                                  std::vector<double>(4, 0.0),
                                                  std::vector<double>(8, 0.0)),
                    std::invalid_argument);
    std::vector<double> bad_unary(4, 0.0);
    bad_unary[1] = std::nan("");
    CHECK_THROWS_AS((void)build_grid_mrf_explicit(1, 2, 2, std::vector<int>{0, 0}, bad_unary,
                                                  std::vector<double>(4, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("explicit per-edge tables are addressed per edge") {
    // 1x3 path: two edges with distinct tables.
    std::vector<double> pair(2 * 4, 0.0);
    pair[0 * 4 + 3] = 1.5;  // edge 0: psi(1,1)
    pair[1 * 4 + 0] = 2.5;  // edge 1: psi(0,0)
    const GridMrf mrf = build_grid_mrf_explicit(1, 3, 2, std::vector<int>{0, 0, 0},
                                                std::vector<double>(6, 0.0), pair);
    CHECK(mrf.per_edge_tables());
    CHECK(mrf.edge_table(0)[3] == 1.5);
    CHECK(mrf.edge_table(1)[0] == 2.5);
    CHECK(mrf.edge_table(0)[0] == 0.0);

    CHECK(unnormalized_log_joint(mrf, std::vector<int>{1, 1, 0}) == doctest::Approx(1.5));
    CHECK(unnormalized_log_joint(mrf, std::vector<int>{0, 0, 0}) == doctest::Approx(2.5));
    CHECK(unnormalized_log_joint(mrf, std::vector<int>{1, 1, 1}) == doctest::Approx(1.5));
    CHECK_THROWS_AS((void)unnormalized_log_joint(mrf, std::vector<int>{1, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)unnormalized_log_joint(mrf, std::vector<int>{1, 1, 2}),
                    std::invalid_argument);
}

TEST_CASE("parity split puts all edges across the cut") {
    const GridMrf mrf = test::potts_model(3, 3, 2, 0.3, 0.1, 9);
    const Partition p = checkerboard_partition(mrf);
    CHECK(p.label == PartitionLabel::checkerboard);
    CHECK_FALSE(p.fell_back);
    CHECK(p.side1 == std::vector<int>{0, 2, 4, 6, 8});
    CHECK(p.side2 == std::vector<int>{1, 3, 5, 7});
    CHECK(p.side1_structure == SideStructure::disconnected);
    CHECK(p.side2_structure == SideStructure::disconnected);
    for (int v : p.side1) CHECK(p.side(1)[0] <= v);
    for (const auto& e : mrf.edges()) {
        const bool a1 = std::binary_search(p.side1.begin(), p.side1.end(), e.a);
        const bool b1 = std::binary_search(p.side1.begin(), p.side1.end(), e.b);
        CHECK(a1 != b1);
    }
}

TEST_CASE("comb split interlocks two spanning trees") {
    const GridMrf mrf = test::potts_model(4, 4, 2, 0.3, 0.1, 13);
    const Partition p = comb_tree_partition(mrf);
    CHECK(p.label == PartitionLabel::comb_tree);
    CHECK_FALSE(p.fell_back);
    // Top row plus even-column teeth of the interior rows.
    CHECK(p.side1 == std::vector<int>{0, 1, 2, 3, 4, 6, 8, 10});
    // Bottom row plus odd-column teeth.
    CHECK(p.side2 == std::vector<int>{5, 7, 9, 11, 12, 13, 14, 15});
    CHECK(p.side1_structure == SideStructure::connected_tree);
    CHECK(p.side2_structure == SideStructure::connected_tree);
}

TEST_CASE("comb split on two rows uses the rows themselves") {
    const GridMrf mrf = test::potts_model(2, 5, 2, 0.3, 0.1, 13);
    const Partition p = comb_tree_partition(mrf);
    CHECK_FALSE(p.fell_back);
    CHECK(p.side1 == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(p.side2 == std::vector<int>{5, 6, 7, 8, 9});
    CHECK(p.side1_structure == SideStructure::connected_tree);
    CHECK(p.side2_structure == SideStructure::connected_tree);
}

TEST_CASE("comb split falls back to parity on a single row") {
    const GridMrf mrf = test::potts_model(1, 5, 2, 0.3, 0.1, 13);
    const Partition p = comb_tree_partition(mrf);
    CHECK(p.fell_back);
    CHECK(p.label == PartitionLabel::comb_tree);
    CHECK(p.side1 == std::vector<int>{0, 2, 4});
    CHECK(p.side2 == std::vector<int>{1, 3});
}

TEST_CASE("custom partitions are validated with a cycle witness") {
    const GridMrf mrf = test::potts_model(2, 2, 2, 0.3, 0.1, 21);

    // side1 = everything: the 4-cycle must be detected and reported.
    bool threw = false;
    try {
        (void)validate_partition(mrf, std::vector<int>{0, 1, 2, 3});
    } catch (const PartitionCycleError& e) {
        threw = true;
        REQUIRE(e.cycle.size() >= 4);
        // Consecutive witness nodes (cyclically) must be lattice neighbors.
        for (std::size_t i = 0; i < e.cycle.size(); ++i) {
            const int u = e.cycle[i];
            const int v = e.cycle[(i + 1) % e.cycle.size()];
            const int dr = std::abs(mrf.node_row(u) - mrf.node_row(v));
            const int dc = std::abs(mrf.node_col(u) - mrf.node_col(v));
            CHECK(dr + dc == 1);
        }
    }
    CHECK(threw);

    CHECK_THROWS_AS((void)validate_partition(mrf, std::vector<int>{0, 0}), std::invalid_argument);
    CHECK_THROWS_AS((void)validate_partition(mrf, std::vector<int>{4}), std::invalid_argument);

    // A legal custom split; input order must not matter.
    const Partition p = validate_partition(mrf, std::vector<int>{3, 0});
    CHECK(p.label == PartitionLabel::custom);
    CHECK(p.side1 == std::vector<int>{0, 3});
    CHECK(p.side2 == std::vector<int>{1, 2});
    CHECK(p.side1_structure == SideStructure::disconnected);

    const Partition q = validate_partition(mrf, std::vector<int>{0});
    CHECK(q.side1_structure == SideStructure::disconnected);  // no internal edges
    CHECK(q.side2_structure == SideStructure::connected_tree);
}

TEST_CASE("flipping a partition swaps the stage roles") {
    const GridMrf mrf = test::potts_model(3, 3, 2, 0.3, 0.1, 9);
    const Partition p = comb_tree_partition(mrf);
    const Partition q = flipped(p);
    CHECK(q.side1 == p.side2);
    CHECK(q.side2 == p.side1);
    CHECK(q.side1_structure == p.side2_structure);
    CHECK(q.side2_structure == p.side1_structure);
    CHECK(q.label == p.label);
}

TEST_CASE("forest sides are classified as forests") {
    // 3x3, side1 = two disjoint vertical dominoes -> forest (2 components,
    // each with an edge).
    const GridMrf mrf = test::potts_model(3, 3, 2, 0.3, 0.1, 9);
    const Partition p = validate_partition(mrf, std::vector<int>{0, 3, 2, 5});
    CHECK(p.side1_structure == SideStructure::forest);
}
