#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gridmrf/tree_inference.hpp"
#include "test_support.hpp"

using namespace gridmrf;

namespace {

// Compare exact conditional marginals and log-partition from the two-pass
// machinery against direct enumeration, for one (model, partition, side).
void check_side_against_enumeration(const GridMrf& mrf, const Partition& partition, int side,
                                    std::span<const int> complement_labels) {
    const ConditionedTree tree = condition_side(mrf, partition, side, complement_labels);
    REQUIRE(tree.nodes() == partition.side(side));

    const MessageSet msgs = upward_messages(tree);
    const std::vector<double> marg = node_conditional_marginals(tree, msgs);
    const test::SideConditional ref =
        test::enumerate_side_conditional(mrf, partition, side, complement_labels);

    CHECK(test::max_abs_diff(marg, ref.marginals) < 1e-12);
    CHECK(conditioned_log_partition(tree, msgs) ==
          doctest::Approx(ref.log_partition).epsilon(1e-12));
}

}  // namespace

TEST_CASE("conditioned-side marginals match enumeration across models and partitions") {
    const GridMrf models[] = {
        test::potts_model(3, 3, 3, 0.8, 0.5, 1001),
        test::random_table_model(3, 4, 2, 31, 1002),
        test::random_table_model(2, 3, 3, 32, 1003),
    };
    int label_seed = 50;
    for (const GridMrf& mrf : models) {
        for (const Partition& p : {checkerboard_partition(mrf), comb_tree_partition(mrf)}) {
            for (int side = 1; side <= 2; ++side) {
                const auto comp = test::random_labels(
                    static_cast<int>(p.side(3 - side).size()), mrf.n_states(), ++label_seed);
                check_side_against_enumeration(mrf, p, side, comp);
            }
        }
    }
}

TEST_CASE("reconditioning the skeleton matches a fresh build") {
    const GridMrf mrf = test::random_table_model(3, 3, 3, 41, 42);
    const Partition p = comb_tree_partition(mrf);
    ConditionedTree tree(mrf, p, 1);

    for (int round = 0; round < 3; ++round) {
        const auto comp =
            test::random_labels(static_cast<int>(p.side2.size()), mrf.n_states(), 900 + round);
        tree.recondition(comp);
        const MessageSet msgs = upward_messages(tree);
        const std::vector<double> marg = node_conditional_marginals(tree, msgs);
        const test::SideConditional ref = test::enumerate_side_conditional(mrf, p, 1, comp);
        CHECK(test::max_abs_diff(marg, ref.marginals) < 1e-12);
        CHECK(conditioned_log_partition(tree, msgs) ==
              doctest::Approx(ref.log_partition).epsilon(1e-12));
    }

    // recondition_full reads the complement out of a full assignment.
    std::vector<int> full = test::random_labels(mrf.n_nodes(), mrf.n_states(), 990);
    tree.recondition_full(full);
    std::vector<int> comp(p.side2.size());
    for (std::size_t i = 0; i < p.side2.size(); ++i) comp[i] = full[p.side2[i]];
    const MessageSet msgs = upward_messages(tree);
    const test::SideConditional ref = test::enumerate_side_conditional(mrf, p, 1, comp);
    CHECK(test::max_abs_diff(node_conditional_marginals(tree, msgs), ref.marginals) < 1e-12);
}

TEST_CASE("parity sides decompose into singleton components") {
    const GridMrf mrf = test::potts_model(3, 3, 2, 0.6, 0.2, 7);
    const Partition p = checkerboard_partition(mrf);
    const std::vector<int> comp(p.side2.size(), 0);
    const ConditionedTree tree = condition_side(mrf, p, 1, comp);
    CHECK(tree.size() == 5);
    CHECK(tree.n_components() == 5);
    for (int parent : tree.parent()) CHECK(parent == -1);

    // Each singleton's conditional is proportional to unary + cross edges.
    const MessageSet msgs = upward_messages(tree);
    const std::vector<double> marg = node_conditional_marginals(tree, msgs);
    const test::SideConditional ref = test::enumerate_side_conditional(mrf, p, 1, comp);
    CHECK(test::max_abs_diff(marg, ref.marginals) < 1e-12);
}

TEST_CASE("tree structure invariants hold on the comb") {
    const GridMrf mrf = test::potts_model(4, 5, 2, 0.5, 0.3, 8);
    const Partition p = comb_tree_partition(mrf);
    const std::vector<int> comp(p.side2.size(), 1);
    const ConditionedTree tree = condition_side(mrf, p, 1, comp);

    CHECK(tree.n_components() == 1);
    // The traversal visits every node once, children before parents.
    REQUIRE(tree.traversal().size() == static_cast<std::size_t>(tree.size()));
    std::vector<char> seen(tree.size(), 0);
    for (int local : tree.traversal()) {
        for (int child : tree.children()[local]) CHECK(seen[child] == 1);
        seen[local] = 1;
    }
    for (char s : seen) CHECK(s == 1);
}

TEST_CASE("exact joint draws reproduce the enumerated conditional") {
    // 6-state space is small enough for a tight empirical check: 3x2 grid,
    // comb side1 = top row (3 nodes), 2 states -> 8 joint configurations.
    const GridMrf mrf = test::random_table_model(3, 2, 2, 55, 56);
    const Partition p = comb_tree_partition(mrf);
    const auto comp = test::random_labels(static_cast<int>(p.side2.size()), 2, 57);
    const ConditionedTree tree = condition_side(mrf, p, 1, comp);
    const MessageSet msgs = upward_messages(tree);
    const test::SideConditional ref = test::enumerate_side_conditional(mrf, p, 1, comp);

    std::mt19937_64 rng(58);
    const int n_draws = 50000;
    std::vector<double> freq(ref.probs.size(), 0.0);
    for (int d = 0; d < n_draws; ++d) {
        const std::vector<int> x = ffbs_sample(tree, msgs, rng);
        REQUIRE(x.size() == static_cast<std::size_t>(tree.size()));
        std::size_t idx = 0;
        for (int lab : x) {
            REQUIRE(lab >= 0);
            REQUIRE(lab < 2);
            idx = idx * 2 + static_cast<std::size_t>(lab);
        }
        freq[idx] += 1.0 / n_draws;
    }
    CHECK(test::tv_distance(freq, ref.probs) < 0.02);
}

TEST_CASE("deterministic conditionals force the draw") {
    // One free node, huge unary gap: the draw must always take the favored
    // label and the marginal must be a point mass.
    std::vector<double> unary{0.0, -800.0, 0.0, 0.0};  // node 0 strongly prefers label 0
    const GridMrf mrf = build_grid_mrf_explicit(1, 2, 2, std::vector<int>{0, 0}, unary,
                                                std::vector<double>(4, 0.0));
    const Partition p = validate_partition(mrf, std::vector<int>{0});
    const ConditionedTree tree = condition_side(mrf, p, 1, std::vector<int>{1});
    const MessageSet msgs = upward_messages(tree);
    const std::vector<double> marg = node_conditional_marginals(tree, msgs);
    CHECK(marg[0] == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) CHECK(ffbs_sample(tree, msgs, rng)[0] == 0);
}

TEST_CASE("conditioned log-partition tracks the complement labels") {
    // Z(side | complement) summed against the complement's own mass must
    // reproduce the full partition function: log Z = LSE over complement of
    // [log Z(side|comp) + complement-only terms].
    const GridMrf mrf = test::random_table_model(2, 3, 2, 60, 61);
    const Partition p = comb_tree_partition(mrf);
    ConditionedTree tree(mrf, p, 1);

    const int k = mrf.n_states();
    const int m = static_cast<int>(p.side2.size());
    std::size_t count = 1;
    for (int i = 0; i < m; ++i) count *= static_cast<std::size_t>(k);

    std::vector<char> on_side1(mrf.n_nodes(), 0);
    for (int v : p.side1) on_side1[v] = 1;

    std::vector<double> terms(count);
    std::vector<int> comp(m);
    std::vector<int> label(mrf.n_nodes(), -1);
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::size_t rem = idx;
        for (int i = m - 1; i >= 0; --i) {
            comp[i] = static_cast<int>(rem % k);
            rem /= k;
        }
        tree.recondition(comp);
        const MessageSet msgs = upward_messages(tree);
        double complement_only = 0.0;
        for (int i = 0; i < m; ++i) complement_only += mrf.unary(p.side2[i])[comp[i]];
        for (std::size_t i = 0; i < p.side2.size(); ++i) label[p.side2[i]] = comp[i];
        for (int e = 0; e < static_cast<int>(mrf.edges().size()); ++e) {
            const auto& ed = mrf.edges()[e];
            if (on_side1[ed.a] || on_side1[ed.b]) continue;
            complement_only += mrf.edge_table(e)[static_cast<std::size_t>(label[ed.a]) * k + label[ed.b]];
        }
        terms[idx] = conditioned_log_partition(tree, msgs) + complement_only;
    }

    // Full log Z by brute force over everything.
    const EnumeratedJoint joint = enumerate_joint(mrf);
    CHECK(log_sum_exp(terms) == doctest::Approx(joint.log_z).epsilon(1e-12));
}
