#pragma once

#include <random>
#include <span>
#include <vector>

#include "gridmrf/grid_model.hpp"

namespace gridmrf {

// One partition side with the complement's labels absorbed as evidence.
// The topology (rooted forest, traversal, cross-edge list) depends only on
// (mrf, partition, side); recondition() refreshes the evidence in place so
// samplers can reuse the skeleton every iteration.
class ConditionedTree {
public:
    ConditionedTree(const GridMrf& mrf, const Partition& partition, int side);

    // Re-absorb evidence from labels aligned with the complement side's
    // sorted node list.
    void recondition(std::span<const int> complement_labels);
    // Same, reading the complement values out of a full-grid assignment.
    void recondition_full(std::span<const int> full_assignment);

    const GridMrf& mrf() const { return *mrf_; }
    int n_states() const { return n_states_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    int n_components() const { return static_cast<int>(roots_.size()); }

    const std::vector<int>& nodes() const { return nodes_; }          // global ids, ascending
    const std::vector<int>& parent() const { return parent_; }        // local; -1 at roots
    const std::vector<int>& roots() const { return roots_; }          // local, ascending root id
    const std::vector<int>& traversal() const { return traversal_; }  // children before parents
    const std::vector<int>& component_of() const { return component_of_; }
    const std::vector<std::vector<int>>& children() const { return children_; }

    // exp(effective unary - node shift) after the latest recondition: the
    // node's evidence factor in the linear domain, entries in [0, 1]. The
    // label-independent shift is folded into node_log_shift().
    std::span<const double> effective_unary_exp(int local) const {
        return {effective_unary_exp_.data() + static_cast<std::size_t>(local) * n_states_,
                static_cast<std::size_t>(n_states_)};
    }

    // Sum of the max-entry shifts factored out of this node's unary, its
    // cross-edge tables, and its parent-edge table, so exp() never overflows
    // however large the log-potentials are. Adding it back per node keeps the
    // conditional log-partition exact.
    double node_log_shift(int local) const { return node_log_shift_[local]; }

    // log psi(child_label, parent_label) for the edge above `local`.
    double parent_pair_log(int local, int child_label, int parent_label) const {
        const double* t = parent_table_[local];
        return parent_transposed_[local]
                   ? t[static_cast<std::size_t>(parent_label) * n_states_ + child_label]
                   : t[static_cast<std::size_t>(child_label) * n_states_ + parent_label];
    }

    // exp(table - table max) for the same edge, baked
    // [child_label][parent_label] at construction so the message passes touch
    // contiguous rows and never branch on orientation. Rows for roots are all
    // zero and unused.
    const double* parent_pair_exp(int local) const {
        return parent_pair_exp_.data() +
               static_cast<std::size_t>(local) * n_states_ * n_states_;
    }

    // True when the baked parent-edge table is diag on the diagonal and off
    // everywhere else, enabling O(k) messages.
    bool parent_is_potts(int local) const { return parent_is_potts_[local] != 0; }
    double parent_potts_diag(int local) const { return parent_potts_diag_[local]; }
    double parent_potts_off(int local) const { return parent_potts_off_[local]; }

private:
    const GridMrf* mrf_;
    int n_states_;
    std::vector<int> nodes_;
    std::vector<int> parent_;
    std::vector<std::vector<int>> children_;
    std::vector<int> roots_;
    std::vector<int> traversal_;
    std::vector<int> component_of_;
    std::vector<const double*> parent_table_;
    std::vector<char> parent_transposed_;
    std::vector<double> parent_pair_exp_;  // size * n_states^2, [child][parent]
    std::vector<char> parent_is_potts_;
    std::vector<double> parent_potts_diag_;
    std::vector<double> parent_potts_off_;
    std::vector<double> unary_exp_;        // exp(unary - node max), static per model
    std::vector<double> effective_unary_exp_;
    std::vector<double> node_log_shift_;

    struct CrossEdge {
        int local;
        int other;               // global id on the complement side
        std::size_t exp_offset;  // row-major [local_label][other_label] in cross_exp_
    };
    std::vector<CrossEdge> cross_edges_;
    std::vector<double> cross_exp_;  // exp(table - table max), orientation baked
    std::vector<int> complement_nodes_;    // sorted complement ids
    std::vector<int> complement_slot_;     // global id -> position in complement_nodes_
};

ConditionedTree condition_side(const GridMrf& mrf, const Partition& partition, int side,
                               std::span<const int> complement_labels);

// Upward (child->parent) sum-product messages. Stored in the linear domain,
// each row max-normalized to 1, so the k^2 inner loops are pure multiply-adds;
// every factored-out scale accumulates as a log in the component's constant,
// keeping the conditional log-partition exact.
struct MessageSet {
    int n_states = 0;
    std::vector<double> up;              // size * n_states; roots' rows unused
    std::vector<double> norm_constants;  // per component: sum of factored-out logs
    std::vector<double> below;           // exp(effective unary) x child messages, per node
};

MessageSet upward_messages(const ConditionedTree& tree);
void upward_messages_into(const ConditionedTree& tree, MessageSet& msgs);

// Exact per-node conditional marginals p(x_i | x_complement, y), via the
// downward pass. Output is size*n_states row-major, rows summing to 1.
std::vector<double> node_conditional_marginals(const ConditionedTree& tree, const MessageSet& msgs);
void node_conditional_marginals_into(const ConditionedTree& tree, const MessageSet& msgs,
                                     std::vector<double>& out, std::vector<double>& scratch);

// One exact joint draw from the side's conditional, root-to-leaf.
std::vector<int> ffbs_sample(const ConditionedTree& tree, const MessageSet& msgs,
                             std::mt19937_64& rng);
void ffbs_sample_into(const ConditionedTree& tree, const MessageSet& msgs, std::mt19937_64& rng,
                      std::span<int> out, std::vector<double>& scratch);

// log sum over all side assignments of the conditional energy; additive over
// forest components.
double conditioned_log_partition(const ConditionedTree& tree, const MessageSet& msgs);

}  // namespace gridmrf
