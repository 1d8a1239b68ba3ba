#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridmrf {

// How the pairwise/observation potentials are parameterized.
struct PotentialSpec {
    enum class Kind { potts, random_table };
    Kind kind = Kind::potts;
    double potts_coupling = 0.0;      // beta: pairwise log-boost for equal states
    double potts_obs_strength = 0.0;  // alpha: unary log-boost for matching the observation
    std::uint64_t table_seed = 0;     // seeds the random_table family
};

struct GridEdge {
    int a = 0;  // node index, a < b
    int b = 0;
};

// Discrete MRF on a 4-neighbor lattice. Observations are folded into the
// per-node unary log-potentials at build time; the y labels are kept only
// for inspection/initialization. Immutable after construction.
class GridMrf {
public:
    GridMrf(int rows, int cols, int n_states,
            std::vector<int> observations,
            std::vector<double> unary_log,
            std::vector<double> pair_tables,
            bool per_edge_tables);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int n_states() const { return n_states_; }
    int n_nodes() const { return rows_ * cols_; }
    int node_id(int r, int c) const { return r * cols_ + c; }
    int node_row(int i) const { return i / cols_; }
    int node_col(int i) const { return i % cols_; }

    const std::vector<GridEdge>& edges() const { return edges_; }
    std::span<const int> observations() const { return observations_; }

    std::span<const double> unary(int node) const {
        return {unary_log_.data() + static_cast<std::size_t>(node) * n_states_,
                static_cast<std::size_t>(n_states_)};
    }

    // Pairwise table of edge e, row-major [label_a][label_b].
    std::span<const double> edge_table(int e) const {
        const std::size_t k2 = static_cast<std::size_t>(n_states_) * n_states_;
        const std::size_t off = per_edge_tables_ ? k2 * e : 0;
        return {pair_tables_.data() + off, k2};
    }

    // Edges incident to a node, as (edge index, other endpoint) pairs.
    struct Incidence {
        int edge = 0;
        int other = 0;
    };
    std::span<const Incidence> incident(int node) const {
        return {incidence_.data() + inc_offset_[node],
                static_cast<std::size_t>(inc_offset_[node + 1] - inc_offset_[node])};
    }

    bool per_edge_tables() const { return per_edge_tables_; }

private:
    int rows_, cols_, n_states_;
    std::vector<int> observations_;
    std::vector<double> unary_log_;   // n_nodes * n_states
    std::vector<double> pair_tables_; // k*k (shared) or n_edges*k*k
    bool per_edge_tables_;
    std::vector<GridEdge> edges_;
    std::vector<Incidence> incidence_;
    std::vector<int> inc_offset_;
};

GridMrf build_grid_mrf(int rows, int cols, int n_states, const PotentialSpec& spec,
                       std::span<const int> observations);

// Generality path: explicit per-node unaries and per-edge pairwise tables
// (edge order matches GridMrf::edges()).
GridMrf build_grid_mrf_explicit(int rows, int cols, int n_states,
                                std::span<const int> observations,
                                std::vector<double> unary_log,
                                std::vector<double> per_edge_pair_tables);

double unnormalized_log_joint(const GridMrf& mrf, std::span<const int> x);

enum class SideStructure { disconnected, forest, connected_tree };
enum class PartitionLabel { checkerboard, comb_tree, custom };

// Two-block node split. Each side's induced subgraph is acyclic, so its
// conditional given the other side is exactly tree-solvable.
struct Partition {
    std::vector<int> side1;  // sorted node indices
    std::vector<int> side2;
    SideStructure side1_structure = SideStructure::disconnected;
    SideStructure side2_structure = SideStructure::disconnected;
    PartitionLabel label = PartitionLabel::custom;
    bool fell_back = false;  // comb constructor fell back to checkerboard (rows < 2)

    const std::vector<int>& side(int s) const { return s == 1 ? side1 : side2; }
};

struct PartitionCycleError : std::invalid_argument {
    PartitionCycleError(const std::string& msg, std::vector<int> witness)
        : std::invalid_argument(msg), cycle(std::move(witness)) {}
    std::vector<int> cycle;  // node indices along the offending cycle
};

Partition checkerboard_partition(const GridMrf& mrf);
Partition comb_tree_partition(const GridMrf& mrf);
Partition validate_partition(const GridMrf& mrf, std::span<const int> side1);

// Same split with the stage roles exchanged (side1 <-> side2).
Partition flipped(const Partition& p);

const char* to_string(SideStructure s);
const char* to_string(PartitionLabel l);

}  // namespace gridmrf
