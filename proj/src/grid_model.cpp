#include "gridmrf/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gridmrf/common.hpp"

namespace gridmrf {

GridMrf::GridMrf(int rows, int cols, int n_states,
                 std::vector<int> observations,
                 std::vector<double> unary_log,
                 std::vector<double> pair_tables,
                 bool per_edge_tables)
    : rows_(rows), cols_(cols), n_states_(n_states),
      observations_(std::move(observations)),
      unary_log_(std::move(unary_log)),
      pair_tables_(std::move(pair_tables)),
      per_edge_tables_(per_edge_tables) {
    if (rows_ < 1 || cols_ < 1) throw std::invalid_argument("GridMrf: rows and cols must be >= 1");
    if (n_states_ < 2) throw std::invalid_argument("GridMrf: n_states must be >= 2");
    const int n = n_nodes();
    const std::size_t k2 = static_cast<std::size_t>(n_states_) * n_states_;
    if (observations_.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("GridMrf: observation grid shape mismatch");
    for (int y : observations_)
        if (y < 0 || y >= n_states_)
            throw std::invalid_argument("GridMrf: observation label out of range");
    if (unary_log_.size() != static_cast<std::size_t>(n) * n_states_)
        throw std::invalid_argument("GridMrf: unary table shape mismatch");

    // 4-neighbor lattice; right edge then down edge per node, raster order.
    edges_.reserve(static_cast<std::size_t>(rows_) * (cols_ - 1) + static_cast<std::size_t>(cols_) * (rows_ - 1));
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            const int id = node_id(r, c);
            if (c + 1 < cols_) edges_.push_back({id, id + 1});
            if (r + 1 < rows_) edges_.push_back({id, id + cols_});
        }
    }
    const std::size_t want = per_edge_tables_ ? k2 * edges_.size() : k2;
    if (pair_tables_.size() != want)
        throw std::invalid_argument("GridMrf: pairwise table shape mismatch");
    for (double v : unary_log_)
        if (!std::isfinite(v)) throw std::invalid_argument("GridMrf: non-finite unary log-potential");
    for (double v : pair_tables_)
        if (!std::isfinite(v)) throw std::invalid_argument("GridMrf: non-finite pairwise log-potential");

    std::vector<int> deg(n, 0);
    for (const auto& e : edges_) {
        ++deg[e.a];
        ++deg[e.b];
    }
    inc_offset_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) inc_offset_[i + 1] = inc_offset_[i] + deg[i];
    incidence_.resize(edges_.size() * 2);
    std::vector<int> fill(inc_offset_.begin(), inc_offset_.end() - 1);
    for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
        incidence_[fill[edges_[e].a]++] = {e, edges_[e].b};
        incidence_[fill[edges_[e].b]++] = {e, edges_[e].a};
    }
}

GridMrf build_grid_mrf(int rows, int cols, int n_states, const PotentialSpec& spec,
                       std::span<const int> observations) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("build_grid_mrf: rows and cols must be >= 1");
    if (n_states < 2) throw std::invalid_argument("build_grid_mrf: n_states must be >= 2");
    const int n = rows * cols;
    if (observations.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("build_grid_mrf: observation grid shape mismatch");
    const std::size_t k = static_cast<std::size_t>(n_states);

    std::vector<double> unary(static_cast<std::size_t>(n) * k, 0.0);
    std::vector<double> pair(k * k, 0.0);

    if (spec.kind == PotentialSpec::Kind::potts) {
        for (int i = 0; i < n; ++i) {
            const int y = observations[i];
            if (y < 0 || y >= n_states)
                throw std::invalid_argument("build_grid_mrf: observation label out of range");
            unary[static_cast<std::size_t>(i) * k + y] += spec.potts_obs_strength;
        }
        for (std::size_t a = 0; a < k; ++a) pair[a * k + a] = spec.potts_coupling;
    } else {
        // Random log tables: one observation table log phi(x, y) and one
        // shared pairwise table, entries uniform in [-1, 1].
        std::mt19937_64 rng(spec.table_seed);
        std::vector<double> obs_table(k * k);
        for (auto& v : obs_table) v = 2.0 * uniform01(rng) - 1.0;
        for (auto& v : pair) v = 2.0 * uniform01(rng) - 1.0;
        for (int i = 0; i < n; ++i) {
            const int y = observations[i];
            if (y < 0 || y >= n_states)
                throw std::invalid_argument("build_grid_mrf: observation label out of range");
            for (std::size_t s = 0; s < k; ++s)
                unary[static_cast<std::size_t>(i) * k + s] = obs_table[s * k + y];
        }
    }
    return GridMrf(rows, cols, n_states,
                   std::vector<int>(observations.begin(), observations.end()),
                   std::move(unary), std::move(pair), /*per_edge_tables=*/false);
}

GridMrf build_grid_mrf_explicit(int rows, int cols, int n_states,
                                std::span<const int> observations,
                                std::vector<double> unary_log,
                                std::vector<double> per_edge_pair_tables) {
    return GridMrf(rows, cols, n_states,
                   std::vector<int>(observations.begin(), observations.end()),
                   std::move(unary_log), std::move(per_edge_pair_tables),
                   /*per_edge_tables=*/true);
}

double unnormalized_log_joint(const GridMrf& mrf, std::span<const int> x) {
    const int n = mrf.n_nodes();
    if (x.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("unnormalized_log_joint: assignment size mismatch");
    const int k = mrf.n_states();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        if (x[i] < 0 || x[i] >= k)
            throw std::invalid_argument("unnormalized_log_joint: label out of range");
        s += mrf.unary(i)[x[i]];
    }
    for (int e = 0; e < static_cast<int>(mrf.edges().size()); ++e) {
        const auto& ed = mrf.edges()[e];
        s += mrf.edge_table(e)[static_cast<std::size_t>(x[ed.a]) * k + x[ed.b]];
    }
    return s;
}

namespace {

// DFS over the induced subgraph: classifies the side and finds a cycle if
// one exists (returned as the node sequence along the cycle).
struct SideScan {
    SideStructure structure = SideStructure::disconnected;
    std::vector<int> cycle;
};

SideScan scan_side(const GridMrf& mrf, const std::vector<int>& side) {
    SideScan out;
    const int n = mrf.n_nodes();
    std::vector<char> in_side(n, 0);
    for (int v : side) in_side[v] = 1;

    std::vector<int> parent(n, -2);  // -2 unvisited, -1 root
    int n_edges = 0, n_components = 0;

    for (int start : side) {
        if (parent[start] != -2) continue;
        ++n_components;
        parent[start] = -1;
        std::vector<int> stack{start};
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& inc : mrf.incident(u)) {
                const int v = inc.other;
                if (!in_side[v]) continue;
                if (parent[v] == -2) {
                    parent[v] = u;
                    ++n_edges;
                    stack.push_back(v);
                } else if (parent[u] != v) {
                    // Back edge: walk both endpoints up to their common
                    // ancestor to produce the witness.
                    std::vector<int> pu, pv;
                    for (int w = u; w != -1; w = parent[w]) pu.push_back(w);
                    for (int w = v; w != -1; w = parent[w]) pv.push_back(w);
                    std::vector<char> on_pu(n, 0);
                    for (int w : pu) on_pu[w] = 1;
                    int meet = -1;
                    for (int w : pv)
                        if (on_pu[w]) {
                            meet = w;
                            break;
                        }
                    std::vector<int> cyc;
                    for (int w = u; w != meet; w = parent[w]) cyc.push_back(w);
                    cyc.push_back(meet);
                    std::vector<int> tail;
                    for (int w = v; w != meet; w = parent[w]) tail.push_back(w);
                    std::reverse(tail.begin(), tail.end());
                    cyc.insert(cyc.end(), tail.begin(), tail.end());
                    out.cycle = std::move(cyc);
                    return out;
                }
            }
        }
    }
    // DFS double-visits each intra-side edge; n_edges counted tree edges only,
    // so acyclicity already established here.
    if (n_edges == 0)
        out.structure = SideStructure::disconnected;
    else if (n_components == 1)
        out.structure = SideStructure::connected_tree;
    else
        out.structure = SideStructure::forest;
    return out;
}

Partition finish_partition(const GridMrf& mrf, std::vector<int> side1, std::vector<int> side2,
                           PartitionLabel label, bool check_cycles) {
    Partition p;
    p.side1 = std::move(side1);
    p.side2 = std::move(side2);
    p.label = label;
    std::sort(p.side1.begin(), p.side1.end());
    std::sort(p.side2.begin(), p.side2.end());
    for (int s = 1; s <= 2; ++s) {
        const auto scan = scan_side(mrf, p.side(s));
        if (check_cycles && !scan.cycle.empty())
            throw PartitionCycleError("partition side " + std::to_string(s) +
                                          " induces a cycle; not tree-solvable",
                                      scan.cycle);
        (s == 1 ? p.side1_structure : p.side2_structure) = scan.structure;
    }
    return p;
}

}  // namespace

Partition checkerboard_partition(const GridMrf& mrf) {
    std::vector<int> s1, s2;
    for (int r = 0; r < mrf.rows(); ++r)
        for (int c = 0; c < mrf.cols(); ++c)
            ((r + c) % 2 == 0 ? s1 : s2).push_back(mrf.node_id(r, c));
    return finish_partition(mrf, std::move(s1), std::move(s2), PartitionLabel::checkerboard, false);
}

Partition comb_tree_partition(const GridMrf& mrf) {
    if (mrf.rows() < 2) {
        Partition p = checkerboard_partition(mrf);
        p.label = PartitionLabel::comb_tree;
        p.fell_back = true;
        return p;
    }
    // Two interlocking combs: side1 owns the whole top row plus the
    // even-column teeth of the interior rows; side2 owns the bottom row plus
    // the odd-column teeth.
    std::vector<int> s1, s2;
    for (int c = 0; c < mrf.cols(); ++c) s1.push_back(mrf.node_id(0, c));
    for (int c = 0; c < mrf.cols(); ++c) s2.push_back(mrf.node_id(mrf.rows() - 1, c));
    for (int r = 1; r + 1 < mrf.rows(); ++r)
        for (int c = 0; c < mrf.cols(); ++c)
            (c % 2 == 0 ? s1 : s2).push_back(mrf.node_id(r, c));
    return finish_partition(mrf, std::move(s1), std::move(s2), PartitionLabel::comb_tree, false);
}

Partition validate_partition(const GridMrf& mrf, std::span<const int> side1) {
    const int n = mrf.n_nodes();
    std::vector<char> in1(n, 0);
    for (int v : side1) {
        if (v < 0 || v >= n) throw std::invalid_argument("validate_partition: node index out of range");
        if (in1[v]) throw std::invalid_argument("validate_partition: duplicate node in side1");
        in1[v] = 1;
    }
    std::vector<int> s1(side1.begin(), side1.end()), s2;
    for (int v = 0; v < n; ++v)
        if (!in1[v]) s2.push_back(v);
    return finish_partition(mrf, std::move(s1), std::move(s2), PartitionLabel::custom, true);
}

Partition flipped(const Partition& p) {
    Partition q = p;
    std::swap(q.side1, q.side2);
    std::swap(q.side1_structure, q.side2_structure);
    return q;
}

const char* to_string(SideStructure s) {
    switch (s) {
        case SideStructure::disconnected: return "disconnected";
        case SideStructure::forest: return "forest";
        case SideStructure::connected_tree: return "connected_tree";
    }
    return "?";
}

const char* to_string(PartitionLabel l) {
    switch (l) {
        case PartitionLabel::checkerboard: return "checkerboard";
        case PartitionLabel::comb_tree: return "comb_tree";
        case PartitionLabel::custom: return "custom";
    }
    return "?";
}

}  // namespace gridmrf
