#include "gridmrf/tree_inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridmrf/common.hpp"

namespace gridmrf {

ConditionedTree::ConditionedTree(const GridMrf& mrf, const Partition& partition, int side)
    : mrf_(&mrf), n_states_(mrf.n_states()) {
    if (side != 1 && side != 2) throw std::invalid_argument("ConditionedTree: side must be 1 or 2");
    nodes_ = partition.side(side);
    complement_nodes_ = partition.side(3 - side);
    if (static_cast<int>(nodes_.size() + complement_nodes_.size()) != mrf.n_nodes())
        throw std::invalid_argument("ConditionedTree: partition does not match this mrf");

    const int n = mrf.n_nodes();
    const int m = static_cast<int>(nodes_.size());
    std::vector<int> local_of(n, -1);
    for (int i = 0; i < m; ++i) local_of[nodes_[i]] = i;
    complement_slot_.assign(n, -1);
    for (int i = 0; i < static_cast<int>(complement_nodes_.size()); ++i)
        complement_slot_[complement_nodes_[i]] = i;

    parent_.assign(m, -1);
    children_.assign(m, {});
    component_of_.assign(m, -1);
    parent_table_.assign(m, nullptr);
    parent_transposed_.assign(m, 0);
    effective_unary_exp_.assign(static_cast<std::size_t>(m) * n_states_, 0.0);
    node_log_shift_.assign(m, 0.0);

    // Evidence factors live in the linear domain: every table is baked as
    // exp(entries - table max) once here, with the factored-out max folded
    // into the owning node's shift. Inference then runs exp-free and cannot
    // overflow, and the shifts restore the exact log-partition.
    unary_exp_.assign(static_cast<std::size_t>(m) * n_states_, 0.0);
    for (int u = 0; u < m; ++u) {
        const auto base = mrf.unary(nodes_[u]);
        double umax = kLogFloor;
        for (double v : base)
            if (v > umax) umax = v;
        if (umax <= kLogFloor) continue;  // every label impossible; row stays zero
        double* ue = unary_exp_.data() + static_cast<std::size_t>(u) * n_states_;
        for (int s = 0; s < n_states_; ++s) ue[s] = std::exp(base[s] - umax);
        node_log_shift_[u] += umax;
    }

    // Cross edges, in local-node order for cache-friendly reconditioning.
    const std::size_t kk = static_cast<std::size_t>(n_states_) * n_states_;
    for (int u = 0; u < m; ++u) {
        const int gu = nodes_[u];
        for (const auto& inc : mrf.incident(gu)) {
            if (local_of[inc.other] >= 0) continue;
            const double* t = mrf.edge_table(inc.edge).data();
            const bool transposed = inc.other < gu;  // table stored [other][local]
            double tmax = kLogFloor;
            for (std::size_t i = 0; i < kk; ++i)
                if (t[i] > tmax) tmax = t[i];
            const std::size_t off = cross_exp_.size();
            cross_exp_.resize(off + kk, 0.0);
            if (tmax > kLogFloor) {
                // Baked [other_label][local_label]: reconditioning on a fixed
                // complement label then reads one contiguous row.
                for (int b = 0; b < n_states_; ++b)
                    for (int s = 0; s < n_states_; ++s)
                        cross_exp_[off + static_cast<std::size_t>(b) * n_states_ + s] =
                            std::exp((transposed ? t[static_cast<std::size_t>(b) * n_states_ + s]
                                                 : t[static_cast<std::size_t>(s) * n_states_ + b]) -
                                     tmax);
                node_log_shift_[u] += tmax;
            }
            cross_edges_.push_back({u, inc.other, off});
        }
    }

    // Rooted forest: BFS from the smallest unvisited node of each component;
    // traversal is the reversed BFS order, so children precede parents.
    std::vector<char> seen(m, 0);
    int comp = 0;
    traversal_.reserve(m);
    for (int r = 0; r < m; ++r) {
        if (seen[r]) continue;
        roots_.push_back(r);
        seen[r] = 1;
        std::vector<int> bfs{r};
        for (std::size_t head = 0; head < bfs.size(); ++head) {
            const int u = bfs[head];
            component_of_[u] = comp;
            const int gu = nodes_[u];
            for (const auto& inc : mrf.incident(gu)) {
                const int v = local_of[inc.other];
                if (v < 0 || seen[v]) continue;
                seen[v] = 1;
                parent_[v] = u;
                children_[u].push_back(v);
                parent_table_[v] = mrf.edge_table(inc.edge).data();
                // Tables are stored [a][b] with a < b; the edge above v is
                // [parent][child] exactly when the parent has the smaller id.
                parent_transposed_[v] = (gu < inc.other) ? 1 : 0;
                bfs.push_back(v);
            }
        }
        traversal_.insert(traversal_.end(), bfs.rbegin(), bfs.rend());
        ++comp;
    }
    // Acyclicity of each side is a Partition invariant; a cycle here would
    // leave an intra-side edge unused by the BFS tree.
    std::size_t intra = 0;
    for (int u = 0; u < m; ++u)
        for (const auto& inc : mrf.incident(nodes_[u]))
            if (local_of[inc.other] >= 0) ++intra;
    if (intra / 2 != static_cast<std::size_t>(m) - roots_.size())
        throw std::invalid_argument("ConditionedTree: side induces a cycle");

    parent_pair_exp_.assign(static_cast<std::size_t>(m) * kk, 0.0);
    parent_is_potts_.assign(m, 0);
    parent_potts_diag_.assign(m, 0.0);
    parent_potts_off_.assign(m, 0.0);
    for (int v = 0; v < m; ++v) {
        if (parent_[v] < 0) continue;
        const double* t = parent_table_[v];
        double tmax = kLogFloor;
        for (std::size_t i = 0; i < kk; ++i)
            if (t[i] > tmax) tmax = t[i];
        if (tmax <= kLogFloor) continue;  // edge forbids everything; row stays zero
        double* pe = parent_pair_exp_.data() + static_cast<std::size_t>(v) * kk;
        for (int kc = 0; kc < n_states_; ++kc)
            for (int kp = 0; kp < n_states_; ++kp)
                pe[static_cast<std::size_t>(kc) * n_states_ + kp] =
                    std::exp(parent_pair_log(v, kc, kp) - tmax);
        node_log_shift_[v] += tmax;
        // Potts-structured tables (constant diagonal, constant off-diagonal)
        // admit O(k) messages: sum(v) * off + (diag - off) * v. Detected on
        // the baked values, so any table gets the fast path exactly when the
        // identity holds.
        const double diag = pe[0];
        const double off = pe[1];
        bool potts = true;
        for (int kc = 0; kc < n_states_ && potts; ++kc)
            for (int kp = 0; kp < n_states_; ++kp)
                if (pe[static_cast<std::size_t>(kc) * n_states_ + kp] !=
                    (kc == kp ? diag : off)) {
                    potts = false;
                    break;
                }
        if (potts) {
            parent_is_potts_[v] = 1;
            parent_potts_diag_[v] = diag;
            parent_potts_off_[v] = off;
        }
    }
}

void ConditionedTree::recondition(std::span<const int> complement_labels) {
    if (complement_labels.size() != complement_nodes_.size())
        throw std::invalid_argument("ConditionedTree: assignment covers the wrong node set");
    const int k = n_states_;
    std::copy(unary_exp_.begin(), unary_exp_.end(), effective_unary_exp_.begin());
    for (const auto& ce : cross_edges_) {
        const int b = complement_labels[complement_slot_[ce.other]];
        if (b < 0 || b >= k)
            throw std::invalid_argument("ConditionedTree: complement label out of range");
        double* eu = effective_unary_exp_.data() + static_cast<std::size_t>(ce.local) * k;
        const double* row = cross_exp_.data() + ce.exp_offset + static_cast<std::size_t>(b) * k;
        for (int s = 0; s < k; ++s) eu[s] *= row[s];
    }
}

void ConditionedTree::recondition_full(std::span<const int> full_assignment) {
    if (full_assignment.size() != static_cast<std::size_t>(mrf_->n_nodes()))
        throw std::invalid_argument("ConditionedTree: full assignment size mismatch");
    const int k = n_states_;
    std::copy(unary_exp_.begin(), unary_exp_.end(), effective_unary_exp_.begin());
    for (const auto& ce : cross_edges_) {
        const int b = full_assignment[ce.other];
        if (b < 0 || b >= k)
            throw std::invalid_argument("ConditionedTree: complement label out of range");
        double* eu = effective_unary_exp_.data() + static_cast<std::size_t>(ce.local) * k;
        const double* row = cross_exp_.data() + ce.exp_offset + static_cast<std::size_t>(b) * k;
        for (int s = 0; s < k; ++s) eu[s] *= row[s];
    }
}

ConditionedTree condition_side(const GridMrf& mrf, const Partition& partition, int side,
                               std::span<const int> complement_labels) {
    ConditionedTree tree(mrf, partition, side);
    tree.recondition(complement_labels);
    return tree;
}

namespace {
// Vectors are rescaled (and the scale logged into the component normalizer)
// only when their max leaves this window. Doubles have ~600 orders of
// magnitude of headroom beyond it, so intermediate products stay finite while
// the common case skips the log() and the pass over the row entirely.
constexpr double kRescaleLo = 1e-19;
constexpr double kRescaleHi = 1e19;

inline double rescale_if_drifting(double* v, int k, double vmax, double& norm) {
    if (vmax > 0.0 && (vmax > kRescaleHi || vmax < kRescaleLo)) {
        const double inv = 1.0 / vmax;
        for (int s = 0; s < k; ++s) v[s] *= inv;
        norm += std::log(vmax);
        return 1.0;
    }
    return vmax;
}
}  // namespace

void upward_messages_into(const ConditionedTree& tree, MessageSet& msgs) {
    const int m = tree.size();
    const int k = tree.n_states();
    const std::size_t need = static_cast<std::size_t>(m) * k;
    msgs.n_states = k;
    // Rows are fully rewritten below; only resize when the shape changes.
    if (msgs.up.size() != need) msgs.up.assign(need, 0.0);
    if (msgs.below.size() != need) msgs.below.assign(need, 0.0);
    msgs.norm_constants.assign(tree.n_components(), 0.0);

    for (int u : tree.traversal()) {
        double* below = msgs.below.data() + static_cast<std::size_t>(u) * k;
        double& norm = msgs.norm_constants[tree.component_of()[u]];
        const auto eff = tree.effective_unary_exp(u);
        std::copy(eff.begin(), eff.end(), below);
        norm += tree.node_log_shift(u);
        for (int c : tree.children()[u]) {
            const double* up_c = msgs.up.data() + static_cast<std::size_t>(c) * k;
            for (int s = 0; s < k; ++s) below[s] *= up_c[s];
        }
        double below_max = 0.0;
        for (int s = 0; s < k; ++s)
            if (below[s] > below_max) below_max = below[s];
        rescale_if_drifting(below, k, below_max, norm);
        if (tree.parent()[u] < 0) continue;
        double* up = msgs.up.data() + static_cast<std::size_t>(u) * k;
        if (tree.parent_is_potts(u)) {
            // up[kp] = off * sum(below) + (diag - off) * below[kp]
            double sum = 0.0;
            for (int s = 0; s < k; ++s) sum += below[s];
            const double base = tree.parent_potts_off(u) * sum;
            const double d = tree.parent_potts_diag(u) - tree.parent_potts_off(u);
            for (int kp = 0; kp < k; ++kp) {
                const double t = base + d * below[kp];
                up[kp] = t > 0.0 ? t : 0.0;  // clamp cancellation residue
            }
        } else {
            const double* pair = tree.parent_pair_exp(u);
            for (int kp = 0; kp < k; ++kp) up[kp] = 0.0;
            for (int kc = 0; kc < k; ++kc) {
                const double b = below[kc];
                if (b == 0.0) continue;
                const double* row = pair + static_cast<std::size_t>(kc) * k;
                for (int kp = 0; kp < k; ++kp) up[kp] += b * row[kp];
            }
        }
        double msg_max = 0.0;
        for (int kp = 0; kp < k; ++kp)
            if (up[kp] > msg_max) msg_max = up[kp];
        rescale_if_drifting(up, k, msg_max, norm);
    }
}

MessageSet upward_messages(const ConditionedTree& tree) {
    MessageSet msgs;
    upward_messages_into(tree, msgs);
    return msgs;
}

void node_conditional_marginals_into(const ConditionedTree& tree, const MessageSet& msgs,
                                     std::vector<double>& out, std::vector<double>& scratch) {
    const int m = tree.size();
    const int k = tree.n_states();
    const std::size_t need = static_cast<std::size_t>(m) * k;
    // Rows are fully rewritten; only resize when the shape changes.
    if (out.size() != need) out.assign(need, 0.0);
    if (scratch.size() != need) scratch.assign(need, 0.0);  // total = below x downward factor

    const auto& order = tree.traversal();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int u = *it;
        double* total = scratch.data() + static_cast<std::size_t>(u) * k;
        double* probs = out.data() + static_cast<std::size_t>(u) * k;
        const double* below = msgs.below.data() + static_cast<std::size_t>(u) * k;
        const int p = tree.parent()[u];
        if (p < 0) {
            std::copy(below, below + k, total);
        } else {
            // total(u)[kc] = below[kc] * sum_kp psi(kc,kp) * total(p)[kp]/up(u)[kp];
            // dividing out up(u) removes u's own message from the parent's
            // total. Both are zero exactly for impossible parent labels, where
            // the ratio contributes nothing.
            const double* total_p = scratch.data() + static_cast<std::size_t>(p) * k;
            const double* up_u = msgs.up.data() + static_cast<std::size_t>(u) * k;
            double* ratio = probs;  // free until the normalization below
            for (int kp = 0; kp < k; ++kp)
                ratio[kp] = up_u[kp] > 0.0 ? total_p[kp] / up_u[kp] : 0.0;
            double total_max = 0.0;
            if (tree.parent_is_potts(u)) {
                double rsum = 0.0;
                for (int kp = 0; kp < k; ++kp) rsum += ratio[kp];
                const double base = tree.parent_potts_off(u) * rsum;
                const double d = tree.parent_potts_diag(u) - tree.parent_potts_off(u);
                for (int kc = 0; kc < k; ++kc) {
                    const double s = base + d * ratio[kc];
                    total[kc] = below[kc] * (s > 0.0 ? s : 0.0);
                    if (total[kc] > total_max) total_max = total[kc];
                }
            } else {
                const double* pair = tree.parent_pair_exp(u);
                for (int kc = 0; kc < k; ++kc) {
                    const double* row = pair + static_cast<std::size_t>(kc) * k;
                    double s = 0.0;
                    for (int kp = 0; kp < k; ++kp) s += row[kp] * ratio[kp];
                    total[kc] = below[kc] * s;
                    if (total[kc] > total_max) total_max = total[kc];
                }
            }
            // Keep totals inside the window down the chain; the factor
            // cancels everywhere `total` is consumed.
            double ignored = 0.0;
            rescale_if_drifting(total, k, total_max, ignored);
        }
        double sum = 0.0;
        for (int kc = 0; kc < k; ++kc) sum += total[kc];
        if (sum > 0.0) {
            const double inv = 1.0 / sum;
            for (int kc = 0; kc < k; ++kc) probs[kc] = total[kc] * inv;
        } else {
            for (int kc = 0; kc < k; ++kc) probs[kc] = 1.0 / k;  // no mass anywhere
        }
    }
}

std::vector<double> node_conditional_marginals(const ConditionedTree& tree, const MessageSet& msgs) {
    std::vector<double> out, scratch;
    node_conditional_marginals_into(tree, msgs, out, scratch);
    return out;
}

void ffbs_sample_into(const ConditionedTree& tree, const MessageSet& msgs, std::mt19937_64& rng,
                      std::span<int> out, std::vector<double>& scratch) {
    const int m = tree.size();
    const int k = tree.n_states();
    if (out.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("ffbs_sample: output size mismatch");
    if (scratch.size() != static_cast<std::size_t>(k)) scratch.assign(k, 0.0);
    const auto& order = tree.traversal();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int u = *it;
        const double* below = msgs.below.data() + static_cast<std::size_t>(u) * k;
        const int p = tree.parent()[u];
        if (p < 0) {
            out[u] = sample_from_probs({below, static_cast<std::size_t>(k)}, rng);
        } else {
            const int bp = out[p];
            if (tree.parent_is_potts(u)) {
                const double off = tree.parent_potts_off(u);
                for (int s = 0; s < k; ++s) scratch[s] = below[s] * off;
                scratch[bp] = below[bp] * tree.parent_potts_diag(u);
            } else {
                const double* pair = tree.parent_pair_exp(u);
                for (int s = 0; s < k; ++s)
                    scratch[s] = below[s] * pair[static_cast<std::size_t>(s) * k + bp];
            }
            out[u] = sample_from_probs(scratch, rng);
        }
    }
}

std::vector<int> ffbs_sample(const ConditionedTree& tree, const MessageSet& msgs,
                             std::mt19937_64& rng) {
    std::vector<int> out(tree.size());
    std::vector<double> scratch;
    ffbs_sample_into(tree, msgs, rng, out, scratch);
    return out;
}

double conditioned_log_partition(const ConditionedTree& tree, const MessageSet& msgs) {
    const int k = tree.n_states();
    double total = 0.0;
    for (std::size_t c = 0; c < tree.roots().size(); ++c) {
        const int r = tree.roots()[c];
        const double* below = msgs.below.data() + static_cast<std::size_t>(r) * k;
        double sum = 0.0;
        for (int s = 0; s < k; ++s) sum += below[s];
        total += msgs.norm_constants[c] + clamp_log(std::log(sum));
    }
    return total;
}

}  // namespace gridmrf
