#pragma once

// Brute-force reference computations shared by the test files. Everything
// here is written as directly as possible (independent of the library's
// message-passing / kernel code paths) so that agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridmrf/common.hpp"
#include "gridmrf/grid_model.hpp"
#include "gridmrf/oracle.hpp"

namespace gridmrf::test {

inline double tv_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("tv_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

// Regularized upper incomplete gamma Q(a, x), via the series for x < a+1 and
// the Lentz continued fraction otherwise (Numerical Recipes style).
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

// Survival function of the chi-square distribution with df degrees of freedom.
inline double chi_square_sf(double x, int df) {
    return gamma_q(0.5 * df, 0.5 * x);
}

// Pearson statistic with cells of expected count < min_expected pooled
// together (pooled into the largest cell if the pool itself stays small);
// returns the p-value with df = cells - 1.
inline double chi_square_merged_pvalue(std::span<const double> observed,
                                       std::span<const double> expected,
                                       double min_expected = 5.0) {
    if (observed.size() != expected.size() || observed.empty())
        throw std::invalid_argument("chi_square_merged_pvalue: bad inputs");
    std::vector<std::pair<double, double>> cells;  // (observed, expected)
    double pool_o = 0.0, pool_e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] < min_expected) {
            pool_o += observed[i];
            pool_e += expected[i];
        } else {
            cells.emplace_back(observed[i], expected[i]);
        }
    }
    if (pool_e > 0.0) {
        if (pool_e >= min_expected || cells.empty()) {
            cells.emplace_back(pool_o, pool_e);
        } else {
            auto big = std::max_element(cells.begin(), cells.end(),
                                        [](const auto& l, const auto& r) { return l.second < r.second; });
            big->first += pool_o;
            big->second += pool_e;
        }
    }
    if (cells.size() < 2) return 1.0;
    double stat = 0.0;
    for (const auto& [o, e] : cells) stat += (o - e) * (o - e) / e;
    return chi_square_sf(stat, static_cast<int>(cells.size()) - 1);
}

// Exact conditional distribution of one partition side given fixed labels on
// the complement, by direct enumeration of the side's assignments. Only the
// terms that depend on side labels are included (side unaries, intra-side
// edges, cross edges), matching what the conditioned-tree machinery absorbs.
struct SideConditional {
    std::vector<int> nodes;        // the side's node ids, ascending
    std::vector<double> probs;     // k^m entries, first node most significant
    std::vector<double> marginals; // m * k row-major
    double log_partition = 0.0;
};

inline SideConditional enumerate_side_conditional(const GridMrf& mrf, const Partition& partition,
                                                  int side, std::span<const int> complement_labels) {
    const std::vector<int>& nodes = partition.side(side);
    const std::vector<int>& comp = partition.side(3 - side);
    if (complement_labels.size() != comp.size())
        throw std::invalid_argument("enumerate_side_conditional: complement label count mismatch");
    const int k = mrf.n_states();
    const int m = static_cast<int>(nodes.size());

    std::vector<int> label(static_cast<std::size_t>(mrf.n_nodes()), -1);
    for (std::size_t i = 0; i < comp.size(); ++i) label[comp[i]] = complement_labels[i];
    std::vector<char> on_side(static_cast<std::size_t>(mrf.n_nodes()), 0);
    for (int v : nodes) on_side[v] = 1;

    std::size_t count = 1;
    for (int i = 0; i < m; ++i) count *= static_cast<std::size_t>(k);

    SideConditional out;
    out.nodes = nodes;
    std::vector<double> logw(count);
    std::vector<int> x(static_cast<std::size_t>(m), 0);
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::size_t rem = idx;
        for (int i = m - 1; i >= 0; --i) {
            x[i] = static_cast<int>(rem % k);
            rem /= k;
        }
        for (int i = 0; i < m; ++i) label[nodes[i]] = x[i];
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += mrf.unary(nodes[i])[x[i]];
        for (int e = 0; e < static_cast<int>(mrf.edges().size()); ++e) {
            const auto& ed = mrf.edges()[e];
            if (!on_side[ed.a] && !on_side[ed.b]) continue;
            s += mrf.edge_table(e)[static_cast<std::size_t>(label[ed.a]) * k + label[ed.b]];
        }
        logw[idx] = s;
    }
    out.log_partition = log_sum_exp(logw);
    out.probs.resize(count);
    for (std::size_t idx = 0; idx < count; ++idx)
        out.probs[idx] = std::exp(logw[idx] - out.log_partition);
    out.marginals.assign(static_cast<std::size_t>(m) * k, 0.0);
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::size_t rem = idx;
        for (int i = m - 1; i >= 0; --i) {
            out.marginals[static_cast<std::size_t>(i) * k + static_cast<int>(rem % k)] += out.probs[idx];
            rem /= k;
        }
    }
    return out;
}

// P(constraints) under the enumerated joint, by direct summation.
inline double joint_prob_with(const GridMrf& mrf, const EnumeratedJoint& joint,
                              std::span<const std::pair<int, int>> constraints) {
    std::vector<int> x(static_cast<std::size_t>(joint.n_nodes), 0);
    double total = 0.0;
    for (std::size_t s = 0; s < joint.pi.size(); ++s) {
        decode_joint(mrf, s, x);
        bool ok = true;
        for (const auto& [node, lab] : constraints)
            if (x[node] != lab) {
                ok = false;
                break;
            }
        if (ok) total += joint.pi[s];
    }
    return total;
}

// P(target_node = target_label | constraints) under the enumerated joint.
inline double conditional_prob(const GridMrf& mrf, const EnumeratedJoint& joint, int target_node,
                               int target_label, std::vector<std::pair<int, int>> constraints) {
    const double denom = joint_prob_with(mrf, joint, constraints);
    if (!(denom > 0.0)) throw std::runtime_error("conditional_prob: conditioning event has mass 0");
    constraints.emplace_back(target_node, target_label);
    return joint_prob_with(mrf, joint, constraints) / denom;
}

inline std::vector<int> random_labels(int n, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = static_cast<int>(uniform01(rng) * k);
    return out;
}

inline GridMrf potts_model(int rows, int cols, int k, double beta, double alpha,
                           std::uint64_t obs_seed) {
    PotentialSpec spec;
    spec.kind = PotentialSpec::Kind::potts;
    spec.potts_coupling = beta;
    spec.potts_obs_strength = alpha;
    return build_grid_mrf(rows, cols, k, spec, random_labels(rows * cols, k, obs_seed));
}

inline GridMrf random_table_model(int rows, int cols, int k, std::uint64_t table_seed,
                                  std::uint64_t obs_seed) {
    PotentialSpec spec;
    spec.kind = PotentialSpec::Kind::random_table;
    spec.table_seed = table_seed;
    return build_grid_mrf(rows, cols, k, spec, random_labels(rows * cols, k, obs_seed));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace gridmrf::test
