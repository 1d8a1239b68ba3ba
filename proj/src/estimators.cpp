#include "gridmrf/estimators.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gridmrf/samplers.hpp"

namespace gridmrf {

RbAccumulator make_accumulator(int n_nodes, int n_states) {
    if (n_nodes < 1 || n_states < 2) throw std::invalid_argument("make_accumulator: bad shape");
    RbAccumulator acc;
    acc.n_nodes = n_nodes;
    acc.n_states = n_states;
    acc.rb_sums.assign(static_cast<std::size_t>(n_nodes) * n_states, 0.0);
    acc.mc_counts.assign(static_cast<std::size_t>(n_nodes) * n_states, 0);
    acc.rb_count = 0;
    acc.mc_count = 0;
    acc.state_values.resize(n_states);
    std::iota(acc.state_values.begin(), acc.state_values.end(), 0.0);
    return acc;
}

RbAccumulator make_accumulator(const GridMrf& mrf) {
    return make_accumulator(mrf.n_nodes(), mrf.n_states());
}

void rb_accumulate(RbAccumulator& acc, const Partition& partition,
                   std::span<const double> side1_marginals,
                   std::span<const double> side2_marginals) {
    const auto k = static_cast<std::size_t>(acc.n_states);
    if (side1_marginals.size() != partition.side1.size() * k ||
        side2_marginals.size() != partition.side2.size() * k)
        throw std::invalid_argument("rb_accumulate: marginal block size mismatch");
    for (std::size_t u = 0; u < partition.side1.size(); ++u) {
        double* dst = acc.rb_sums.data() + static_cast<std::size_t>(partition.side1[u]) * k;
        const double* src = side1_marginals.data() + u * k;
        for (std::size_t s = 0; s < k; ++s) dst[s] += src[s];
    }
    for (std::size_t u = 0; u < partition.side2.size(); ++u) {
        double* dst = acc.rb_sums.data() + static_cast<std::size_t>(partition.side2[u]) * k;
        const double* src = side2_marginals.data() + u * k;
        for (std::size_t s = 0; s < k; ++s) dst[s] += src[s];
    }
    ++acc.rb_count;
}

void rb_accumulate(RbAccumulator& acc, const DaStepRecord& rec) {
    if (!rec.partition) throw std::invalid_argument("rb_accumulate: record has no partition");
    rb_accumulate(acc, *rec.partition, rec.side1_marginals, rec.side2_marginals);
}

void rb_accumulate_sites(RbAccumulator& acc, std::span<const double> site_marginals) {
    if (site_marginals.size() != acc.rb_sums.size())
        throw std::invalid_argument("rb_accumulate_sites: size mismatch");
    for (std::size_t i = 0; i < site_marginals.size(); ++i) acc.rb_sums[i] += site_marginals[i];
    ++acc.rb_count;
}

void mc_accumulate(RbAccumulator& acc, const ChainState& state) {
    if (state.assignment.size() != static_cast<std::size_t>(acc.n_nodes))
        throw std::invalid_argument("mc_accumulate: state size mismatch");
    for (int i = 0; i < acc.n_nodes; ++i) {
        const int s = state.assignment[i];
        if (s < 0 || s >= acc.n_states) throw std::invalid_argument("mc_accumulate: label out of range");
        ++acc.mc_counts[static_cast<std::size_t>(i) * acc.n_states + s];
    }
    ++acc.mc_count;
}

void merge(RbAccumulator& into, const RbAccumulator& other) {
    if (into.n_nodes != other.n_nodes || into.n_states != other.n_states)
        throw std::invalid_argument("merge: accumulator shape mismatch");
    for (std::size_t i = 0; i < into.rb_sums.size(); ++i) into.rb_sums[i] += other.rb_sums[i];
    for (std::size_t i = 0; i < into.mc_counts.size(); ++i) into.mc_counts[i] += other.mc_counts[i];
    into.rb_count += other.rb_count;
    into.mc_count += other.mc_count;
}

std::vector<double> belief_estimate(const RbAccumulator& acc) {
    if (acc.rb_count == 0) throw std::logic_error("belief_estimate: no samples");
    std::vector<double> out(acc.rb_sums.size());
    const double inv = 1.0 / static_cast<double>(acc.rb_count);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc.rb_sums[i] * inv;
    return out;
}

std::vector<double> mc_belief_estimate(const RbAccumulator& acc) {
    if (acc.mc_count == 0) throw std::logic_error("mc_belief_estimate: no samples");
    std::vector<double> out(acc.mc_counts.size());
    const double inv = 1.0 / static_cast<double>(acc.mc_count);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(acc.mc_counts[i]) * inv;
    return out;
}

namespace {

std::vector<double> means_from_beliefs(std::span<const double> beliefs, int n_nodes, int n_states,
                                       std::span<const double> values) {
    std::vector<double> out(static_cast<std::size_t>(n_nodes));
    for (int i = 0; i < n_nodes; ++i) {
        double m = 0.0;
        const double* row = beliefs.data() + static_cast<std::size_t>(i) * n_states;
        for (int s = 0; s < n_states; ++s) m += values[s] * row[s];
        out[i] = m;
    }
    return out;
}

}  // namespace

std::vector<double> mean_estimate(const RbAccumulator& acc) {
    const auto beliefs = belief_estimate(acc);
    return means_from_beliefs(beliefs, acc.n_nodes, acc.n_states, acc.state_values);
}

std::vector<double> mc_mean_estimate(const RbAccumulator& acc) {
    const auto beliefs = mc_belief_estimate(acc);
    return means_from_beliefs(beliefs, acc.n_nodes, acc.n_states, acc.state_values);
}

std::vector<int> map_reconstruction(std::span<const double> beliefs, int n_nodes, int n_states) {
    if (beliefs.size() != static_cast<std::size_t>(n_nodes) * n_states)
        throw std::invalid_argument("map_reconstruction: belief size mismatch");
    std::vector<int> out(static_cast<std::size_t>(n_nodes));
    for (int i = 0; i < n_nodes; ++i) {
        const double* row = beliefs.data() + static_cast<std::size_t>(i) * n_states;
        int best = 0;
        for (int s = 1; s < n_states; ++s)
            if (row[s] > row[best]) best = s;
        out[i] = best;
    }
    return out;
}

double reconstruction_error(std::span<const int> estimate, std::span<const int> truth) {
    if (estimate.size() != truth.size() || estimate.empty())
        throw std::invalid_argument("reconstruction_error: size mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < estimate.size(); ++i)
        if (estimate[i] != truth[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(estimate.size());
}

}  // namespace gridmrf
