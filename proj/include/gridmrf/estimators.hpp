#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridmrf/grid_model.hpp"
#include "gridmrf/samplers.hpp"

namespace gridmrf {

// Running sums for the Rao-Blackwellised estimator (exact conditional
// marginals) and the Monte Carlo histogram estimator, over one chain.
// Merging accumulators is associative and commutative, so trial workers can
// be reduced in any order.
struct RbAccumulator {
    int n_nodes = 0;
    int n_states = 0;
    std::vector<double> rb_sums;          // n_nodes * n_states
    std::vector<std::int64_t> mc_counts;  // n_nodes * n_states
    std::int64_t rb_count = 0;            // updates received by rb_sums
    std::int64_t mc_count = 0;            // updates received by mc_counts
    std::vector<double> state_values;     // per-label values for mean estimation
};

RbAccumulator make_accumulator(const GridMrf& mrf);
RbAccumulator make_accumulator(int n_nodes, int n_states);

void rb_accumulate(RbAccumulator& acc, const DaStepRecord& record);
// Internal form used by run_chain (avoids the record's state copy).
void rb_accumulate(RbAccumulator& acc, const Partition& partition,
                   std::span<const double> side1_marginals,
                   std::span<const double> side2_marginals);
// Per-site conditional updates from a recording Gibbs sweep.
void rb_accumulate_sites(RbAccumulator& acc, std::span<const double> site_marginals);

void mc_accumulate(RbAccumulator& acc, const ChainState& state);

void merge(RbAccumulator& into, const RbAccumulator& other);

// rb_sums / T and mc_counts / T respectively; throw if the corresponding
// count is zero.
std::vector<double> belief_estimate(const RbAccumulator& acc);
std::vector<double> mc_belief_estimate(const RbAccumulator& acc);

// Per-node expected value of state_values under the belief estimate.
std::vector<double> mean_estimate(const RbAccumulator& acc);
std::vector<double> mc_mean_estimate(const RbAccumulator& acc);

// Per-node argmax with lowest-index tie-break.
std::vector<int> map_reconstruction(std::span<const double> beliefs, int n_nodes, int n_states);
double reconstruction_error(std::span<const int> labels, std::span<const int> truth);

}  // namespace gridmrf
