#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridmrf/grid_model.hpp"
#include "gridmrf/tree_inference.hpp"

namespace gridmrf {

struct RbAccumulator;

struct ChainState {
    std::vector<int> assignment;
    long iteration = 0;
    std::mt19937_64 rng;
};

// x^(0) = observation labels; deterministic data-driven start.
ChainState init_chain_state(const GridMrf& mrf, std::uint64_t seed);

// One raster-order sweep; every node resampled from its full conditional.
void gibbs_sweep(const GridMrf& mrf, ChainState& state);
// Same, also writing each site's conditional (as used at resample time)
// into site_marginals (n_nodes * n_states).
void gibbs_sweep_record(const GridMrf& mrf, ChainState& state, std::vector<double>& site_marginals);

// Reusable single-site Gibbs machinery for one model. Unaries and edge
// tables are baked once as exp of max-shifted entries (the shifts cancel
// when each site's conditional is normalised), so the per-site inner loop
// is multiply-and-draw with no transcendentals. Sites whose shifted
// products drift below the double-precision window are rebuilt in the log
// domain, so extreme potentials keep the semantics of the log-space sweep.
// The free gibbs_sweep helpers construct one of these per call.
class GibbsWorker {
public:
    explicit GibbsWorker(const GridMrf& mrf);

    void sweep(ChainState& state);
    void sweep_record(ChainState& state, std::vector<double>& site_marginals);

private:
    bool gather_weights(std::span<const int> x, int i);  // false -> use log fallback
    void site_log_weights(std::span<const int> x, int i);

    const GridMrf* mrf_;
    int n_states_ = 0;
    std::vector<double> unary_exp_;  // n_nodes * k, exp(unary - node max)
    struct BakedNeighbor {
        int other = -1;
        std::size_t exp_offset = 0;  // k*k rows laid out [other_label][local_label]
    };
    std::vector<BakedNeighbor> neighbors_;  // grouped by site
    std::vector<std::size_t> nb_begin_;     // n_nodes + 1 prefix into neighbors_
    std::vector<double> edge_exp_;
    std::vector<double> w_;     // k scratch, linear domain
    std::vector<double> logw_;  // k scratch for the fallback
};

// Output of one data-augmentation step. Marginals are the exact conditional
// distributions computed before each stage's draw; they feed the
// Rao-Blackwellised estimator.
struct DaStepRecord {
    ChainState new_state;
    std::vector<double> side1_marginals;  // |side1| * n_states, aligned with partition.side1
    std::vector<double> side2_marginals;
    const Partition* partition = nullptr;
    int fired_partition = 0;  // mixture bookkeeping
};

// Reusable machinery for one (mrf, partition): skeletons and buffers are
// built once and reconditioned every step.
class DaWorker {
public:
    DaWorker(const GridMrf& mrf, const Partition& partition);

    // Stage 1 samples side1 | side2, stage 2 samples side2 | new side1.
    // Marginal outputs are computed before the corresponding draw.
    void step(ChainState& state, std::vector<double>& side1_marginals,
              std::vector<double>& side2_marginals);

    const Partition& partition() const { return *partition_; }

private:
    const GridMrf* mrf_;
    const Partition* partition_;
    ConditionedTree tree1_, tree2_;
    MessageSet msgs1_, msgs2_;
    std::vector<double> scratch_;
    std::vector<int> draw_;
};

DaStepRecord da_step(const GridMrf& mrf, const Partition& partition, ChainState& state);

DaStepRecord mixture_step(const GridMrf& mrf, std::span<const Partition> partitions,
                          std::span<const double> weights, ChainState& state);

enum class Scheme { pg, cb, ts, mixture };
Scheme parse_scheme(const std::string& name);  // throws on unknown name
const char* to_string(Scheme s);

struct ChainConfig {
    Scheme scheme = Scheme::ts;
    long n_iters = 0;
    long burn_in = 0;
    std::uint64_t seed = 0;
    // mixture only; defaults to the two comb orientations with equal weights
    std::vector<Partition> partitions;
    std::vector<double> weights;
    bool pg_site_rb = false;  // per-site RB updates for plain Gibbs (off = naive baseline)
    long checkpoint_every = 0;
};

struct ChainCheckpoint {
    long iteration = 0;
    double cum_kernel_seconds = 0.0;
};
using CheckpointFn = std::function<void(const ChainCheckpoint&, const RbAccumulator&)>;

struct ChainSummary {
    long n_iters = 0;
    long burn_in = 0;
    long samples = 0;  // post-burn-in updates fed to the sinks
    double kernel_seconds = 0.0;
    std::uint64_t seed = 0;
};

// Advances the chosen kernel n_iters times, feeding post-burn-in states and
// records to the accumulator. Fully deterministic given the seed; only
// kernel_seconds varies run to run.
ChainSummary run_chain(const GridMrf& mrf, const ChainConfig& cfg, RbAccumulator& acc,
                       const CheckpointFn& checkpoint = {});

}  // namespace gridmrf
