#include "gridmrf/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "gridmrf/common.hpp"
#include "gridmrf/estimators.hpp"

namespace gridmrf {

ChainState init_chain_state(const GridMrf& mrf, std::uint64_t seed) {
    ChainState st;
    st.assignment.assign(mrf.observations().begin(), mrf.observations().end());
    st.iteration = 0;
    st.rng.seed(seed);
    return st;
}

GibbsWorker::GibbsWorker(const GridMrf& mrf) : mrf_(&mrf), n_states_(mrf.n_states()) {
    const int n = mrf.n_nodes();
    const int k = n_states_;
    const std::size_t kk = static_cast<std::size_t>(k) * k;

    unary_exp_.assign(static_cast<std::size_t>(n) * k, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto unary = mrf.unary(i);
        double umax = kLogFloor;
        for (int s = 0; s < k; ++s) umax = std::max(umax, unary[s]);
        double* row = unary_exp_.data() + static_cast<std::size_t>(i) * k;
        if (umax > kLogFloor)
            for (int s = 0; s < k; ++s) row[s] = std::exp(unary[s] - umax);
    }

    nb_begin_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i)
        nb_begin_[static_cast<std::size_t>(i) + 1] = nb_begin_[i] + mrf.incident(i).size();
    neighbors_.resize(nb_begin_.back());
    edge_exp_.assign(nb_begin_.back() * kk, 0.0);

    for (int i = 0; i < n; ++i) {
        std::size_t slot = nb_begin_[i];
        for (const auto& inc : mrf.incident(i)) {
            const auto t = mrf.edge_table(inc.edge);
            double tmax = kLogFloor;
            for (double v : t) tmax = std::max(tmax, v);
            double* rows = edge_exp_.data() + slot * kk;
            if (tmax > kLogFloor) {
                // One contiguous row per neighbour label: the resample of
                // site i reads rows[x_neighbour][.].
                for (int b = 0; b < k; ++b)
                    for (int s = 0; s < k; ++s) {
                        const double e = (i < inc.other)
                                             ? t[static_cast<std::size_t>(s) * k + b]
                                             : t[static_cast<std::size_t>(b) * k + s];
                        rows[static_cast<std::size_t>(b) * k + s] = std::exp(e - tmax);
                    }
            }
            neighbors_[slot] = {inc.other, slot * kk};
            ++slot;
        }
    }
    w_.assign(static_cast<std::size_t>(k), 0.0);
}

namespace {
// Below this, a shifted product may have lost precision to gradual
// underflow; the site is recomputed in the log domain instead.
constexpr double kWeightWindowFloor = 1e-280;
}  // namespace

bool GibbsWorker::gather_weights(std::span<const int> x, int i) {
    const int k = n_states_;
    const double* u = unary_exp_.data() + static_cast<std::size_t>(i) * k;
    std::copy(u, u + k, w_.data());
    const std::size_t end = nb_begin_[static_cast<std::size_t>(i) + 1];
    for (std::size_t slot = nb_begin_[i]; slot < end; ++slot) {
        const BakedNeighbor& nb = neighbors_[slot];
        const int b = x[nb.other];
        if (b < 0 || b >= k) throw std::invalid_argument("gibbs_sweep: label out of range");
        const double* row = edge_exp_.data() + nb.exp_offset + static_cast<std::size_t>(b) * k;
        for (int s = 0; s < k; ++s) w_[s] *= row[s];
    }
    double wmax = 0.0;
    for (int s = 0; s < k; ++s) wmax = std::max(wmax, w_[s]);
    return wmax >= kWeightWindowFloor;
}

void GibbsWorker::site_log_weights(std::span<const int> x, int i) {
    const int k = n_states_;
    const auto unary = mrf_->unary(i);
    logw_.assign(unary.begin(), unary.end());
    for (const auto& inc : mrf_->incident(i)) {
        const auto t = mrf_->edge_table(inc.edge);
        const int b = x[inc.other];
        if (i < inc.other) {
            for (int s = 0; s < k; ++s) logw_[s] += t[static_cast<std::size_t>(s) * k + b];
        } else {
            const double* row = t.data() + static_cast<std::size_t>(b) * k;
            for (int s = 0; s < k; ++s) logw_[s] += row[s];
        }
    }
}

void GibbsWorker::sweep(ChainState& state) {
    const int n = mrf_->n_nodes();
    if (state.assignment.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("gibbs_sweep: state size mismatch");
    for (int i = 0; i < n; ++i) {
        if (gather_weights(state.assignment, i)) {
            state.assignment[i] = sample_from_probs(w_, state.rng);
        } else {
            site_log_weights(state.assignment, i);
            state.assignment[i] = sample_from_log_weights(logw_, state.rng);
        }
    }
    ++state.iteration;
}

void GibbsWorker::sweep_record(ChainState& state, std::vector<double>& site_marginals) {
    const int n = mrf_->n_nodes();
    const int k = n_states_;
    if (state.assignment.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("gibbs_sweep: state size mismatch");
    site_marginals.assign(static_cast<std::size_t>(n) * k, 0.0);
    for (int i = 0; i < n; ++i) {
        double* out = site_marginals.data() + static_cast<std::size_t>(i) * k;
        if (gather_weights(state.assignment, i)) {
            double sum = 0.0;
            for (int s = 0; s < k; ++s) sum += w_[s];
            const double inv = 1.0 / sum;
            for (int s = 0; s < k; ++s) out[s] = w_[s] * inv;
            state.assignment[i] = sample_from_probs(w_, state.rng);
        } else {
            site_log_weights(state.assignment, i);
            softmax_from_log(logw_, {out, static_cast<std::size_t>(k)});
            state.assignment[i] = sample_from_log_weights(logw_, state.rng);
        }
    }
    ++state.iteration;
}

void gibbs_sweep(const GridMrf& mrf, ChainState& state) { GibbsWorker(mrf).sweep(state); }

void gibbs_sweep_record(const GridMrf& mrf, ChainState& state, std::vector<double>& site_marginals) {
    GibbsWorker(mrf).sweep_record(state, site_marginals);
}

DaWorker::DaWorker(const GridMrf& mrf, const Partition& partition)
    : mrf_(&mrf), partition_(&partition),
      tree1_(mrf, partition, 1), tree2_(mrf, partition, 2) {
    if (static_cast<int>(partition.side1.size() + partition.side2.size()) != mrf.n_nodes())
        throw std::invalid_argument("DaWorker: partition node count mismatch");
}

void DaWorker::step(ChainState& state, std::vector<double>& side1_marginals,
                    std::vector<double>& side2_marginals) {
    if (state.assignment.size() != static_cast<std::size_t>(mrf_->n_nodes()))
        throw std::invalid_argument("da_step: state size mismatch");

    tree1_.recondition_full(state.assignment);
    upward_messages_into(tree1_, msgs1_);
    node_conditional_marginals_into(tree1_, msgs1_, side1_marginals, scratch_);
    draw_.resize(tree1_.size());
    ffbs_sample_into(tree1_, msgs1_, state.rng, draw_, scratch_);
    for (int u = 0; u < tree1_.size(); ++u) state.assignment[tree1_.nodes()[u]] = draw_[u];

    tree2_.recondition_full(state.assignment);
    upward_messages_into(tree2_, msgs2_);
    node_conditional_marginals_into(tree2_, msgs2_, side2_marginals, scratch_);
    draw_.resize(tree2_.size());
    ffbs_sample_into(tree2_, msgs2_, state.rng, draw_, scratch_);
    for (int u = 0; u < tree2_.size(); ++u) state.assignment[tree2_.nodes()[u]] = draw_[u];

    ++state.iteration;
}

DaStepRecord da_step(const GridMrf& mrf, const Partition& partition, ChainState& state) {
    DaWorker worker(mrf, partition);
    DaStepRecord rec;
    rec.partition = &partition;
    worker.step(state, rec.side1_marginals, rec.side2_marginals);
    rec.new_state = state;
    return rec;
}

DaStepRecord mixture_step(const GridMrf& mrf, std::span<const Partition> partitions,
                          std::span<const double> weights, ChainState& state) {
    if (partitions.empty()) throw std::invalid_argument("mixture_step: empty partition list");
    if (weights.size() != partitions.size())
        throw std::invalid_argument("mixture_step: weights length mismatch");
    double total = 0.0;
    int nonzero = 0, only = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) throw std::invalid_argument("mixture_step: negative weight");
        if (weights[i] > 0.0) {
            ++nonzero;
            only = static_cast<int>(i);
        }
        total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture_step: weights must sum to 1");
    // A degenerate mixture consumes no randomness, so it coincides with
    // da_step on the selected partition stream-for-stream.
    const int idx = (nonzero == 1) ? only : sample_from_probs(weights, state.rng);
    DaStepRecord rec = da_step(mrf, partitions[idx], state);
    rec.fired_partition = idx;
    return rec;
}

Scheme parse_scheme(const std::string& name) {
    if (name == "pg") return Scheme::pg;
    if (name == "cb") return Scheme::cb;
    if (name == "ts") return Scheme::ts;
    if (name == "mixture") return Scheme::mixture;
    throw std::invalid_argument("unknown scheme: " + name);
}

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::pg: return "pg";
        case Scheme::cb: return "cb";
        case Scheme::ts: return "ts";
        case Scheme::mixture: return "mixture";
    }
    return "?";
}

ChainSummary run_chain(const GridMrf& mrf, const ChainConfig& cfg, RbAccumulator& acc,
                       const CheckpointFn& checkpoint) {
    if (cfg.burn_in < 0 || cfg.n_iters < cfg.burn_in)
        throw std::invalid_argument("run_chain: need n_iters >= burn_in >= 0");

    std::vector<Partition> partitions = cfg.partitions;
    std::vector<double> weights = cfg.weights;
    if (cfg.scheme == Scheme::cb && partitions.empty())
        partitions.push_back(checkerboard_partition(mrf));
    if (cfg.scheme == Scheme::ts && partitions.empty())
        partitions.push_back(comb_tree_partition(mrf));
    if (cfg.scheme == Scheme::mixture && partitions.empty()) {
        partitions.push_back(comb_tree_partition(mrf));
        partitions.push_back(flipped(partitions.front()));
    }
    if (cfg.scheme == Scheme::mixture && weights.empty())
        weights.assign(partitions.size(), 1.0 / static_cast<double>(partitions.size()));

    std::vector<DaWorker> workers;
    workers.reserve(partitions.size());
    for (const auto& p : partitions) workers.emplace_back(mrf, p);
    std::optional<GibbsWorker> gibbs;
    if (cfg.scheme == Scheme::pg) gibbs.emplace(mrf);

    ChainState state = init_chain_state(mrf, cfg.seed);
    std::vector<double> m1, m2, site_marginals;

    ChainSummary summary;
    summary.n_iters = cfg.n_iters;
    summary.burn_in = cfg.burn_in;
    summary.seed = cfg.seed;

    using clock = std::chrono::steady_clock;
    for (long t = 1; t <= cfg.n_iters; ++t) {
        int fired = 0;
        const auto t0 = clock::now();
        if (cfg.scheme == Scheme::pg) {
            if (cfg.pg_site_rb)
                gibbs->sweep_record(state, site_marginals);
            else
                gibbs->sweep(state);
        } else {
            if (workers.size() > 1) fired = sample_from_probs(weights, state.rng);
            workers[fired].step(state, m1, m2);
        }
        summary.kernel_seconds += std::chrono::duration<double>(clock::now() - t0).count();

        if (t > cfg.burn_in) {
            if (cfg.scheme == Scheme::pg) {
                if (cfg.pg_site_rb) rb_accumulate_sites(acc, site_marginals);
            } else {
                rb_accumulate(acc, workers[fired].partition(), m1, m2);
            }
            mc_accumulate(acc, state);
            ++summary.samples;
            if (checkpoint && cfg.checkpoint_every > 0 &&
                (t - cfg.burn_in) % cfg.checkpoint_every == 0) {
                checkpoint({t, summary.kernel_seconds}, acc);
            }
        }
    }
    return summary;
}

}  // namespace gridmrf
