#include "gridmrf/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "gridmrf/common.hpp"
#include "gridmrf/estimators.hpp"
#include "gridmrf/io_util.hpp"
#include "gridmrf/oracle.hpp"
#include "gridmrf/pgm.hpp"

namespace gridmrf {

using nlohmann::json;

namespace {

constexpr double kThm1Tol = 1e-9;
constexpr double kThm2Tol = 1e-12;
constexpr double kProp1Tol = 1e-12;
constexpr double kRateBoundSlack = 0.02;
constexpr double kRateOrderTol = 1e-12;

void run_tasks(int jobs, std::size_t n, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    pool.reserve(count);
    for (std::size_t i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string bool_cell(bool v) { return v ? "1" : "0"; }

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "variance") return ExperimentKind::variance;
    if (name == "denoise") return ExperimentKind::denoise;
    if (name == "diagnose") return ExperimentKind::diagnose;
    throw std::invalid_argument("unknown experiment: " + name);
}

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::variance: return "variance";
        case ExperimentKind::denoise: return "denoise";
        case ExperimentKind::diagnose: return "diagnose";
    }
    return "?";
}

TimeUnits parse_time_units(const std::string& name) {
    if (name == "seconds") return TimeUnits::seconds;
    if (name == "iterations") return TimeUnits::iterations;
    throw std::invalid_argument("unknown time units: " + name);
}

const char* to_string(TimeUnits units) {
    return units == TimeUnits::seconds ? "seconds" : "iterations";
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.rows < 1 || cfg.cols < 1) throw std::invalid_argument("config: grid dims must be positive");
    if (cfg.n_states < 2) throw std::invalid_argument("config: n_states must be >= 2");
    if (cfg.schemes.empty()) throw std::invalid_argument("config: schemes must be nonempty");
    if (cfg.n_trials < 1) throw std::invalid_argument("config: n_trials must be positive");
    if (cfg.n_iters < 1) throw std::invalid_argument("config: n_iters must be positive");
    if (cfg.burn_in < 0 || cfg.burn_in >= cfg.n_iters)
        throw std::invalid_argument("config: need 0 <= burn_in < n_iters");
    if (cfg.noise_flip_prob < 0.0 || cfg.noise_flip_prob >= 1.0)
        throw std::invalid_argument("config: noise_flip_prob must be in [0,1)");
    if (cfg.checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
    if (cfg.experiment == ExperimentKind::denoise && cfg.checkpoint_every < 1)
        throw std::invalid_argument("config: denoise needs checkpoint_every >= 1");
    if (cfg.n_rects < 0) throw std::invalid_argument("config: n_rects must be >= 0");
    if (cfg.jobs < 1) throw std::invalid_argument("config: jobs must be positive");
    if (cfg.diagnose_seeds < 1) throw std::invalid_argument("config: diagnose_seeds must be positive");
    if ((cfg.diagnose_rows == 0) != (cfg.diagnose_cols == 0))
        throw std::invalid_argument("config: diagnose dims must both be set or both zero");
    if (cfg.rate_steps < 3) throw std::invalid_argument("config: rate_steps must be >= 3");
}

ExperimentConfig default_variance_config() {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::variance;
    cfg.rows = 6;
    cfg.cols = 6;
    cfg.n_states = 8;
    cfg.potential.kind = PotentialSpec::Kind::potts;
    cfg.potential.potts_coupling = 0.8;
    cfg.potential.potts_obs_strength = 0.5;
    cfg.schemes = {Scheme::pg, Scheme::cb, Scheme::ts};
    cfg.n_trials = 100;
    cfg.n_iters = 500;
    cfg.burn_in = 50;
    return cfg;
}

ExperimentConfig default_denoise_config() {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::denoise;
    cfg.rows = 32;
    cfg.cols = 32;
    cfg.n_states = 11;
    cfg.potential.kind = PotentialSpec::Kind::potts;
    cfg.potential.potts_coupling = 1.2;
    cfg.potential.potts_obs_strength = 1.35;
    cfg.schemes = {Scheme::pg, Scheme::cb, Scheme::ts};
    cfg.n_trials = 50;
    cfg.n_iters = 40;
    cfg.burn_in = 0;
    cfg.noise_flip_prob = 0.2;
    cfg.checkpoint_every = 3;
    cfg.n_rects = 6;
    return cfg;
}

ExperimentConfig default_diagnose_config() {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::diagnose;
    cfg.rows = 2;
    cfg.cols = 2;
    cfg.n_states = 2;
    cfg.n_trials = 1;
    cfg.n_iters = 1;
    cfg.burn_in = 0;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config file " + path.string() + ": " + e.what());
    }
    ExperimentConfig cfg;
    try {
        const auto kind = parse_experiment_kind(j.value("experiment", std::string("variance")));
        switch (kind) {
            case ExperimentKind::variance: cfg = default_variance_config(); break;
            case ExperimentKind::denoise: cfg = default_denoise_config(); break;
            case ExperimentKind::diagnose: cfg = default_diagnose_config(); break;
        }
        cfg.rows = j.value("rows", cfg.rows);
        cfg.cols = j.value("cols", cfg.cols);
        cfg.n_states = j.value("n_states", cfg.n_states);
        if (j.contains("potential_spec")) cfg.potential = potential_spec_from_json(j.at("potential_spec"));
        if (j.contains("schemes")) {
            cfg.schemes.clear();
            for (const auto& s : j.at("schemes")) cfg.schemes.push_back(parse_scheme(s.get<std::string>()));
        }
        cfg.n_trials = j.value("n_trials", cfg.n_trials);
        cfg.n_iters = j.value("n_iters", cfg.n_iters);
        cfg.burn_in = j.value("burn_in", cfg.burn_in);
        cfg.noise_flip_prob = j.value("noise_flip_prob", cfg.noise_flip_prob);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
        cfg.n_rects = j.value("n_rects", cfg.n_rects);
        if (j.contains("time_units")) cfg.time_units = parse_time_units(j.at("time_units").get<std::string>());
        cfg.jobs = j.value("jobs", cfg.jobs);
        cfg.diagnose_seeds = j.value("diagnose_seeds", cfg.diagnose_seeds);
        cfg.diagnose_rows = j.value("diagnose_rows", cfg.diagnose_rows);
        cfg.diagnose_cols = j.value("diagnose_cols", cfg.diagnose_cols);
        cfg.rate_steps = j.value("rate_steps", cfg.rate_steps);
        if (j.contains("model")) cfg.model_path = std::filesystem::path(j.at("model").get<std::string>());
    } catch (const json::exception& e) {
        throw std::invalid_argument("config file " + path.string() + ": " + e.what());
    }
    return cfg;
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
    json j;
    j["experiment"] = to_string(cfg.experiment);
    j["rows"] = cfg.rows;
    j["cols"] = cfg.cols;
    j["n_states"] = cfg.n_states;
    j["potential_spec"] = potential_spec_to_json(cfg.potential);
    json schemes = json::array();
    for (Scheme s : cfg.schemes) schemes.push_back(to_string(s));
    j["schemes"] = schemes;
    j["n_trials"] = cfg.n_trials;
    j["n_iters"] = cfg.n_iters;
    j["burn_in"] = cfg.burn_in;
    j["noise_flip_prob"] = cfg.noise_flip_prob;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir.string();
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["n_rects"] = cfg.n_rects;
    j["time_units"] = to_string(cfg.time_units);
    j["jobs"] = cfg.jobs;
    j["diagnose_seeds"] = cfg.diagnose_seeds;
    j["diagnose_rows"] = cfg.diagnose_rows;
    j["diagnose_cols"] = cfg.diagnose_cols;
    j["rate_steps"] = cfg.rate_steps;
    if (cfg.model_path) j["model"] = cfg.model_path->string();
    write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<int> generate_patch_image(int rows, int cols, int n_states, int n_rects,
                                      std::uint64_t seed) {
    if (rows < 1 || cols < 1 || n_states < 2 || n_rects < 0)
        throw std::invalid_argument("generate_patch_image: bad arguments");
    std::mt19937_64 rng(seed);
    std::vector<int> img(static_cast<std::size_t>(rows) * cols, 0);
    for (int rect = 0; rect < n_rects; ++rect) {
        int r0 = static_cast<int>(uniform01(rng) * rows);
        int r1 = static_cast<int>(uniform01(rng) * rows);
        int c0 = static_cast<int>(uniform01(rng) * cols);
        int c1 = static_cast<int>(uniform01(rng) * cols);
        if (r1 < r0) std::swap(r0, r1);
        if (c1 < c0) std::swap(c0, c1);
        const int label = 1 + static_cast<int>(uniform01(rng) * (n_states - 1));
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) img[static_cast<std::size_t>(r) * cols + c] = label;
    }
    return img;
}

std::vector<int> corrupt_flip(std::span<const int> labels, int n_states, double p,
                              std::uint64_t seed) {
    if (n_states < 2) throw std::invalid_argument("corrupt_flip: n_states must be >= 2");
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("corrupt_flip: p must be in [0,1)");
    std::mt19937_64 rng(seed);
    std::vector<int> out(labels.begin(), labels.end());
    for (auto& v : out) {
        if (v < 0 || v >= n_states) throw std::invalid_argument("corrupt_flip: label out of range");
        if (uniform01(rng) < p) {
            const int offset = 1 + static_cast<int>(uniform01(rng) * (n_states - 1));
            v = (v + offset) % n_states;
        }
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("sample_variance: need >= 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

double sample_stddev(std::span<const double> values) { return std::sqrt(sample_variance(values)); }

double error_at_time(std::span<const TracePoint> trace, double t) {
    if (trace.empty()) throw std::invalid_argument("error_at_time: empty trace");
    double err = trace.front().error;
    for (const auto& pt : trace) {
        if (pt.kernel_seconds > t) break;
        err = pt.error;
    }
    return err;
}

namespace {

ModelFile prepare_model(const ExperimentConfig& cfg, std::vector<int> observations) {
    ModelFile m;
    m.rows = cfg.rows;
    m.cols = cfg.cols;
    m.n_states = cfg.n_states;
    m.potential = cfg.potential;
    m.observations = std::move(observations);
    m.seed = cfg.seed;
    return m;
}

std::vector<int> random_observations(const ExperimentConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "model", 0));
    std::vector<int> obs(static_cast<std::size_t>(cfg.rows) * cfg.cols);
    for (auto& y : obs) y = static_cast<int>(uniform01(rng) * cfg.n_states);
    return obs;
}

void write_run_metadata(const ExperimentConfig& cfg) {
    json j;
    j["master_seed"] = cfg.seed;
    j["trial_seed_rule"] = "derive_seed(master_seed, scheme_label, trial_index)";
    write_file_atomic(cfg.output_dir / "run_metadata.json", j.dump(2) + "\n");
}

void write_timing_sidecar(const ExperimentConfig& cfg, const json& schemes_timing) {
    json j;
    j["note"] = "wall-clock kernel timing; excluded from determinism comparisons";
    j["schemes"] = schemes_timing;
    write_file_atomic(cfg.output_dir / "timing.json", j.dump(2) + "\n");
}

}  // namespace

VarianceOutcome run_variance_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ModelFile model = cfg.model_path ? load_model_file(*cfg.model_path)
                                     : prepare_model(cfg, random_observations(cfg));
    const GridMrf mrf = build_from_model_file(model);
    const int n_nodes = mrf.n_nodes();
    const std::size_t n_schemes = cfg.schemes.size();
    const std::size_t n_trials = static_cast<std::size_t>(cfg.n_trials);

    struct Trial {
        std::vector<double> rb_mean;
        std::vector<double> mc_mean;
        double kernel_seconds = 0.0;
    };
    std::vector<Trial> trials(n_schemes * n_trials);

    run_tasks(cfg.jobs, trials.size(), [&](std::size_t task) {
        const std::size_t si = task / n_trials;
        const std::size_t trial = task % n_trials;
        const Scheme scheme = cfg.schemes[si];
        ChainConfig chain;
        chain.scheme = scheme;
        chain.n_iters = cfg.n_iters;
        chain.burn_in = cfg.burn_in;
        chain.seed = derive_seed(cfg.seed, to_string(scheme), trial);
        RbAccumulator acc = make_accumulator(mrf);
        const ChainSummary summary = run_chain(mrf, chain, acc);
        Trial& out = trials[task];
        if (scheme != Scheme::pg) out.rb_mean = mean_estimate(acc);
        out.mc_mean = mc_mean_estimate(acc);
        out.kernel_seconds = summary.kernel_seconds;
    });

    VarianceOutcome outcome;
    outcome.model = model;
    outcome.per_scheme.resize(n_schemes);
    const bool defined = cfg.n_trials >= 2;
    for (std::size_t si = 0; si < n_schemes; ++si) {
        SchemeVariance& sv = outcome.per_scheme[si];
        sv.scheme = cfg.schemes[si];
        double total_seconds = 0.0;
        for (std::size_t t = 0; t < n_trials; ++t) total_seconds += trials[si * n_trials + t].kernel_seconds;
        sv.mean_kernel_seconds = total_seconds / static_cast<double>(n_trials);
        if (!defined) continue;
        std::vector<double> column(n_trials);
        const bool has_rb = sv.scheme != Scheme::pg;
        if (has_rb) sv.rb_variance.resize(static_cast<std::size_t>(n_nodes));
        sv.mc_variance.resize(static_cast<std::size_t>(n_nodes));
        for (int node = 0; node < n_nodes; ++node) {
            if (has_rb) {
                for (std::size_t t = 0; t < n_trials; ++t)
                    column[t] = trials[si * n_trials + t].rb_mean[static_cast<std::size_t>(node)];
                sv.rb_variance[static_cast<std::size_t>(node)] = sample_variance(column);
            }
            for (std::size_t t = 0; t < n_trials; ++t)
                column[t] = trials[si * n_trials + t].mc_mean[static_cast<std::size_t>(node)];
            sv.mc_variance[static_cast<std::size_t>(node)] = sample_variance(column);
        }
        sv.raw_variance = has_rb ? sv.rb_variance : sv.mc_variance;
    }

    double fastest = 0.0;
    if (cfg.time_units == TimeUnits::seconds) {
        fastest = outcome.per_scheme.front().mean_kernel_seconds;
        for (const auto& sv : outcome.per_scheme) fastest = std::min(fastest, sv.mean_kernel_seconds);
    }
    for (auto& sv : outcome.per_scheme) {
        sv.time_factor = (cfg.time_units == TimeUnits::seconds && fastest > 0.0)
                             ? sv.mean_kernel_seconds / fastest
                             : 1.0;
        sv.time_adjusted = sv.raw_variance;
        for (auto& v : sv.time_adjusted) v *= sv.time_factor;
    }

    std::filesystem::create_directories(cfg.output_dir);
    save_config(cfg.output_dir / "config.json", cfg);
    save_model_file(cfg.output_dir / "model.json", model);
    write_run_metadata(cfg);

    std::string per_node = "node_row,node_col,scheme,raw_variance,time_adjusted_variance\n";
    std::string estimators = "node_row,node_col,scheme,rb_variance,mc_variance\n";
    for (const auto& sv : outcome.per_scheme) {
        if (!defined) continue;
        for (int node = 0; node < n_nodes; ++node) {
            const std::string prefix = std::to_string(mrf.node_row(node)) + "," +
                                       std::to_string(mrf.node_col(node)) + "," + to_string(sv.scheme);
            per_node += prefix + "," + format_double(sv.raw_variance[static_cast<std::size_t>(node)]) +
                        "," + format_double(sv.time_adjusted[static_cast<std::size_t>(node)]) + "\n";
            if (!sv.rb_variance.empty())
                estimators += prefix + "," +
                              format_double(sv.rb_variance[static_cast<std::size_t>(node)]) + "," +
                              format_double(sv.mc_variance[static_cast<std::size_t>(node)]) + "\n";
        }
    }
    write_file_atomic(cfg.output_dir / "variance_per_node.csv", per_node);
    write_file_atomic(cfg.output_dir / "variance_estimators.csv", estimators);

    json summary;
    summary["experiment"] = "variance";
    summary["n_trials"] = cfg.n_trials;
    summary["n_iters"] = cfg.n_iters;
    summary["burn_in"] = cfg.burn_in;
    summary["variance_defined"] = defined;
    json scheme_rows = json::array();
    json timing;
    for (const auto& sv : outcome.per_scheme) {
        json row;
        row["scheme"] = to_string(sv.scheme);
        if (defined) {
            row["median_raw_variance"] = median(sv.raw_variance);
            row["median_time_adjusted_variance"] = median(sv.time_adjusted);
            row["time_factor"] = sv.time_factor;
        }
        scheme_rows.push_back(row);
        timing[to_string(sv.scheme)] = {{"mean_kernel_seconds", sv.mean_kernel_seconds}};
    }
    summary["schemes"] = scheme_rows;
    write_file_atomic(cfg.output_dir / "variance_summary.json", summary.dump(2) + "\n");
    write_timing_sidecar(cfg, timing);
    return outcome;
}

DenoiseOutcome run_denoise_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    DenoiseOutcome outcome;
    ModelFile model;
    if (cfg.model_path) {
        model = load_model_file(*cfg.model_path);
        outcome.truth = model.observations;  // no separate truth available
    } else {
        outcome.truth = generate_patch_image(cfg.rows, cfg.cols, cfg.n_states, cfg.n_rects,
                                             derive_seed(cfg.seed, "patch", 0));
        model = prepare_model(cfg, corrupt_flip(outcome.truth, cfg.n_states, cfg.noise_flip_prob,
                                                derive_seed(cfg.seed, "noise", 0)));
    }
    outcome.model = model;
    const GridMrf mrf = build_from_model_file(model);
    const std::size_t n_schemes = cfg.schemes.size();
    const std::size_t n_trials = static_cast<std::size_t>(cfg.n_trials);
    const std::vector<int>& truth = outcome.truth;

    struct Trial {
        std::vector<TracePoint> trace;
        std::vector<int> final_recon;
        double kernel_seconds = 0.0;
    };
    std::vector<Trial> trials(n_schemes * n_trials);

    run_tasks(cfg.jobs, trials.size(), [&](std::size_t task) {
        const std::size_t si = task / n_trials;
        const std::size_t trial = task % n_trials;
        const Scheme scheme = cfg.schemes[si];
        ChainConfig chain;
        chain.scheme = scheme;
        chain.n_iters = cfg.n_iters;
        chain.burn_in = cfg.burn_in;
        chain.seed = derive_seed(cfg.seed, to_string(scheme), trial);
        chain.checkpoint_every = cfg.checkpoint_every;
        RbAccumulator acc = make_accumulator(mrf);
        Trial& out = trials[task];
        auto on_checkpoint = [&](const ChainCheckpoint& cp, const RbAccumulator& snapshot) {
            const std::vector<double> beliefs =
                scheme == Scheme::pg ? mc_belief_estimate(snapshot) : belief_estimate(snapshot);
            const std::vector<int> recon =
                map_reconstruction(beliefs, snapshot.n_nodes, snapshot.n_states);
            out.trace.push_back(
                {cp.iteration, cp.cum_kernel_seconds, reconstruction_error(recon, truth)});
        };
        const ChainSummary summary = run_chain(mrf, chain, acc, on_checkpoint);
        out.kernel_seconds = summary.kernel_seconds;
        const std::vector<double> beliefs =
            scheme == Scheme::pg ? mc_belief_estimate(acc) : belief_estimate(acc);
        out.final_recon = map_reconstruction(beliefs, acc.n_nodes, acc.n_states);
        if (out.trace.empty()) throw std::logic_error("denoise: no checkpoints recorded");
    });

    outcome.per_scheme.resize(n_schemes);
    for (std::size_t si = 0; si < n_schemes; ++si) {
        SchemeDenoise& sd = outcome.per_scheme[si];
        sd.scheme = cfg.schemes[si];
        sd.trials.resize(n_trials);
        sd.final_errors.resize(n_trials);
        for (std::size_t t = 0; t < n_trials; ++t) {
            sd.trials[t] = trials[si * n_trials + t].trace;
            sd.final_errors[t] = sd.trials[t].back().error;
        }
        sd.median_final_error = median(sd.final_errors);
        sd.stddev_final_error = n_trials >= 2 ? sample_stddev(sd.final_errors) : 0.0;
    }

    std::filesystem::create_directories(cfg.output_dir);
    save_config(cfg.output_dir / "config.json", cfg);
    save_model_file(cfg.output_dir / "model.json", model);
    write_run_metadata(cfg);

    const auto as_pgm = [&](const std::vector<int>& px) {
        PgmImage img;
        img.rows = cfg.rows;
        img.cols = cfg.cols;
        img.maxval = cfg.n_states - 1;
        img.pixels = px;
        return img;
    };
    write_pgm(cfg.output_dir / "truth.pgm", as_pgm(truth));
    write_pgm(cfg.output_dir / "observed.pgm", as_pgm(model.observations));

    std::string trace_csv =
        "scheme,trial,checkpoint_iter,cumulative_kernel_seconds,reconstruction_error\n";
    json timing;
    for (std::size_t si = 0; si < n_schemes; ++si) {
        const SchemeDenoise& sd = outcome.per_scheme[si];
        for (std::size_t t = 0; t < n_trials; ++t) {
            for (const TracePoint& pt : sd.trials[t]) {
                const double time_cell = cfg.time_units == TimeUnits::seconds
                                             ? pt.kernel_seconds
                                             : static_cast<double>(pt.iteration);
                trace_csv += std::string(to_string(sd.scheme)) + "," + std::to_string(t) + "," +
                             std::to_string(pt.iteration) + "," + format_double(time_cell) + "," +
                             format_double(pt.error) + "\n";
            }
        }
        double total_seconds = 0.0;
        for (std::size_t t = 0; t < n_trials; ++t) total_seconds += trials[si * n_trials + t].kernel_seconds;
        timing[to_string(sd.scheme)] = {{"mean_kernel_seconds", total_seconds / static_cast<double>(n_trials)}};
        write_pgm(cfg.output_dir / (std::string("recon_") + to_string(sd.scheme) + ".pgm"),
                  as_pgm(trials[si * n_trials].final_recon));
    }
    write_file_atomic(cfg.output_dir / "denoise_trace.csv", trace_csv);

    json summary;
    summary["experiment"] = "denoise";
    summary["n_trials"] = cfg.n_trials;
    summary["n_iters"] = cfg.n_iters;
    summary["burn_in"] = cfg.burn_in;
    summary["checkpoint_every"] = cfg.checkpoint_every;
    summary["noise_flip_prob"] = cfg.noise_flip_prob;
    json scheme_rows = json::array();
    for (const auto& sd : outcome.per_scheme) {
        json row;
        row["scheme"] = to_string(sd.scheme);
        row["median_final_error"] = sd.median_final_error;
        row["stddev_final_error"] = sd.stddev_final_error;
        scheme_rows.push_back(row);
    }
    summary["schemes"] = scheme_rows;
    write_file_atomic(cfg.output_dir / "denoise_summary.json", summary.dump(2) + "\n");
    write_timing_sidecar(cfg, timing);
    return outcome;
}

DiagnoseOutcome run_diagnose(const ExperimentConfig& cfg) {
    validate(cfg);
    DiagnoseOutcome outcome;
    outcome.rows.resize(static_cast<std::size_t>(cfg.diagnose_seeds));

    run_tasks(cfg.jobs, outcome.rows.size(), [&](std::size_t idx) {
        const int index = static_cast<int>(idx);
        const GridMrf mrf = make_sweep_model(cfg.seed, index, cfg.diagnose_rows, cfg.diagnose_cols);
        const EnumeratedJoint joint = enumerate_joint(mrf);
        const Eigen::VectorXd pi = stationary_vector(joint);
        const Partition cb = checkerboard_partition(mrf);
        const Partition ts = comb_tree_partition(mrf);

        DiagnoseRow row;
        row.seed_index = index;
        row.rows = mrf.rows();
        row.cols = mrf.cols();
        row.family = sweep_family_name(index);

        const BlockJoint bj_cb = build_block_joint(mrf, joint, cb);
        const BlockJoint bj_ts = build_block_joint(mrf, joint, ts);
        row.gamma_cb = block_maximal_correlation(bj_cb);
        row.gamma_ts = block_maximal_correlation(bj_ts);
        row.mi_cb = block_mutual_information(bj_cb);
        row.mi_ts = block_mutual_information(bj_ts);
        row.thm1_pass = row.gamma_ts <= row.gamma_cb + kThm1Tol;
        row.thm2_pass = row.mi_cb >= row.mi_ts - kThm2Tol;

        const Eigen::MatrixXd k_cb = build_da_kernel(mrf, joint, cb);
        const Eigen::MatrixXd k_ts = build_da_kernel(mrf, joint, ts);
        if (stationary_residual(k_cb, pi) > 1e-8 || stationary_residual(k_ts, pi) > 1e-8)
            throw std::logic_error("diagnose: kernel does not preserve the stationary law");
        row.step_entropy_cb = step_conditional_entropy(k_cb, pi);
        row.step_entropy_ts = step_conditional_entropy(k_ts, pi);
        row.entropy_order_pass = row.step_entropy_ts >= row.step_entropy_cb - kThm2Tol;
        row.norm_cb = forward_operator_norm(k_cb, pi);
        row.norm_ts = forward_operator_norm(k_ts, pi);

        row.prop1_pass = true;
        for (int node = 0; node < mrf.n_nodes(); ++node) {
            const auto& ts_cond = std::binary_search(ts.side1.begin(), ts.side1.end(), node)
                                      ? ts.side2
                                      : ts.side1;
            const auto& cb_cond = std::binary_search(cb.side1.begin(), cb.side1.end(), node)
                                      ? cb.side2
                                      : cb.side1;
            for (int fn = -1; fn < mrf.n_states(); ++fn) {
                const auto h = [node, fn](std::span<const int> x) {
                    return fn < 0 ? static_cast<double>(x[node])
                                  : static_cast<double>(x[node] == fn);
                };
                const double var_ts = var_conditional_expectation(mrf, joint, ts_cond, h);
                const double var_cb = var_conditional_expectation(mrf, joint, cb_cond, h);
                row.prop1_max_excess = std::max(row.prop1_max_excess, var_ts - var_cb);
                if (var_ts > var_cb + kProp1Tol) row.prop1_pass = false;
            }
        }

        Eigen::VectorXd start = Eigen::VectorXd::Zero(pi.size());
        start(static_cast<Eigen::Index>(joint_index(mrf, mrf.observations()))) = 1.0;
        const RateFit fit_cb = geometric_rate_check(k_cb, pi, start, cfg.rate_steps);
        const RateFit fit_ts = geometric_rate_check(k_ts, pi, start, cfg.rate_steps);
        row.rate_cb = fit_cb.slope;
        row.rate_ts = fit_ts.slope;
        row.rate_cb_immediate = fit_cb.immediate;
        row.rate_ts_immediate = fit_ts.immediate;
        row.rate_bound_cb_pass = fit_cb.immediate || fit_cb.slope <= std::log(row.norm_cb) + kRateBoundSlack;
        row.rate_bound_ts_pass = fit_ts.immediate || fit_ts.slope <= std::log(row.norm_ts) + kRateBoundSlack;
        row.rate_order_pass = row.rate_ts <= row.rate_cb + kRateOrderTol;

        outcome.rows[idx] = std::move(row);
    });

    std::filesystem::create_directories(cfg.output_dir);
    save_config(cfg.output_dir / "config.json", cfg);
    std::string csv =
        "seed_index,rows,cols,family,gamma_cb,gamma_ts,mi_cb,mi_ts,step_entropy_cb,"
        "step_entropy_ts,prop1_max_excess,norm_cb,norm_ts,rate_cb,rate_ts,thm1_pass,"
        "thm2_pass,entropy_order_pass,prop1_pass,rate_bound_cb_pass,rate_bound_ts_pass,"
        "rate_order_pass\n";
    for (const DiagnoseRow& row : outcome.rows) {
        csv += std::to_string(row.seed_index) + "," + std::to_string(row.rows) + "," +
               std::to_string(row.cols) + "," + row.family + "," + format_double(row.gamma_cb) +
               "," + format_double(row.gamma_ts) + "," + format_double(row.mi_cb) + "," +
               format_double(row.mi_ts) + "," + format_double(row.step_entropy_cb) + "," +
               format_double(row.step_entropy_ts) + "," + format_double(row.prop1_max_excess) +
               "," + format_double(row.norm_cb) + "," + format_double(row.norm_ts) + "," +
               format_double(row.rate_cb) + "," + format_double(row.rate_ts) + "," +
               bool_cell(row.thm1_pass) + "," + bool_cell(row.thm2_pass) + "," +
               bool_cell(row.entropy_order_pass) + "," + bool_cell(row.prop1_pass) + "," +
               bool_cell(row.rate_bound_cb_pass) + "," + bool_cell(row.rate_bound_ts_pass) + "," +
               bool_cell(row.rate_order_pass) + "\n";
    }
    write_file_atomic(cfg.output_dir / "diagnose_report.csv", csv);
    return outcome;
}

}  // namespace gridmrf
