#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridmrf/grid_model.hpp"
#include "gridmrf/model_io.hpp"
#include "gridmrf/samplers.hpp"

namespace gridmrf {

enum class ExperimentKind { variance, denoise, diagnose };
enum class TimeUnits { seconds, iterations };

ExperimentKind parse_experiment_kind(const std::string& name);
const char* to_string(ExperimentKind kind);
TimeUnits parse_time_units(const std::string& name);
const char* to_string(TimeUnits units);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::variance;
    int rows = 6;
    int cols = 6;
    int n_states = 8;
    PotentialSpec potential{};
    std::vector<Scheme> schemes{Scheme::pg, Scheme::cb, Scheme::ts};
    int n_trials = 100;
    long n_iters = 500;
    long burn_in = 50;
    double noise_flip_prob = 0.2;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "results";
    int checkpoint_every = 10;
    int n_rects = 6;
    TimeUnits time_units = TimeUnits::seconds;
    int jobs = 1;
    int diagnose_seeds = 100;
    int diagnose_rows = 0;  // 0/0 alternates 2x2 and 2x3
    int diagnose_cols = 0;
    int rate_steps = 60;
    std::optional<std::filesystem::path> model_path;  // skip generation, load this model
};

void validate(const ExperimentConfig& cfg);
ExperimentConfig default_variance_config();
ExperimentConfig default_denoise_config();
ExperimentConfig default_diagnose_config();

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

// Background label 0; n_rects random axis-aligned rectangles with random
// nonzero labels painted in order.
std::vector<int> generate_patch_image(int rows, int cols, int n_states, int n_rects,
                                      std::uint64_t seed);

// Each label independently replaced, with probability p, by a uniformly
// random different label.
std::vector<int> corrupt_flip(std::span<const int> labels, int n_states, double p,
                              std::uint64_t seed);

struct SchemeVariance {
    Scheme scheme = Scheme::pg;
    std::vector<double> raw_variance;   // per node; empty when n_trials < 2
    std::vector<double> time_adjusted;  // per node
    std::vector<double> rb_variance;    // per node; empty for pg
    std::vector<double> mc_variance;    // per node
    double mean_kernel_seconds = 0.0;
    double time_factor = 1.0;
};
struct VarianceOutcome {
    ModelFile model;
    std::vector<SchemeVariance> per_scheme;  // config order
};
VarianceOutcome run_variance_experiment(const ExperimentConfig& cfg);

struct TracePoint {
    long iteration = 0;
    double kernel_seconds = 0.0;  // measured wall clock even in iterations mode
    double error = 0.0;
};
struct SchemeDenoise {
    Scheme scheme = Scheme::pg;
    std::vector<std::vector<TracePoint>> trials;  // [trial][checkpoint]
    std::vector<double> final_errors;             // per trial
    double median_final_error = 0.0;
    double stddev_final_error = 0.0;
};
struct DenoiseOutcome {
    ModelFile model;  // observations = corrupted image
    std::vector<int> truth;
    std::vector<SchemeDenoise> per_scheme;
};
DenoiseOutcome run_denoise_experiment(const ExperimentConfig& cfg);

// Error of the last checkpoint no later than time t (the first checkpoint if
// none qualifies): the anchor for equal-computation comparisons.
double error_at_time(std::span<const TracePoint> trace, double t);

double median(std::vector<double> values);
double sample_variance(std::span<const double> values);
double sample_stddev(std::span<const double> values);

struct DiagnoseRow {
    int seed_index = 0;
    int rows = 0;
    int cols = 0;
    std::string family;
    double gamma_cb = 0.0, gamma_ts = 0.0;
    double mi_cb = 0.0, mi_ts = 0.0;
    double step_entropy_cb = 0.0, step_entropy_ts = 0.0;
    double prop1_max_excess = 0.0;  // max over nodes and h of var_ts - var_cb
    double norm_cb = 0.0, norm_ts = 0.0;
    double rate_cb = 0.0, rate_ts = 0.0;  // fitted log-gap slopes
    bool rate_cb_immediate = false, rate_ts_immediate = false;
    bool thm1_pass = false;
    bool thm2_pass = false;
    bool entropy_order_pass = false;
    bool prop1_pass = false;
    bool rate_bound_cb_pass = false;
    bool rate_bound_ts_pass = false;
    bool rate_order_pass = false;
};
struct DiagnoseOutcome {
    std::vector<DiagnoseRow> rows;
};
DiagnoseOutcome run_diagnose(const ExperimentConfig& cfg);

int cli_main(int argc, char** argv);

}  // namespace gridmrf
