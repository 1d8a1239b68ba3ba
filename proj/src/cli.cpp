#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gridmrf/experiments.hpp"
#include "gridmrf/pgm.hpp"

namespace gridmrf {

namespace {

std::vector<Scheme> parse_scheme_list(const std::string& csv) {
    std::vector<Scheme> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_scheme(item));
    }
    if (out.empty()) throw std::invalid_argument("schemes list is empty");
    return out;
}

void parse_size(const std::string& text, int& rows, int& cols) {
    if (text == "alternate") {
        rows = 0;
        cols = 0;
        return;
    }
    const auto x = text.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= text.size())
        throw std::invalid_argument("size must be ROWSxCOLS or 'alternate'");
    rows = std::stoi(text.substr(0, x));
    cols = std::stoi(text.substr(x + 1));
    if (rows < 1 || cols < 1) throw std::invalid_argument("size dims must be positive");
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"blocked Gibbs samplers for grid MRFs: generation, experiments, diagnostics"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a random patch image as PGM");
    int g_rows = 8, g_cols = 8, g_states = 4, g_rects = 2;
    std::uint64_t g_seed = 0;
    std::string g_out = "patch.pgm";
    bool g_ascii = false;
    gen->add_option("--rows", g_rows, "grid rows")->check(CLI::PositiveNumber);
    gen->add_option("--cols", g_cols, "grid cols")->check(CLI::PositiveNumber);
    gen->add_option("--states", g_states, "number of labels")->check(CLI::Range(2, 65536));
    gen->add_option("--rects", g_rects, "number of rectangles")->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", g_seed, "rng seed")->required();
    gen->add_option("--out", g_out, "output PGM path");
    gen->add_flag("--ascii", g_ascii, "write P2 instead of P5");

    // corrupt
    auto* cor = app.add_subcommand("corrupt", "flip labels of a PGM at random");
    std::string c_in, c_out;
    double c_p = 0.2;
    std::uint64_t c_seed = 0;
    cor->add_option("--in", c_in, "input PGM")->required();
    cor->add_option("--out", c_out, "output PGM")->required();
    cor->add_option("--p", c_p, "flip probability")->check(CLI::Range(0.0, 1.0));
    cor->add_option("--seed", c_seed, "rng seed")->required();

    // run
    auto* run = app.add_subcommand("run", "run the variance or denoise experiment");
    std::string r_config, r_experiment, r_schemes, r_time_units, r_family, r_model, r_out_dir;
    int r_rows = 0, r_cols = 0, r_states = 0, r_trials = 0, r_checkpoint = 0, r_jobs = 0, r_rects = -1;
    long r_iters = 0, r_burn_in = -1;
    double r_p = -1.0, r_beta = 0.0, r_alpha = 0.0;
    std::uint64_t r_seed = 0, r_table_seed = 0;
    run->add_option("--config", r_config, "JSON config file");
    auto* o_experiment = run->add_option("--experiment", r_experiment, "variance|denoise");
    auto* o_rows = run->add_option("--rows", r_rows)->check(CLI::PositiveNumber);
    auto* o_cols = run->add_option("--cols", r_cols)->check(CLI::PositiveNumber);
    auto* o_states = run->add_option("--states", r_states)->check(CLI::Range(2, 65536));
    auto* o_schemes = run->add_option("--schemes", r_schemes, "comma list of pg,cb,ts,mixture");
    auto* o_trials = run->add_option("--trials", r_trials)->check(CLI::PositiveNumber);
    auto* o_iters = run->add_option("--iters", r_iters)->check(CLI::PositiveNumber);
    auto* o_burn = run->add_option("--burn-in", r_burn_in)->check(CLI::NonNegativeNumber);
    auto* o_p = run->add_option("--p", r_p, "flip probability")->check(CLI::Range(0.0, 1.0));
    auto* o_rects = run->add_option("--rects", r_rects)->check(CLI::NonNegativeNumber);
    auto* o_checkpoint = run->add_option("--checkpoint-every", r_checkpoint)->check(CLI::PositiveNumber);
    auto* o_jobs = run->add_option("--jobs", r_jobs)->check(CLI::PositiveNumber);
    auto* o_out_dir = run->add_option("--out-dir", r_out_dir);
    auto* o_units = run->add_option("--time-units", r_time_units, "seconds|iterations");
    auto* o_family = run->add_option("--family", r_family, "potts|random_table");
    auto* o_beta = run->add_option("--beta", r_beta, "pairwise same-label log boost");
    auto* o_alpha = run->add_option("--alpha", r_alpha, "unary observed-label log boost");
    auto* o_table_seed = run->add_option("--table-seed", r_table_seed);
    auto* o_model = run->add_option("--model", r_model, "model JSON overriding generation");
    run->add_option("--seed", r_seed, "master seed")->required();

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "exact small-model sweeps of the theory checks");
    int d_seeds = 100, d_steps = 60, d_jobs = 1;
    std::string d_size = "alternate", d_out_dir = "results";
    std::uint64_t d_seed = 0;
    diag->add_option("--seeds", d_seeds, "number of random models")->check(CLI::PositiveNumber);
    diag->add_option("--size", d_size, "ROWSxCOLS or 'alternate'");
    diag->add_option("--steps", d_steps, "rate-fit chain length")->check(CLI::Range(3, 100000));
    diag->add_option("--jobs", d_jobs)->check(CLI::PositiveNumber);
    diag->add_option("--out-dir", d_out_dir);
    diag->add_option("--seed", d_seed, "master seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            PgmImage img;
            img.rows = g_rows;
            img.cols = g_cols;
            img.maxval = g_states - 1;
            img.binary = !g_ascii;
            img.pixels = generate_patch_image(g_rows, g_cols, g_states, g_rects, g_seed);
            write_pgm(g_out, img);
        } else if (cor->parsed()) {
            if (c_p >= 1.0) throw std::invalid_argument("--p must be < 1");
            PgmImage img = read_pgm(c_in);
            img.pixels = corrupt_flip(img.pixels, img.maxval + 1, c_p, c_seed);
            write_pgm(c_out, img);
        } else if (run->parsed()) {
            ExperimentConfig cfg;
            if (!r_config.empty()) {
                cfg = load_config(r_config);
            } else {
                const std::string kind = o_experiment->count() ? r_experiment : "variance";
                cfg = parse_experiment_kind(kind) == ExperimentKind::denoise
                          ? default_denoise_config()
                          : default_variance_config();
            }
            if (o_experiment->count()) cfg.experiment = parse_experiment_kind(r_experiment);
            if (cfg.experiment == ExperimentKind::diagnose)
                throw std::invalid_argument("use the diagnose subcommand for diagnostics");
            if (o_rows->count()) cfg.rows = r_rows;
            if (o_cols->count()) cfg.cols = r_cols;
            if (o_states->count()) cfg.n_states = r_states;
            if (o_schemes->count()) cfg.schemes = parse_scheme_list(r_schemes);
            if (o_trials->count()) cfg.n_trials = r_trials;
            if (o_iters->count()) cfg.n_iters = r_iters;
            if (o_burn->count()) cfg.burn_in = r_burn_in;
            if (o_p->count()) {
                if (r_p >= 1.0) throw std::invalid_argument("--p must be < 1");
                cfg.noise_flip_prob = r_p;
            }
            if (o_rects->count()) cfg.n_rects = r_rects;
            if (o_checkpoint->count()) cfg.checkpoint_every = r_checkpoint;
            if (o_jobs->count()) cfg.jobs = r_jobs;
            if (o_out_dir->count()) cfg.output_dir = r_out_dir;
            if (o_units->count()) cfg.time_units = parse_time_units(r_time_units);
            if (o_family->count()) cfg.potential.kind = parse_potential_kind(r_family);
            if (o_beta->count()) cfg.potential.potts_coupling = r_beta;
            if (o_alpha->count()) cfg.potential.potts_obs_strength = r_alpha;
            if (o_table_seed->count()) cfg.potential.table_seed = r_table_seed;
            if (o_model->count()) cfg.model_path = r_model;
            cfg.seed = r_seed;
            validate(cfg);
            if (cfg.experiment == ExperimentKind::variance)
                run_variance_experiment(cfg);
            else
                run_denoise_experiment(cfg);
        } else if (diag->parsed()) {
            ExperimentConfig cfg = default_diagnose_config();
            cfg.diagnose_seeds = d_seeds;
            parse_size(d_size, cfg.diagnose_rows, cfg.diagnose_cols);
            cfg.rate_steps = d_steps;
            cfg.jobs = d_jobs;
            cfg.output_dir = d_out_dir;
            cfg.seed = d_seed;
            validate(cfg);
            run_diagnose(cfg);
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace gridmrf
