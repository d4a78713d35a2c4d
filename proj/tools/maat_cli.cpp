// Command-line front-end: dataset generation, kernel reconstruction,
// classical baselines, sparse discovery, and the experiment harness.

#include <CLI11.hpp>
#include <json.hpp>

#include "maat/baselines.hpp"
#include "maat/discovery.hpp"
#include "maat/dynamics.hpp"
#include "maat/eval.hpp"
#include "maat/io.hpp"
#include "maat/reconstruction.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maat;

namespace {

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::missing_file: return 3;
        case ErrorKind::malformed_file: return 4;
        case ErrorKind::numeric: return 5;
        default: return 2;
    }
}

const char* kind_name(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::invalid_parameter: return "invalid-parameter";
        case ErrorKind::config: return "config";
        case ErrorKind::missing_file: return "missing-file";
        case ErrorKind::malformed_file: return "malformed-file";
        case ErrorKind::numeric: return "numeric";
    }
    return "error";
}

struct CommonOpts {
    std::string out;
    std::uint64_t seed = 0;
};

// flags > config file > defaults; unknown config keys are rejected
void wire_config(CLI::App* cmd) {
    cmd->set_config("--config", "", "Read options from a configuration file");
    cmd->allow_config_extras(CLI::config_extras_mode::error);
}

struct GenFlags {
    std::string system = "seir";
    std::string noise = "gaussian";
    std::string operator_kind;
    double dt = 0.0;
    long n_train = 0, n_val = 0, n_test = 0;
    double param_jitter = 0.05, ic_jitter = 0.10;
    int snapshot_stride = 1;
    bool clean_snapshots = false;
    double noise_scale = -1.0; // negative = 5% of mean absolute state
};

void add_gen_flags(CLI::App* cmd, GenFlags& g) {
    cmd->add_option("--system", g.system, "ODE system: seir|seirh|viral|predprey");
    cmd->add_option("--noise", g.noise, "Noise kind: gaussian|ar1|student-t");
    cmd->add_option("--operator", g.operator_kind,
                    "Observation channels: identity|sum-all|select:i,j|mixing-infectious-total");
    cmd->add_option("--dt", g.dt, "Integration step (0 = system default)");
    cmd->add_option("--n-train", g.n_train, "Training grid points (0 = default 500)");
    cmd->add_option("--n-val", g.n_val, "Validation grid points (0 = default 200)");
    cmd->add_option("--n-test", g.n_test, "Test grid points (0 = default 200)");
    cmd->add_option("--param-jitter", g.param_jitter, "Multiplicative parameter jitter");
    cmd->add_option("--ic-jitter", g.ic_jitter, "Per-dimension initial-condition jitter");
    cmd->add_option("--snapshot-stride", g.snapshot_stride, "Keep every k-th snapshot");
    cmd->add_flag("--clean-snapshots", g.clean_snapshots, "Leave snapshots noiseless");
    cmd->add_option("--noise-scale", g.noise_scale,
                    "Noise std (negative = 5% of mean absolute state, 0 = noiseless)");
}

GenConfig gen_config_from_flags(const GenFlags& g, std::uint64_t seed) {
    GenConfig cfg = default_gen_config(g.system);
    cfg.seed = seed;
    cfg.noise.kind = noise_kind_from_string(g.noise);
    cfg.noise.scale = g.noise_scale;
    if (!g.operator_kind.empty()) cfg.operator_kind = g.operator_kind;
    if (g.dt > 0.0) cfg.dt = g.dt;
    if (g.n_train > 0) cfg.n_train = g.n_train;
    if (g.n_val > 0) cfg.n_val = g.n_val;
    if (g.n_test > 0) cfg.n_test = g.n_test;
    cfg.param_jitter = g.param_jitter;
    cfg.ic_jitter = g.ic_jitter;
    cfg.snapshot_stride = g.snapshot_stride;
    cfg.noisy_snapshots = !g.clean_snapshots;
    return cfg;
}

json gen_flags_json(const GenFlags& g, std::uint64_t seed) {
    return json{{"system", g.system},
                {"noise", g.noise},
                {"operator", g.operator_kind},
                {"dt", g.dt},
                {"n_train", g.n_train},
                {"n_val", g.n_val},
                {"n_test", g.n_test},
                {"param_jitter", g.param_jitter},
                {"ic_jitter", g.ic_jitter},
                {"snapshot_stride", g.snapshot_stride},
                {"clean_snapshots", g.clean_snapshots},
                {"noise_scale", g.noise_scale},
                {"seed", seed}};
}

struct FitFlags {
    double w_snapshot = 1.0, w_signal = 1.0, lambda = 1e-6, gamma = 1e-3;
    double w_nonneg = 1.0, w_conserve = 1.0, w_monotone = 1.0;
    double learning_rate = 1.0;
    long max_iterations = 20000, patience = 2000;
    int sweep_steps = 200;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--w-snapshot", f.w_snapshot, "Snapshot-fidelity weight");
    cmd->add_option("--w-signal", f.w_signal, "Signal-fidelity weight");
    cmd->add_option("--lambda", f.lambda, "Coefficient ridge weight");
    cmd->add_option("--gamma", f.gamma, "Derivative-deviation weight");
    cmd->add_option("--w-nonneg", f.w_nonneg, "Non-negativity weight (prior methods)");
    cmd->add_option("--w-conserve", f.w_conserve, "Conservation weight (prior methods)");
    cmd->add_option("--w-monotone", f.w_monotone, "Monotonicity weight (prior methods)");
    cmd->add_option("--learning-rate", f.learning_rate, "Optimizer learning rate");
    cmd->add_option("--max-iterations", f.max_iterations, "Optimizer iteration cap");
    cmd->add_option("--patience", f.patience, "Early-stopping patience");
    cmd->add_option("--sweep-steps", f.sweep_steps, "Training steps per sweep candidate");
}

PipelineConfig pipeline_from_flags(const FitFlags& f) {
    PipelineConfig p;
    p.weights.w_snapshot = f.w_snapshot;
    p.weights.w_signal = f.w_signal;
    p.weights.lambda = f.lambda;
    p.optimizer.learning_rate = f.learning_rate;
    p.optimizer.max_iterations = f.max_iterations;
    p.optimizer.patience = f.patience;
    p.sweep.steps_per_candidate = f.sweep_steps;
    p.nonneg_weight = f.w_nonneg;
    p.conserve_weight = f.w_conserve;
    p.monotone_weight = f.w_monotone;
    return p;
}

json fit_flags_json(const FitFlags& f) {
    return json{{"w_snapshot", f.w_snapshot},   {"w_signal", f.w_signal},
                {"lambda", f.lambda},           {"gamma", f.gamma},
                {"w_nonneg", f.w_nonneg},       {"w_conserve", f.w_conserve},
                {"w_monotone", f.w_monotone},   {"learning_rate", f.learning_rate},
                {"max_iterations", f.max_iterations}, {"patience", f.patience},
                {"sweep_steps", f.sweep_steps}};
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

int cmd_generate(const GenFlags& g, const CommonOpts& common) {
    const GenConfig cfg = gen_config_from_flags(g, common.seed);
    const TimeSeriesDataset ds = generate_dataset(g.system, cfg);
    save_dataset(ds, common.out);
    write_manifest(fs::path(common.out) / "manifest.json", "generate",
                   gen_flags_json(g, common.seed).dump());
    std::cout << "dataset written to " << common.out << "\n";
    return 0;
}

int cmd_reconstruct(const std::string& dataset_dir, const std::string& method,
                    const FitFlags& flags, const CommonOpts& common) {
    const TimeSeriesDataset ds = load_dataset(dataset_dir);
    PipelineConfig pipeline = pipeline_from_flags(flags);

    const LengthScales scales =
        sweep_length_scales(ds, pipeline.weights, PriorSpec::none(), pipeline.sweep);
    PriorSpec priors = method_priors(method, ds, ds.train, pipeline);
    priors.gamma = flags.gamma;
    const KernelModel model = fit_split(ds.train, ds.observation, scales, pipeline.weights,
                                        priors, pipeline.optimizer);
    const Evaluation ev = evaluate(model, ds.train.times);

    fs::create_directories(common.out);
    const std::string tag = method;
    save_kernel_model(model, fs::path(common.out) / ("model_" + tag + ".txt"));
    save_estimate(tag, ds.train.times, ev.states, ev.derivs,
                  fs::path(common.out) / ("estimate_" + tag + ".csv"));
    json cfg = fit_flags_json(flags);
    cfg["method"] = method;
    cfg["dataset"] = dataset_dir;
    cfg["seed"] = common.seed;
    write_manifest(fs::path(common.out) / "manifest.json", "reconstruct", cfg.dump());
    std::cout << "model and estimate written to " << common.out << "\n";
    return 0;
}

int cmd_baseline(const std::string& dataset_dir, const std::string& method,
                 const CommonOpts& common) {
    const TimeSeriesDataset ds = load_dataset(dataset_dir);
    const BaselineReconstruction rec =
        reconstruct_with_baseline(method, ds.train, ds.observation);
    fs::create_directories(common.out);
    save_estimate(method, ds.train.times, rec.states, rec.derivs,
                  fs::path(common.out) / ("estimate_" + method + ".csv"));
    write_manifest(fs::path(common.out) / "manifest.json", "baseline",
                   json{{"method", method}, {"dataset", dataset_dir}, {"seed", common.seed}}
                       .dump());
    std::cout << "estimate written to " << common.out << "\n";
    return 0;
}

int cmd_discover(const std::string& estimate_file, int degree, const StlsConfig& stls,
                 const std::string& dataset_dir, const CommonOpts& common) {
    const Estimate est = load_estimate(estimate_file);
    const FeatureLibrary lib = make_library(est.states.cols(), degree, true);
    const SparseDynamicsModel model =
        stls_fit(build_features(est.states, lib), est.derivs, lib, stls);

    std::vector<std::string> names;
    if (!dataset_dir.empty()) names = load_dataset(dataset_dir).system.state_names;

    fs::create_directories(common.out);
    save_sparse_model(model, names, fs::path(common.out) / "model_sparse.txt");
    write_text_file(fs::path(common.out) / "equations.txt", format_equations(model, names));
    write_manifest(fs::path(common.out) / "manifest.json", "discover",
                   json{{"estimate", estimate_file},
                        {"degree", degree},
                        {"threshold", stls.threshold},
                        {"decay", stls.decay},
                        {"max_iterations", stls.max_iterations},
                        {"seed", common.seed}}
                       .dump());
    std::cout << format_equations(model, names);
    return 0;
}

struct ExperimentFlags {
    std::string name;
    std::string systems, noises, methods;
    int seeds = 10;
    std::string seed_list;
    int workers = 0;
};

int cmd_experiment(const ExperimentFlags& ex, const GenFlags& gen_flags, const FitFlags& fit,
                   const CommonOpts& common) {
    ExperimentConfig cfg;
    cfg.pipeline = pipeline_from_flags(fit);
    cfg.workers = ex.workers;
    if (!ex.systems.empty()) cfg.systems = split_csv_list(ex.systems);
    if (!ex.noises.empty()) cfg.noises = split_csv_list(ex.noises);
    if (!ex.methods.empty()) cfg.methods = split_csv_list(ex.methods);
    cfg.seeds.clear();
    if (!ex.seed_list.empty()) {
        for (const auto& s : split_csv_list(ex.seed_list)) cfg.seeds.push_back(std::stoull(s));
    } else {
        for (int s = 0; s < ex.seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    const GenFlags gf = gen_flags;
    cfg.gen_mutator = [gf](GenConfig& g) {
        if (!gf.operator_kind.empty()) g.operator_kind = gf.operator_kind;
        if (gf.dt > 0.0) g.dt = gf.dt;
        if (gf.n_train > 0) g.n_train = gf.n_train;
        if (gf.n_val > 0) g.n_val = gf.n_val;
        if (gf.n_test > 0) g.n_test = gf.n_test;
        if (gf.snapshot_stride > 1) g.snapshot_stride = gf.snapshot_stride;
        if (gf.clean_snapshots) g.noisy_snapshots = false;
        if (gf.noise_scale >= 0.0) g.noise.scale = gf.noise_scale;
        g.param_jitter = gf.param_jitter;
        g.ic_jitter = gf.ic_jitter;
    };

    json manifest_cfg = gen_flags_json(gen_flags, common.seed);
    manifest_cfg.update(fit_flags_json(fit));
    manifest_cfg["name"] = ex.name;
    manifest_cfg["systems"] = cfg.systems;
    manifest_cfg["noises"] = cfg.noises;
    manifest_cfg["methods"] = cfg.methods;
    manifest_cfg["seeds"] = cfg.seeds;

    const fs::path out(common.out);
    if (ex.name == "noise-matrix") {
        const ExperimentOutput res = run_noise_matrix(cfg);
        write_experiment_output(res, {"dataset", "noise", "method"}, out);
    } else if (ex.name == "nonneg") {
        cfg.noises = {"gaussian"};
        if (!ex.noises.empty()) cfg.noises = split_csv_list(ex.noises);
        const ExperimentOutput res = run_nonneg_ablation(cfg);
        write_experiment_output(res, {"dataset", "method"}, out);
    } else if (ex.name == "priors") {
        cfg.noises = {"gaussian"};
        if (!ex.noises.empty()) cfg.noises = split_csv_list(ex.noises);
        const ExperimentOutput res = run_priors_ablation(cfg);
        write_experiment_output(res, {"dataset", "method"}, out);
    } else if (ex.name == "lasso") {
        LassoExperimentConfig lcfg;
        lcfg.seeds = ex.seeds;
        const LassoExperimentOutput res = run_lasso_experiment(lcfg);
        fs::create_directories(out);
        write_text_file(out / "lasso.csv", res.table);
    } else if (ex.name == "fd-noise-floor") {
        NoiseFloorConfig ncfg;
        ncfg.seed = common.seed;
        ncfg.pipeline = cfg.pipeline;
        const NoiseFloorResult res = run_fd_noise_floor(ncfg);
        fs::create_directories(out);
        write_text_file(out / "noise_floor.csv", res.table);
        std::cout << "fitted c = " << res.fitted_c << "\n";
    } else {
        throw ConfigError("unknown experiment: " + ex.name);
    }
    write_manifest(out / "manifest.json", "experiment " + ex.name, manifest_cfg.dump());
    std::cout << "experiment tables written to " << common.out << "\n";
    return 0;
}

int cmd_aggregate(const std::string& rows_file, const std::string& group,
                  const CommonOpts& common) {
    const std::vector<ResultRow> rows = rows_from_csv_text(read_text_file(rows_file));
    const std::vector<std::string> keys = split_csv_list(group);
    const std::vector<SummaryRow> summary = aggregate(rows, keys);
    write_text_file(common.out, summary_to_csv(keys, summary));
    write_manifest(fs::path(common.out).parent_path() / "manifest.json", "aggregate",
                   json{{"rows", rows_file}, {"group", group}, {"seed", common.seed}}.dump());
    std::cout << "summary written to " << common.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel state reconstruction and sparse dynamics discovery"};
    app.require_subcommand(1);

    CommonOpts common;
    GenFlags gen_flags;
    FitFlags fit_flags;
    ExperimentFlags ex_flags;
    std::string dataset_dir, method = "maat", estimate_file, rows_file, group = "method";
    int degree = 2;
    StlsConfig stls;

    auto add_common = [&](CLI::App* cmd, bool out_required = true) {
        auto* o = cmd->add_option("--out", common.out, "Output path");
        if (out_required) o->required();
        cmd->add_option("--seed", common.seed, "Random seed")->envname("MAAT_SEED");
        wire_config(cmd);
    };

    CLI::App* c_generate = app.add_subcommand("generate", "Generate a benchmark dataset");
    add_gen_flags(c_generate, gen_flags);
    add_common(c_generate);

    CLI::App* c_reconstruct =
        app.add_subcommand("reconstruct", "Fit the kernel reconstruction on a dataset");
    c_reconstruct->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    c_reconstruct->add_option("--method", method, "maat|maat+nonneg|maat+priors");
    add_fit_flags(c_reconstruct, fit_flags);
    add_common(c_reconstruct);

    CLI::App* c_baseline = app.add_subcommand("baseline", "Run a classical estimator");
    c_baseline->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    c_baseline->add_option("--method", method, "fd|savgol|spline|linear|rbf|tvreg|kalman")
        ->required();
    add_common(c_baseline);

    CLI::App* c_discover = app.add_subcommand("discover", "Sparse regression on an estimate");
    c_discover->add_option("--estimate", estimate_file, "estimate_<method>.csv")->required();
    c_discover->add_option("--dataset", dataset_dir, "Dataset directory for state names");
    c_discover->add_option("--degree", degree, "Polynomial library degree");
    c_discover->add_option("--threshold", stls.threshold, "STLS threshold");
    c_discover->add_option("--decay", stls.decay, "STLS threshold decay");
    c_discover->add_option("--max-iterations", stls.max_iterations, "STLS outer iterations");
    add_common(c_discover);

    CLI::App* c_experiment = app.add_subcommand("experiment", "Run an experiment grid");
    c_experiment
        ->add_option("--name", ex_flags.name,
                     "noise-matrix|nonneg|priors|lasso|fd-noise-floor")
        ->required();
    c_experiment->add_option("--systems", ex_flags.systems, "Comma-separated system list");
    c_experiment->add_option("--noises", ex_flags.noises, "Comma-separated noise kinds");
    c_experiment->add_option("--methods", ex_flags.methods, "Comma-separated method list");
    c_experiment->add_option("--seeds", ex_flags.seeds, "Number of seeds (0..n-1)");
    c_experiment->add_option("--seed-list", ex_flags.seed_list, "Explicit seed list");
    c_experiment->add_option("--workers", ex_flags.workers, "Worker threads (0 = auto)");
    add_gen_flags(c_experiment, gen_flags);
    add_fit_flags(c_experiment, fit_flags);
    add_common(c_experiment);

    CLI::App* c_aggregate = app.add_subcommand("aggregate", "Aggregate a result-rows table");
    c_aggregate->add_option("--rows", rows_file, "rows.csv path")->required();
    c_aggregate->add_option("--group", group, "Grouping keys, e.g. dataset,method");
    add_common(c_aggregate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: kind=usage msg=\"" << e.what() << "\"\n";
        return 2;
    }

    try {
        if (app.got_subcommand(c_generate)) return cmd_generate(gen_flags, common);
        if (app.got_subcommand(c_reconstruct))
            return cmd_reconstruct(dataset_dir, method, fit_flags, common);
        if (app.got_subcommand(c_baseline)) return cmd_baseline(dataset_dir, method, common);
        if (app.got_subcommand(c_discover))
            return cmd_discover(estimate_file, degree, stls, dataset_dir, common);
        if (app.got_subcommand(c_experiment))
            return cmd_experiment(ex_flags, gen_flags, fit_flags, common);
        if (app.got_subcommand(c_aggregate)) return cmd_aggregate(rows_file, group, common);
    } catch (const Error& e) {
        std::cerr << "error: kind=" << kind_name(e) << " msg=\"" << e.what() << "\"\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: kind=internal msg=\"" << e.what() << "\"\n";
        return 1;
    }
    return 2;
}
