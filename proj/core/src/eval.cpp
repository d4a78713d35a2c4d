#include "maat/eval.hpp"

#include "maat/baselines.hpp"
#include "maat/lasso.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace maat {

GeoMeanCI geometric_mean_ci(const std::vector<double>& values) {
    GeoMeanCI out;
    std::vector<double> logs;
    for (double v : values) {
        if (v > 0.0) {
            logs.push_back(std::log(v));
            ++out.n_used;
        } else {
            ++out.n_excluded;
        }
    }
    if (logs.empty()) {
        out.geomean = out.lo = out.hi = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double mean = 0.0;
    for (double l : logs) mean += l;
    mean /= static_cast<double>(logs.size());
    if (!std::isfinite(mean)) {
        out.geomean = out.lo = out.hi = std::numeric_limits<double>::infinity();
        return out;
    }
    out.geomean = std::exp(mean);
    if (logs.size() < 2) {
        out.lo = out.hi = out.geomean;
        return out;
    }
    double ss = 0.0;
    for (double l : logs) ss += (l - mean) * (l - mean);
    const double sd = std::sqrt(ss / static_cast<double>(logs.size() - 1));
    const double half = 1.96 * sd / std::sqrt(static_cast<double>(logs.size()));
    out.lo = std::exp(mean - half);
    out.hi = std::exp(mean + half);
    return out;
}

namespace {

std::string key_of(const ResultRow& row, const std::string& key) {
    if (key == "dataset") return row.dataset;
    if (key == "noise") return row.noise;
    if (key == "method") return row.method;
    throw InvalidInputError("aggregate: unknown group key: " + key);
}

double metric_of(const ResultRow& row, const std::string& metric) {
    if (metric == "state_mse") return row.state_mse;
    if (metric == "deriv_mse") return row.deriv_mse;
    if (metric == "rollout_mse") return row.rollout_mse;
    throw InvalidInputError("aggregate: unknown metric: " + metric);
}

} // namespace

std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows,
                                  const std::vector<std::string>& group_keys) {
    std::map<std::vector<std::string>, std::vector<const ResultRow*>> groups;
    for (const auto& row : rows) {
        std::vector<std::string> key;
        for (const auto& k : group_keys) key.push_back(key_of(row, k));
        groups[key].push_back(&row);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, members] : groups) {
        for (const std::string metric : {"state_mse", "deriv_mse", "rollout_mse"}) {
            std::vector<double> vals;
            for (const ResultRow* r : members) vals.push_back(metric_of(*r, metric));
            SummaryRow s;
            s.group = key;
            s.metric = metric;
            s.stats = geometric_mean_ci(vals);
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<std::string> pipeline_method_names() {
    std::vector<std::string> names{"maat", "maat+nonneg", "maat+priors"};
    for (const auto& b : baseline_names()) names.push_back(b);
    return names;
}

PriorSpec method_priors(const std::string& method, const TimeSeriesDataset& dataset,
                        const SplitData& split, const PipelineConfig& config) {
    PriorSpec p; // derivative-magnitude penalty on by default
    if (method == "maat") return p;
    if (method == "maat+nonneg") {
        p.w_nonneg = config.nonneg_weight;
        return p;
    }
    if (method == "maat+priors") {
        p.w_nonneg = config.nonneg_weight;
        if (dataset.system.conserved_total) {
            p.w_conserve = config.conserve_weight;
            p.conserved_total = dataset.initial_total(split);
        }
        p.w_monotone = config.monotone_weight;
        if (dataset.system_name == "seir") {
            p.monotone = {{3, +1}, {0, -1}}; // R non-decreasing, S non-increasing
        } else if (dataset.system_name == "seirh") {
            p.monotone = {{4, +1}, {0, -1}};
        }
        return p;
    }
    throw InvalidInputError("method_priors: not a reconstruction method: " + method);
}

namespace {

bool is_maat_method(const std::string& method) { return method.rfind("maat", 0) == 0; }

// channel series reordered so column d carries the channel observing
// dimension d (only valid for full-selection operators)
Matrix channels_by_dimension(const SplitData& split, const ObservationOperator& obs) {
    Matrix out(split.signals.rows(), obs.state_dim());
    for (Index r = 0; r < obs.H.rows(); ++r) {
        Index dim = 0;
        for (Index c = 0; c < obs.H.cols(); ++c)
            if (obs.H(r, c) == 1.0) dim = c;
        out.col(dim) = split.signals.col(r);
    }
    return out;
}

Matrix true_derivatives(const TimeSeriesDataset& dataset, const SplitData& split) {
    Matrix out(split.truth.rows(), split.truth.cols());
    for (Index i = 0; i < split.truth.rows(); ++i)
        out.row(i) = dataset.system.field(split.truth.row(i).transpose()).transpose();
    return out;
}

} // namespace

// Classical estimators cannot fuse heterogeneous observations: they consume
// per-dimension dense channels when the operator is a full selection, and
// otherwise fall back to interpolating the sparse snapshots.
BaselineReconstruction reconstruct_with_baseline(const std::string& method,
                                                 const SplitData& split,
                                                 const ObservationOperator& obs) {
    BaselineEstimate est;
    if (obs.is_full_selection()) {
        est = run_baseline(method, split.times, channels_by_dimension(split, obs), split.times);
    } else if (method == "savgol" || method == "tvreg") {
        const BaselineEstimate lin =
            linear_interp(split.snapshot_times, split.snapshots, split.times);
        est = run_baseline(method, split.times, lin.states, split.times);
    } else {
        est = run_baseline(method, split.snapshot_times, split.snapshots, split.times);
    }
    return {est.states, est.derivs};
}

ResultRow run_pipeline(const TimeSeriesDataset& dataset, const std::string& method,
                       std::uint64_t seed, const PipelineConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();

    ResultRow row;
    row.dataset = dataset.system_name;
    row.noise = to_string(dataset.noise_kind);
    row.method = method;
    row.seed = seed;

    const SplitData& train = dataset.train;
    const SplitData& test = dataset.test;

    BaselineReconstruction recon_train, recon_test;
    if (is_maat_method(method)) {
        LengthScales scales;
        if (config.fixed_scales) {
            scales = *config.fixed_scales;
        } else {
            scales = sweep_length_scales(dataset, config.weights, PriorSpec::none(),
                                         config.sweep);
        }
        const PriorSpec train_priors = method_priors(method, dataset, train, config);
        const KernelModel model_train = fit_split(train, dataset.observation, scales,
                                                  config.weights, train_priors,
                                                  config.optimizer);
        const Evaluation ev_train = evaluate(model_train, train.times);
        recon_train = {ev_train.states, ev_train.derivs};

        const PriorSpec test_priors = method_priors(method, dataset, test, config);
        const KernelModel model_test = fit_split(test, dataset.observation, scales,
                                                 config.weights, test_priors, config.optimizer);
        const Evaluation ev_test = evaluate(model_test, test.times);
        recon_test = {ev_test.states, ev_test.derivs};
    } else {
        recon_train = reconstruct_with_baseline(method, train, dataset.observation);
        recon_test = reconstruct_with_baseline(method, test, dataset.observation);
    }

    row.state_mse = (recon_test.states - test.truth).squaredNorm() /
                    static_cast<double>(test.truth.size());
    const Matrix test_derivs = true_derivatives(dataset, test);
    row.deriv_mse = (recon_test.derivs - test_derivs).squaredNorm() /
                    static_cast<double>(test_derivs.size());
    row.negative_points = (recon_test.states.array() < -1e-3).count();

    // discovery on the train reconstruction, scored by rollout on the test split
    const FeatureLibrary lib = make_library(dataset.state_dim(), 2, true);
    const Matrix feats = build_features(recon_train.states, lib);
    const SparseDynamicsModel discovered = stls_fit(feats, recon_train.derivs, lib, config.stls);
    const double dt = test.times[1] - test.times[0];
    try {
        const Matrix traj =
            rollout(discovered, test.truth.row(0).transpose(), test.times[0], dt,
                    test.grid_size() - 1);
        row.rollout_mse =
            (traj - test.truth).squaredNorm() / static_cast<double>(test.truth.size());
        if (!std::isfinite(row.rollout_mse))
            row.rollout_mse = std::numeric_limits<double>::infinity();
    } catch (const IntegrationBlowupError&) {
        row.rollout_mse = std::numeric_limits<double>::infinity();
    }

    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return row;
}

void run_parallel(long n_jobs, int workers, const std::function<void(long)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, n_jobs));
    if (workers <= 1) {
        for (long i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct Cell {
    std::string system;
    NoiseKind noise;
    std::uint64_t seed;
};

ExperimentOutput run_cells(const ExperimentConfig& config,
                           const std::function<void(GenConfig&)>& presets,
                           const std::vector<std::string>& group_keys) {
    if (config.systems.empty()) throw ConfigError("experiment: no systems selected");
    if (config.methods.empty()) throw ConfigError("experiment: no methods selected");
    if (config.seeds.empty()) throw ConfigError("experiment: no seeds given");

    std::vector<Cell> cells;
    for (const auto& sys : config.systems)
        for (const auto& noise : config.noises)
            for (const auto seed : config.seeds)
                cells.push_back({sys, noise_kind_from_string(noise), seed});

    std::vector<std::vector<ResultRow>> blocks(cells.size());
    run_parallel(static_cast<long>(cells.size()), config.workers, [&](long i) {
        const Cell& cell = cells[static_cast<std::size_t>(i)];
        GenConfig gen = default_gen_config(cell.system);
        gen.noise.kind = cell.noise;
        gen.seed = cell.seed;
        if (presets) presets(gen);
        if (config.gen_mutator) config.gen_mutator(gen);
        const TimeSeriesDataset dataset = generate_dataset(cell.system, gen);

        PipelineConfig pipeline = config.pipeline;
        bool any_maat = false;
        for (const auto& m : config.methods) any_maat = any_maat || is_maat_method(m);
        if (any_maat && !pipeline.fixed_scales) {
            pipeline.fixed_scales = std::make_shared<LengthScales>(sweep_length_scales(
                dataset, pipeline.weights, PriorSpec::none(), pipeline.sweep));
        }
        for (const auto& m : config.methods)
            blocks[static_cast<std::size_t>(i)].push_back(
                run_pipeline(dataset, m, cell.seed, pipeline));
    });

    ExperimentOutput out;
    for (const auto& block : blocks)
        for (const auto& row : block) out.rows.push_back(row);
    out.summary = aggregate(out.rows, group_keys);
    return out;
}

} // namespace

ExperimentOutput run_noise_matrix(ExperimentConfig config) {
    if (config.systems.empty()) config.systems = {"seir", "seirh", "viral", "predprey"};
    if (config.methods.empty()) {
        config.methods = {"maat"};
        for (const auto& b : baseline_names()) config.methods.push_back(b);
    }
    return run_cells(config, nullptr, {"dataset", "noise", "method"});
}

ExperimentOutput run_nonneg_ablation(ExperimentConfig config) {
    if (config.systems.empty()) config.systems = {"seirh"};
    if (config.methods.empty()) config.methods = {"maat", "maat+nonneg"};
    return run_cells(config, nullptr, {"dataset", "method"});
}

ExperimentOutput run_priors_ablation(ExperimentConfig config) {
    if (config.systems.empty()) config.systems = {"seir", "seirh"};
    if (config.methods.empty()) config.methods = {"maat", "maat+priors"};
    // sparse-observability preset: only the infectious compartment is
    // densely observed and the snapshot sequence is thinned
    auto presets = [](GenConfig& gen) {
        gen.operator_kind = "select:2";
        gen.snapshot_stride = 3;
    };
    return run_cells(config, presets, {"dataset", "method"});
}

NoiseFloorResult run_fd_noise_floor(const NoiseFloorConfig& config) {
    NoiseFloorResult res;
    res.dts = config.dts;

    std::ostringstream table;
    table << "dt,n,fd_deriv_mse,analytic_floor\n";

    double num = 0.0, den = 0.0;
    for (double dt : config.dts) {
        Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(1.0 / dt));
        const long n = config.n_points;
        Vector t = Vector::LinSpaced(n, 0.0, dt * (n - 1));
        Matrix values(n, 1);
        for (long i = 0; i < n; ++i) values(i, 0) = 1.0 + config.sigma * rng.normal();

        const BaselineEstimate fd = finite_difference(t, values);
        const double mse = fd.derivs.squaredNorm() / static_cast<double>(n);
        res.fd_mse.push_back(mse);
        const double basis = config.sigma * config.sigma / (dt * dt);
        num += mse * basis;
        den += basis * basis;
        table << dt << "," << n << "," << mse << "," << 0.5 * basis << "\n";
    }
    res.fitted_c = num / den;

    // kernel reconstruction on the same kind of data
    auto maat_deriv_mse = [&](double dt) {
        Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(1.0 / dt));
        const long n = config.n_points;
        Vector t = Vector::LinSpaced(n, 0.0, dt * (n - 1));
        Matrix values(n, 1);
        for (long i = 0; i < n; ++i) values(i, 0) = 1.0 + config.sigma * rng.normal();
        const Matrix truth = Matrix::Ones(n, 1);
        const TimeSeriesDataset ds = make_direct_dataset(t, values, truth, 10);
        const LengthScales scales = sweep_length_scales(ds, config.pipeline.weights,
                                                        PriorSpec::none(),
                                                        config.pipeline.sweep);
        PriorSpec priors;
        const KernelModel model = fit_split(ds.train, ds.observation, scales,
                                            config.pipeline.weights, priors,
                                            config.pipeline.optimizer);
        const Evaluation ev = evaluate(model, t);
        return ev.derivs.squaredNorm() / static_cast<double>(n);
    };
    res.maat_mse = maat_deriv_mse(config.dts.back());
    res.maat_mse_coarse = maat_deriv_mse(config.dts.front());
    table << "# maat_deriv_mse_dt_" << config.dts.back() << "," << res.maat_mse << "\n";
    table << "# maat_deriv_mse_dt_" << config.dts.front() << "," << res.maat_mse_coarse << "\n";
    table << "# fitted_c," << res.fitted_c << "\n";
    res.table = table.str();
    return res;
}

LassoExperimentOutput run_lasso_experiment(const LassoExperimentConfig& config) {
    LassoExperimentOutput out;
    std::ostringstream table;
    table << "p,n,sigma,seed,test_mse,teacher_norm2\n";

    for (const Index p : config.p_grid)
        for (const Index n : config.n_grid)
            for (const double sigma : config.sigma_grid)
                for (int seed = 0; seed < config.seeds; ++seed) {
                    Rng rng = Rng::derive(
                        static_cast<std::uint64_t>(seed),
                        static_cast<std::uint64_t>(p * 1000003 + n * 1009 +
                                                   static_cast<long>(sigma * 1000)));
                    Vector w_star = Vector::Zero(p);
                    const Index s = std::min<Index>(config.sparsity, p);
                    // teacher support: s distinct coordinates
                    std::vector<Index> all(p);
                    for (Index i = 0; i < p; ++i) all[static_cast<std::size_t>(i)] = i;
                    for (Index i = 0; i < s; ++i) {
                        const Index j =
                            i + static_cast<Index>(rng.uniform() * static_cast<double>(p - i));
                        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
                        w_star[all[static_cast<std::size_t>(i)]] = rng.normal();
                    }
                    const double wnorm = w_star.norm();

                    Matrix x(n, p);
                    for (Index i = 0; i < n; ++i)
                        for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
                    Vector y = x * w_star;
                    for (Index i = 0; i < n; ++i) y[i] += sigma * wnorm * rng.normal();

                    const LassoResult fit = lasso_fit_validated(x, y);

                    const Index n_test = 1000;
                    Matrix xt(n_test, p);
                    for (Index i = 0; i < n_test; ++i)
                        for (Index j = 0; j < p; ++j) xt(i, j) = rng.normal();
                    const double test_mse = (xt * (fit.w - w_star)).squaredNorm() /
                                            static_cast<double>(n_test);

                    LassoCell cell{p, n, sigma, static_cast<std::uint64_t>(seed), test_mse,
                                   wnorm * wnorm};
                    out.cells.push_back(cell);
                    table << p << "," << n << "," << sigma << "," << seed << "," << test_mse
                          << "," << wnorm * wnorm << "\n";
                }
    out.table = table.str();
    return out;
}

} // namespace maat
