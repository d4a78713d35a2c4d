#ifndef MAAT_EVAL_HPP
#define MAAT_EVAL_HPP

#include "maat/common.hpp"
#include "maat/discovery.hpp"
#include "maat/dynamics.hpp"
#include "maat/reconstruction.hpp"

#include <map>
#include <string>
#include <vector>

namespace maat {

/// One pipeline run: reconstruct on the test split for state/derivative
/// scoring, discover dynamics from the train-split reconstruction, roll the
/// discovered model out over the test split.
struct ResultRow {
    std::string dataset;
    std::string noise;
    std::string method;
    std::uint64_t seed = 0;
    double state_mse = 0.0;   // test-split reconstruction vs. truth
    double deriv_mse = 0.0;   // test-split derivative estimate vs. f(truth)
    double rollout_mse = 0.0; // discovered-model trajectory vs. test truth
    long negative_points = 0; // test reconstruction entries below -1e-3
    double wall_time_s = 0.0; // informational; kept out of deterministic tables
};

struct GeoMeanCI {
    double geomean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    long n_used = 0;
    long n_excluded = 0;
};

/// exp(mean(log x)) with a 95% normal-approximation CI on the logs.
/// Non-positive values are excluded (and counted); infinities propagate.
GeoMeanCI geometric_mean_ci(const std::vector<double>& values);

struct SummaryRow {
    std::vector<std::string> group; // values of the grouping keys, in order
    std::string metric;
    GeoMeanCI stats;
};

/// Group rows by the given keys (subset of dataset | noise | method) and
/// aggregate each MSE metric.
std::vector<SummaryRow> aggregate(const std::vector<ResultRow>& rows,
                                  const std::vector<std::string>& group_keys);

/// How each pipeline stage is configured; defaults follow the shipped
/// hyperparameters throughout.
struct PipelineConfig {
    LossWeights weights;
    OptimizerConfig optimizer;
    SweepConfig sweep;
    StlsConfig stls;
    double nonneg_weight = 1.0;
    double conserve_weight = 1.0;
    double monotone_weight = 1.0;
    /// When set, the sweep is skipped and these scales are used; experiment
    /// cells share one sweep across method arms.
    std::shared_ptr<const LengthScales> fixed_scales;
};

std::vector<std::string> pipeline_method_names(); // maat, maat+nonneg, maat+priors + baselines

/// Priors for a MAAT method variant on a given dataset (conservation target
/// and monotone dimensions come from the system).
PriorSpec method_priors(const std::string& method, const TimeSeriesDataset& dataset,
                        const SplitData& split, const PipelineConfig& config);

/// A classical estimator applied under the pipeline's observability
/// convention: per-dimension dense channels when the operator is a full
/// selection, snapshot interpolation otherwise (grid-bound smoothers read
/// the snapshots through a linear resampling onto the dense grid).
struct BaselineReconstruction {
    Matrix states;
    Matrix derivs;
};
BaselineReconstruction reconstruct_with_baseline(const std::string& method,
                                                 const SplitData& split,
                                                 const ObservationOperator& obs);

ResultRow run_pipeline(const TimeSeriesDataset& dataset, const std::string& method,
                       std::uint64_t seed, const PipelineConfig& config = {});

struct ExperimentOutput {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;
    std::map<std::string, std::string> tables; // extra named CSV documents
};

struct ExperimentConfig {
    std::vector<std::string> systems;
    std::vector<std::string> noises{"gaussian", "ar1", "student-t"};
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    PipelineConfig pipeline;
    /// Applied to each cell's generation config after system defaults and
    /// the experiment's own presets (CLI flag overrides land here).
    std::function<void(GenConfig&)> gen_mutator;
    int workers = 0; // 0 -> hardware concurrency
};

/// Noise-structure comparison (MAAT vs. classical pipelines).
ExperimentOutput run_noise_matrix(ExperimentConfig config);
/// Plain vs. non-negativity-constrained reconstruction.
ExperimentOutput run_nonneg_ablation(ExperimentConfig config);
/// Plain vs. conservation + non-negativity + monotonicity priors under
/// sparse observability.
ExperimentOutput run_priors_ablation(ExperimentConfig config);

struct NoiseFloorConfig {
    std::vector<double> dts{0.1, 0.05, 0.02, 0.01};
    long n_points = 500;
    double sigma = 0.1;
    std::uint64_t seed = 0;
    PipelineConfig pipeline;
};

struct NoiseFloorResult {
    std::vector<double> dts;
    std::vector<double> fd_mse;
    double fitted_c = 0.0;    // fd_mse ~ c sigma^2 / dt^2
    double maat_mse = 0.0;    // reconstruction derivative MSE at the finest step
    double maat_mse_coarse = 0.0; // same at the coarsest step
    std::string table;        // CSV
};

/// Finite-difference derivative noise floor against the kernel
/// reconstruction on the same noisy constant signal.
NoiseFloorResult run_fd_noise_floor(const NoiseFloorConfig& config = {});

struct LassoExperimentConfig {
    std::vector<Index> p_grid{100};
    std::vector<Index> n_grid{50, 120, 200};
    std::vector<double> sigma_grid{0.0, 0.5};
    Index sparsity = 5;
    int seeds = 20;
};

struct LassoCell {
    Index p = 0;
    Index n = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double test_mse = 0.0;
    double teacher_norm2 = 0.0;
};

struct LassoExperimentOutput {
    std::vector<LassoCell> cells;
    std::string table; // CSV
};

/// Sparse-recovery sample-complexity sweep: teacher y = x'w* + sigma ||w*|| eps,
/// ISTA fit with validated regularization, noiseless test MSE per cell.
LassoExperimentOutput run_lasso_experiment(const LassoExperimentConfig& config = {});

/// Run fn(0..n_jobs-1) on a bounded worker pool; results are collected by
/// job index so output order never depends on scheduling.
void run_parallel(long n_jobs, int workers, const std::function<void(long)>& fn);

} // namespace maat

#endif
