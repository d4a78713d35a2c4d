#ifndef MAAT_DYNAMICS_HPP
#define MAAT_DYNAMICS_HPP

#include "maat/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace maat {

/// An autonomous first-order ODE system x' = f(x) with nominal initial
/// state and parameters. The Jacobian is analytic for the shipped systems
/// (needed by the prior-dynamics penalty).
struct OdeSystem {
    std::string name;
    Index dim = 0;
    Vector nominal_initial_state;
    Vector params;
    std::vector<std::string> param_names;
    std::vector<std::string> state_names;
    std::function<Vector(const Vector&, const Vector&)> field_fn;    // (state, params)
    std::function<Matrix(const Vector&, const Vector&)> jacobian_fn; // (state, params)
    std::optional<double> conserved_total;                           // sum of IC when mass-conserving
    std::string default_operator;                                    // observation channels used by default

    Vector field(const Vector& state) const { return field_fn(state, params); }
    Matrix jacobian(const Vector& state) const { return jacobian_fn(state, params); }
    OdeSystem with_params(const Vector& p) const;
};

/// Right-hand sides of the shipped systems. Parameter layout follows
/// param_names of the corresponding registry entry.
Vector seir_field(const Vector& state, const Vector& params);          // {beta, sigma, gamma, N}
Vector seirh_field(const Vector& state, const Vector& params);         // {beta, sigma, gamma, delta, gamma_h, N}
Vector viral_field(const Vector& state, const Vector& params);         // {beta, k, delta, p, c}
Vector predator_prey_field(const Vector& state, const Vector& params); // {alpha, beta, delta, gamma}

/// Registry lookup by name: seir | seirh | viral | predprey.
OdeSystem make_system(const std::string& name);
std::vector<std::string> system_names();

/// Classical fixed-step RK4. Row k of the result is the state at t0 + k*dt.
Matrix rk4_integrate(const OdeSystem& system, const Vector& x0, double t0, double dt,
                     long steps);
Matrix rk4_integrate(const std::function<Vector(const Vector&)>& field, const Vector& x0,
                     double t0, double dt, long steps);

/// Linear map from latent state to observed channels (S x D).
struct ObservationOperator {
    Matrix H;
    std::vector<std::string> channel_labels;

    Index channels() const { return H.rows(); }
    Index state_dim() const { return H.cols(); }
    /// Largest singular value.
    double operator_norm() const;
    /// True when H is a permutation of identity rows covering every state
    /// dimension exactly once, i.e. channel series map one-to-one onto
    /// state series and classical smoothers can consume them directly.
    bool is_full_selection() const;
    void validate() const;
};

/// kind: "identity" | "select:<i,j,...>" | "sum-all" | "mixing" (rows given
/// explicitly via the mixing argument).
ObservationOperator make_observation_operator(const std::string& kind, Index state_dim,
                                              const Matrix& mixing = Matrix());

enum class NoiseKind { isotropic_gaussian, correlated_ar1, student_t };

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind kind);

struct NoiseModel {
    NoiseKind kind = NoiseKind::isotropic_gaussian;
    // In a generation config a negative scale means "derive from the data"
    // (0.05 * mean |state|); apply_noise itself requires scale >= 0 and
    // treats 0 as noiseless.
    double scale = 0.0;
    double ar1_alpha = 0.8;
    int student_nu = 5;

    void validate() const;
};

/// Adds noise with stationary per-entry standard deviation model.scale.
/// AR(1) correlates along time within each channel; Student-t draws are
/// rescaled so the variance matches the Gaussian case.
Matrix apply_noise(const Matrix& clean, const NoiseModel& model, std::uint64_t rng_seed);

/// One trajectory's observations: a dense uniform grid carrying the
/// aggregated signals, a sparse subset of grid points carrying full-state
/// snapshots, and the ground truth used only for scoring.
struct SplitData {
    Vector times;            // dense grid, strictly increasing
    Matrix signals;          // N x S
    Vector snapshot_times;   // M, subset of times
    std::vector<Index> snapshot_indices;
    Matrix snapshots;        // M x D
    Matrix truth;            // N x D

    Index grid_size() const { return times.size(); }
    Index state_dim() const { return truth.cols(); }
    void validate() const;
};

struct GenConfig {
    double dt = 0.2;
    long n_train = 500;
    long n_val = 200;
    long n_test = 200;
    NoiseModel noise;
    std::string operator_kind; // empty -> system default
    std::uint64_t seed = 0;
    double param_jitter = 0.05;
    double ic_jitter = 0.10;
    int snapshot_stride = 1;     // keep every k-th snapshot (sparse-observability studies)
    bool noisy_snapshots = true; // snapshots carry the same noise model as signals
};

/// Per-system defaults (grid sizes, step, observation channels).
GenConfig default_gen_config(const std::string& system_name);

struct TimeSeriesDataset {
    std::string system_name;
    OdeSystem system; // with the jittered parameters actually used
    ObservationOperator observation;
    NoiseKind noise_kind = NoiseKind::isotropic_gaussian;
    GenConfig config;
    double noise_scale_train = 0.0, noise_scale_val = 0.0, noise_scale_test = 0.0;
    SplitData train, val, test;

    Index state_dim() const { return system.dim; }
    const SplitData& split(const std::string& name) const;
    /// Sum of the split's initial condition; the conservation prior target.
    double initial_total(const SplitData& s) const { return s.truth.row(0).sum(); }
};

/// Deterministic dataset generation per (system, config, seed): parameters
/// jittered once, a fresh jittered initial condition per split, RK4 truth,
/// noisy signals through the observation operator, round(1.5 sqrt(N))
/// evenly spaced snapshots.
TimeSeriesDataset generate_dataset(const OdeSystem& system, const GenConfig& config);
TimeSeriesDataset generate_dataset(const std::string& system_name, const GenConfig& config);

/// Count rule for snapshots on an n-point split.
long snapshot_count(long n_points);

/// Assemble a dataset directly from one observed series (used by the
/// noise-floor experiment and the CLI's CSV path): signals are the series
/// through H = identity, snapshots every `snapshot_every` points, truth as
/// given.
TimeSeriesDataset make_direct_dataset(const Vector& times, const Matrix& values,
                                      const Matrix& truth, long snapshot_every);

} // namespace maat

#endif
