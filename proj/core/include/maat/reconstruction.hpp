#ifndef MAAT_RECONSTRUCTION_HPP
#define MAAT_RECONSTRUCTION_HPP

#include "maat/common.hpp"
#include "maat/dynamics.hpp"
#include "maat/kernel.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace maat {

/// A known (or hypothesized) vector field used by the prior-dynamics
/// penalty, with its Jacobian for exact gradients.
struct VectorField {
    std::function<Vector(const Vector&)> value;
    std::function<Matrix(const Vector&)> jacobian;
};

/// Wrap an ODE system (with its own parameters) as a prior field.
VectorField field_from_system(const OdeSystem& system);

struct LossWeights {
    double w_snapshot = 1.0;
    double w_signal = 1.0;
    double lambda = 1e-6; // Frobenius ridge on the coefficients

    void validate() const;
};

/// Knowledge penalties added to the reconstruction objective. All weights
/// default to off except the derivative-deviation weight gamma.
struct PriorSpec {
    double gamma = 1e-3;                        // || Kdot U - F(K U) ||^2 weight
    std::shared_ptr<const VectorField> prior_field; // null encodes F = 0
    double w_nonneg = 0.0;                      // squared hinge on min(xhat, 0)
    double w_conserve = 0.0;
    double conserved_total = 0.0;               // target for sum_d xhat_d(t)
    std::vector<std::pair<Index, int>> monotone; // (dimension, sign in {+1,-1})
    double w_monotone = 0.0;

    void validate(Index state_dim) const;
    static PriorSpec none();
};

struct OptimizerConfig {
    double learning_rate = 1.0;
    double beta1 = 0.99;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long max_iterations = 20000;
    long patience = 2000; // early-stopping patience on held-out loss
    std::function<void(long iteration, double training_loss)> iteration_callback;
};

/// Precomputed per-dimension Gram matrices for one split and one set of
/// length-scales. Every fifth snapshot and every fifth signal row are held
/// out of the training terms and form the early-stopping/validation loss.
class LossContext {
  public:
    LossContext(const SplitData& split, const ObservationOperator& obs,
                const LengthScales& scales, bool hold_out_validation = true);

    double loss(const Matrix& U, const LossWeights& weights, const PriorSpec& priors) const;
    Matrix gradient(const Matrix& U, const LossWeights& weights, const PriorSpec& priors) const;
    /// Loss and gradient in one pass (the optimizer's hot path).
    double loss_and_gradient(const Matrix& U, const LossWeights& weights,
                             const PriorSpec& priors, Matrix& grad) const;
    /// Snapshot + signal fidelity on the held-out rows; priors excluded.
    double validation_loss(const Matrix& U, const LossWeights& weights) const;
    /// MSE of the reconstruction against held-out snapshot values.
    double validation_snapshot_mse(const Matrix& U) const;

    Index centers() const { return centers_.size(); }
    Index state_dim() const { return dim_; }
    const Vector& center_times() const { return centers_; }
    bool has_validation() const {
        return val_snapshot_values_.rows() > 0 || val_signal_values_.rows() > 0;
    }
    bool has_validation_snapshots() const { return val_snapshot_values_.rows() > 0; }

  private:
    double loss_impl(const Matrix& U, const LossWeights& weights, const PriorSpec& priors,
                     Matrix* grad) const;

    Index dim_;
    Vector centers_;
    Matrix H_;
    // training terms
    std::vector<GramPair> signal_gram_;   // per dim, N_fit x N_centers
    std::vector<Matrix> snapshot_gram_;   // per dim, M_fit x N_centers
    Matrix signal_values_;                // N_fit x S
    Matrix snapshot_values_;              // M_fit x D
    // held-out terms
    std::vector<Matrix> val_signal_gram_;
    std::vector<Matrix> val_snapshot_gram_;
    Matrix val_signal_values_;
    Matrix val_snapshot_values_;

    void accumulate_states(const Matrix& U, Matrix& states, Matrix& derivs) const;
};

/// The reconstructed trajectory: per-dimension Gaussian length-scales, a
/// shared center grid, and the learned coefficient matrix.
struct KernelModel {
    LengthScales length_scales;
    Vector centers;
    Matrix coeffs; // N_centers x D

    Index state_dim() const { return coeffs.cols(); }
    void validate() const;
};

/// Composite reconstruction loss: snapshot fidelity, signal fidelity
/// through the observation operator, derivative deviation from the prior
/// field, coefficient ridge, and the optional non-negativity /
/// conservation / monotonicity penalties.
double composite_loss(const Matrix& U, const SplitData& split, const ObservationOperator& obs,
                      const LengthScales& scales, const LossWeights& weights,
                      const PriorSpec& priors);

/// Exact gradient of composite_loss with respect to U. Hinge-style terms
/// are squared, so the gradient is continuous with value 0 at the kink.
Matrix composite_loss_gradient(const Matrix& U, const SplitData& split,
                               const ObservationOperator& obs, const LengthScales& scales,
                               const LossWeights& weights, const PriorSpec& priors);

struct FitReport {
    long iterations = 0;
    long best_iteration = 0;
    double best_validation_loss = 0.0;
    double final_training_loss = 0.0;
    LengthScales scales;
};

/// Fit coefficients for one split with Adam (bias-corrected) and early
/// stopping on the held-out loss; deterministic, U starts at zero.
KernelModel fit_split(const SplitData& split, const ObservationOperator& obs,
                      const LengthScales& scales, const LossWeights& weights,
                      const PriorSpec& priors, const OptimizerConfig& config = {},
                      FitReport* report = nullptr);

/// Full training protocol on the dataset's train split: coordinate sweep
/// for the length-scales, then the main fit.
KernelModel fit(const TimeSeriesDataset& dataset, const LossWeights& weights,
                const PriorSpec& priors, const OptimizerConfig& config = {},
                FitReport* report = nullptr);

struct Evaluation {
    Matrix states;
    Matrix derivs;
};

/// states = K(times, centers) U and derivs = Kdot(times, centers) U.
Evaluation evaluate(const KernelModel& model, const Vector& times);

struct Lemma1Bounds {
    double lower = 0.0;
    double risk = 0.0;
    double upper = 0.0;
};

/// Calibrated-surrogate sandwich: ||x - xhat||^2 <= risk <= (1 + ||H||^2)
/// ||x - xhat||^2 with risk = ||x - xhat||^2 + ||H (x - xhat)||^2, all in
/// discrete (trapezoidal) quadrature over the sample grid.
Lemma1Bounds lemma1_bounds(const Matrix& x_true, const Matrix& x_hat,
                           const ObservationOperator& obs,
                           const Vector& times = Vector());

} // namespace maat

#endif
