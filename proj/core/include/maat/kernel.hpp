#ifndef MAAT_KERNEL_HPP
#define MAAT_KERNEL_HPP

#include "maat/common.hpp"

#include <vector>

namespace maat {

struct TimeSeriesDataset; // dynamics.hpp
struct LossWeights;       // reconstruction.hpp
struct PriorSpec;         // reconstruction.hpp

/// One Gaussian length-scale per state dimension, in time units.
struct LengthScales {
    Vector sigma;

    Index dim() const { return sigma.size(); }
    void validate() const;
};

/// Kernel values K and their time derivatives Kdot (with respect to the
/// first time argument), both N_eval x N_center.
struct GramPair {
    Matrix K;
    Matrix Kdot;
};

/// Gaussian RBF kappa(t, t') = exp(-(t - t')^2 / (2 sigma^2)).
double rbf_kernel(double t, double t_center, double sigma);

/// d/dt kappa(t, t') = -(t - t') / sigma^2 * kappa(t, t').
double rbf_kernel_dt(double t, double t_center, double sigma);

GramPair gram(const Vector& eval_times, const Vector& center_times, double sigma);

struct SweepConfig {
    std::vector<double> factors{0.25, 0.5, 1.0, 2.0, 4.0};
    int steps_per_candidate = 200;
};

/// Coordinate-wise multiplicative-factor sweep for the per-dimension
/// length-scales. Each sigma_d starts at sqrt(Var(train time grid)); for
/// every candidate factor a short reconstruction is trained and the factor
/// with the lowest held-out snapshot MSE is kept (ties resolved toward the
/// factor closest to 1). A single pass in dimension order.
LengthScales sweep_length_scales(const TimeSeriesDataset& dataset,
                                 const SweepConfig& config = {});
LengthScales sweep_length_scales(const TimeSeriesDataset& dataset,
                                 const LossWeights& weights, const PriorSpec& priors,
                                 const SweepConfig& config);

/// sqrt(Var(times)); the sweep initialization.
double initial_length_scale(const Vector& times);

} // namespace maat

#endif
