#ifndef MAAT_BASELINES_HPP
#define MAAT_BASELINES_HPP

#include "maat/common.hpp"

#include <string>
#include <vector>

namespace maat {

/// A classical estimator's states and derivatives on a query grid.
struct BaselineEstimate {
    std::string method;
    Vector times;
    Matrix states;
    Matrix derivs;
};

/// Central differences at interior points, one-sided first order at the
/// ends; states pass through unchanged. Needs >= 3 points.
BaselineEstimate finite_difference(const Vector& times, const Matrix& values);

/// Local least-squares polynomial smoothing on a uniform grid with
/// mirror padding at the boundaries; derivative from the fitted polynomial.
BaselineEstimate savitzky_golay(const Vector& times, const Matrix& values, int window = 25,
                                int order = 3);

/// Natural cubic spline interpolant with analytic derivative. Needs >= 4
/// points. `query` defaults to the knots.
BaselineEstimate cubic_spline(const Vector& times, const Matrix& values,
                              const Vector& query = Vector());

BaselineEstimate linear_interp(const Vector& times, const Matrix& values,
                               const Vector& query = Vector());

/// Multiquadric RBF interpolation; the shape parameter is picked from
/// factors * (1 / sqrt(Var(times))) by leave-one-out error, derivatives by
/// central differences with step 1e-3 * median spacing.
BaselineEstimate rbf_interp(const Vector& times, const Matrix& values,
                            const std::vector<double>& epsilon_factors = {0.25, 0.5, 1.0, 2.0,
                                                                          4.0},
                            const Vector& query = Vector());

/// TVRegDiff stand-in: Savitzky-Golay with window 21, order 3.
BaselineEstimate tvregdiff_proxy(const Vector& times, const Matrix& values);

struct KalmanDetail {
    Matrix innovations;       // N x D forward-filter innovations
    Matrix filtered_pos_var;  // N x D
    Matrix smoothed_pos_var;  // N x D
};

/// Constant-velocity Kalman filter + RTS smoother per dimension; states
/// from smoothed positions, derivatives from smoothed velocities.
/// Process covariance is the white-noise-acceleration form
/// q * [[dt^3/3, dt^2/2], [dt^2/2, dt]], measurement variance r.
BaselineEstimate kalman_rts(const Vector& times, const Matrix& values, double q = 1.0,
                            double r = 0.1, KalmanDetail* detail = nullptr);

/// Evaluate a baseline by name: fd | savgol | spline | linear | rbf |
/// tvreg | kalman. Interpolating methods evaluate on `query` when given.
BaselineEstimate run_baseline(const std::string& method, const Vector& times,
                              const Matrix& values, const Vector& query = Vector());

std::vector<std::string> baseline_names();

} // namespace maat

#endif
