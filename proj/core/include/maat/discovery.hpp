#ifndef MAAT_DISCOVERY_HPP
#define MAAT_DISCOVERY_HPP

#include "maat/common.hpp"
#include "maat/dynamics.hpp"

#include <string>
#include <vector>

namespace maat {

/// Multivariate monomial dictionary up to max_degree; descriptors are
/// exponent multi-indices in graded order (degree, then leading variables
/// first), matching 1, x1, x2, x1^2, x1 x2, x2^2 for D = 2, degree 2.
struct FeatureLibrary {
    int max_degree = 2;
    bool include_bias = true;
    std::vector<std::vector<int>> exponents;

    Index feature_count() const { return static_cast<Index>(exponents.size()); }
    std::string feature_name(Index p, const std::vector<std::string>& state_names) const;
};

FeatureLibrary make_library(Index state_dim, int max_degree = 2, bool include_bias = true);

/// Evaluate every library monomial row-wise: N x P.
Matrix build_features(const Matrix& states, const FeatureLibrary& library);

struct SparseDynamicsModel {
    FeatureLibrary library;
    Matrix xi; // P x D, masked-out entries exactly zero
    std::vector<std::string> diagnostics;

    Index state_dim() const { return xi.cols(); }
    std::vector<std::vector<Index>> support() const;
    Vector rhs(const Vector& state) const;
};

struct StlsConfig {
    double threshold = 0.1;
    double decay = 0.9; // threshold at outer iteration k is threshold * decay^k
    int max_iterations = 20;
    double ridge = 1e-10;
};

/// Sequentially thresholded least squares per target column: ridge solve,
/// zero out small coefficients against the geometrically decaying
/// threshold, refit on the surviving support until stable. If every
/// feature of a column is eliminated the column stays zero and a
/// diagnostic is recorded instead of an error.
SparseDynamicsModel stls_fit(const Matrix& features, const Matrix& targets,
                             const FeatureLibrary& library, const StlsConfig& config = {});

/// RK4 integration of the discovered field. Instability is reported as an
/// integration error tagged with "discovered-model-unstable".
Matrix rollout(const SparseDynamicsModel& model, const Vector& x0, double t0, double dt,
               long steps);

/// Human-readable equations, e.g. "dS/dt = -0.300*S*I".
std::string format_equations(const SparseDynamicsModel& model,
                             const std::vector<std::string>& state_names = {});

} // namespace maat

#endif
