#ifndef MAAT_LASSO_HPP
#define MAAT_LASSO_HPP

#include "maat/common.hpp"

#include <vector>

namespace maat {

struct LassoResult {
    Vector w;
    long iterations = 0;
    bool converged = false;
    double lambda = 0.0;
};

/// L1-regularized least squares, objective (1/2n)||Xw - y||^2 + lambda ||w||_1,
/// solved by proximal gradient (ISTA) with backtracking line search.
LassoResult lasso_ista(const Matrix& X, const Vector& y, double lambda,
                       long max_iterations = 5000, double tolerance = 1e-9);

/// Smallest lambda that zeroes every coefficient.
double lasso_lambda_max(const Matrix& X, const Vector& y);

/// Fit with lambda chosen on a held-out validation block (last fifth of the
/// rows) from a small geometric grid under lambda_max, then refit on all
/// rows with the winner.
LassoResult lasso_fit_validated(const Matrix& X, const Vector& y,
                                const std::vector<double>& lambda_fractions = {
                                    3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4});

} // namespace maat

#endif
