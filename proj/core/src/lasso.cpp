#include "maat/lasso.hpp"

#include <cmath>
#include <limits>

namespace maat {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

} // namespace

LassoResult lasso_ista(const Matrix& X, const Vector& y, double lambda, long max_iterations,
                       double tolerance) {
    if (X.rows() != y.size()) throw InvalidInputError("lasso_ista: row count mismatch");
    if (lambda < 0.0) throw InvalidParameterError("lasso_ista: lambda must be >= 0");

    const double inv_n = 1.0 / static_cast<double>(X.rows());
    // Gram form keeps iterations O(p^2) regardless of the sample count
    const Matrix xtx = X.transpose() * X;
    const Vector xty = X.transpose() * y;
    const double yty = y.squaredNorm();
    auto smooth = [&](const Vector& w) {
        return 0.5 * inv_n * (w.dot(xtx * w) - 2.0 * w.dot(xty) + yty);
    };

    LassoResult res;
    res.lambda = lambda;
    res.w = Vector::Zero(X.cols());

    double step = 1.0;
    double f = smooth(res.w);
    for (long it = 1; it <= max_iterations; ++it) {
        const Vector grad = inv_n * (xtx * res.w - xty);

        // backtracking on the smooth part's quadratic model
        Vector next;
        double f_next;
        for (;;) {
            next = res.w - step * grad;
            for (Index j = 0; j < next.size(); ++j)
                next[j] = soft_threshold(next[j], step * lambda);
            f_next = smooth(next);
            const Vector d = next - res.w;
            const double model = f + grad.dot(d) + d.squaredNorm() / (2.0 * step);
            if (f_next <= model + 1e-15 || step < 1e-12) break;
            step *= 0.5;
        }

        const double move = (next - res.w).lpNorm<Eigen::Infinity>();
        res.w = next;
        f = f_next;
        res.iterations = it;
        if (move <= tolerance * std::max(1.0, res.w.lpNorm<Eigen::Infinity>())) {
            res.converged = true;
            break;
        }
    }
    return res;
}

double lasso_lambda_max(const Matrix& X, const Vector& y) {
    return (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

LassoResult lasso_fit_validated(const Matrix& X, const Vector& y,
                                const std::vector<double>& lambda_fractions) {
    const Index n = X.rows();
    if (n < 5) return lasso_ista(X, y, 0.0);
    const Index n_val = n / 5;
    const Index n_fit = n - n_val;
    const Matrix xf = X.topRows(n_fit);
    const Vector yf = y.head(n_fit);
    const Matrix xv = X.bottomRows(n_val);
    const Vector yv = y.tail(n_val);

    const double lmax = lasso_lambda_max(xf, yf);
    double best_lambda = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    for (double frac : lambda_fractions) {
        const double lambda = frac * lmax;
        const LassoResult r = lasso_ista(xf, yf, lambda);
        const double val = (xv * r.w - yv).squaredNorm() / static_cast<double>(n_val);
        if (val < best_val) {
            best_val = val;
            best_lambda = lambda;
        }
    }
    return lasso_ista(X, y, best_lambda);
}

} // namespace maat
