#include "maat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maat {

namespace {

void check_times(const Vector& times, Index min_points, const char* who) {
    if (times.size() < min_points)
        throw InvalidInputError(std::string(who) + ": need >= " + std::to_string(min_points) +
                                " points");
    for (Index i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw InvalidInputError(std::string(who) + ": times must be strictly increasing");
}

double uniform_step(const Vector& times, const char* who) {
    const double dt = times[1] - times[0];
    for (Index i = 1; i + 1 < times.size(); ++i)
        if (std::abs((times[i + 1] - times[i]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
            throw InvalidInputError(std::string(who) + ": requires a uniform grid");
    return dt;
}

// locate the interval with t in [times[i], times[i+1])
Index interval_of(const Vector& times, double t) {
    const Index n = times.size();
    if (t <= times[0]) return 0;
    if (t >= times[n - 1]) return n - 2;
    Index lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        const Index mid = (lo + hi) / 2;
        if (times[mid] <= t)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

// piecewise-linear resampling of states and derivatives onto a query grid,
// used for the methods that are only defined on their input grid
BaselineEstimate resample(const BaselineEstimate& est, const Vector& query) {
    if (query.size() == 0 ||
        (query.size() == est.times.size() && (query.array() == est.times.array()).all()))
        return est;
    BaselineEstimate out;
    out.method = est.method;
    out.times = query;
    out.states.resize(query.size(), est.states.cols());
    out.derivs.resize(query.size(), est.derivs.cols());
    for (Index i = 0; i < query.size(); ++i) {
        const Index k = interval_of(est.times, query[i]);
        const double h = est.times[k + 1] - est.times[k];
        const double a = (query[i] - est.times[k]) / h;
        out.states.row(i) = (1.0 - a) * est.states.row(k) + a * est.states.row(k + 1);
        out.derivs.row(i) = (1.0 - a) * est.derivs.row(k) + a * est.derivs.row(k + 1);
    }
    return out;
}

} // namespace

BaselineEstimate finite_difference(const Vector& times, const Matrix& values) {
    check_times(times, 3, "finite_difference");
    if (values.rows() != times.size())
        throw InvalidInputError("finite_difference: row count mismatch");
    const Index n = times.size();
    BaselineEstimate out;
    out.method = "fd";
    out.times = times;
    out.states = values;
    out.derivs.resize(n, values.cols());
    out.derivs.row(0) = (values.row(1) - values.row(0)) / (times[1] - times[0]);
    for (Index i = 1; i + 1 < n; ++i)
        out.derivs.row(i) = (values.row(i + 1) - values.row(i - 1)) / (times[i + 1] - times[i - 1]);
    out.derivs.row(n - 1) = (values.row(n - 1) - values.row(n - 2)) / (times[n - 1] - times[n - 2]);
    return out;
}

BaselineEstimate savitzky_golay(const Vector& times, const Matrix& values, int window,
                                int order) {
    check_times(times, 2, "savitzky_golay");
    if (values.rows() != times.size())
        throw InvalidInputError("savitzky_golay: row count mismatch");
    if (window % 2 == 0 || window <= order)
        throw InvalidInputError("savitzky_golay: window must be odd and exceed the order");
    const double dt = uniform_step(times, "savitzky_golay");

    const int m = window / 2;
    Matrix a(window, order + 1);
    for (int k = 0; k < window; ++k) {
        double p = 1.0;
        for (int q = 0; q <= order; ++q) {
            a(k, q) = p;
            p *= static_cast<double>(k - m);
        }
    }
    // rows 0 and 1 of the pseudo-inverse give the smoothing and derivative
    // convolution weights at the window center
    const Matrix pinv = (a.transpose() * a).ldlt().solve(a.transpose());
    const Vector c0 = pinv.row(0);
    const Vector c1 = pinv.row(1);

    const Index n = times.size();
    auto reflect = [n](Index p) {
        while (p < 0 || p >= n) {
            if (p < 0) p = -p;
            if (p >= n) p = 2 * (n - 1) - p;
        }
        return p;
    };

    BaselineEstimate out;
    out.method = "savgol";
    out.times = times;
    out.states = Matrix::Zero(n, values.cols());
    out.derivs = Matrix::Zero(n, values.cols());
    for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < window; ++k) {
            const Index src = reflect(i + k - m);
            out.states.row(i) += c0[k] * values.row(src);
            out.derivs.row(i) += c1[k] * values.row(src);
        }
        out.derivs.row(i) /= dt;
    }
    return out;
}

BaselineEstimate tvregdiff_proxy(const Vector& times, const Matrix& values) {
    BaselineEstimate out = savitzky_golay(times, values, 21, 3);
    out.method = "tvreg";
    return out;
}

namespace {

struct NaturalSpline {
    Vector t, y, m2; // second derivatives, zero at the ends

    double value(double x) const {
        const Index i = interval_of(t, x);
        const double h = t[i + 1] - t[i];
        const double a = (t[i + 1] - x) / h;
        const double b = (x - t[i]) / h;
        return a * y[i] + b * y[i + 1] +
               ((a * a * a - a) * m2[i] + (b * b * b - b) * m2[i + 1]) * h * h / 6.0;
    }
    double deriv(double x) const {
        const Index i = interval_of(t, x);
        const double h = t[i + 1] - t[i];
        const double a = (t[i + 1] - x) / h;
        const double b = (x - t[i]) / h;
        return (y[i + 1] - y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m2[i] +
               (3.0 * b * b - 1.0) / 6.0 * h * m2[i + 1];
    }
};

NaturalSpline build_natural_spline(const Vector& times, const Vector& y) {
    const Index n = times.size();
    NaturalSpline s;
    s.t = times;
    s.y = y;
    s.m2 = Vector::Zero(n);
    const Index sys = n - 2;
    if (sys <= 0) return s;
    Vector diag(sys), rhs(sys), lower(sys), upper(sys);
    for (Index i = 0; i < sys; ++i) {
        const double h0 = times[i + 1] - times[i];
        const double h1 = times[i + 2] - times[i + 1];
        lower[i] = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0;
    }
    // Thomas algorithm
    for (Index i = 1; i < sys; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    s.m2[sys] = rhs[sys - 1] / diag[sys - 1];
    for (Index i = sys - 2; i >= 0; --i)
        s.m2[i + 1] = (rhs[i] - upper[i] * s.m2[i + 2]) / diag[i];
    return s;
}

} // namespace

BaselineEstimate cubic_spline(const Vector& times, const Matrix& values, const Vector& query) {
    check_times(times, 4, "cubic_spline");
    if (values.rows() != times.size()) throw InvalidInputError("cubic_spline: row count mismatch");
    const Vector& q = query.size() > 0 ? query : times;
    BaselineEstimate out;
    out.method = "spline";
    out.times = q;
    out.states.resize(q.size(), values.cols());
    out.derivs.resize(q.size(), values.cols());
    for (Index d = 0; d < values.cols(); ++d) {
        const NaturalSpline s = build_natural_spline(times, values.col(d));
        for (Index i = 0; i < q.size(); ++i) {
            out.states(i, d) = s.value(q[i]);
            out.derivs(i, d) = s.deriv(q[i]);
        }
    }
    return out;
}

BaselineEstimate linear_interp(const Vector& times, const Matrix& values, const Vector& query) {
    check_times(times, 2, "linear_interp");
    if (values.rows() != times.size()) throw InvalidInputError("linear_interp: row count mismatch");
    const Vector& q = query.size() > 0 ? query : times;
    BaselineEstimate out;
    out.method = "linear";
    out.times = q;
    out.states.resize(q.size(), values.cols());
    out.derivs.resize(q.size(), values.cols());
    for (Index i = 0; i < q.size(); ++i) {
        const Index k = interval_of(times, q[i]);
        const double h = times[k + 1] - times[k];
        const double a = (q[i] - times[k]) / h;
        out.states.row(i) = (1.0 - a) * values.row(k) + a * values.row(k + 1);
        out.derivs.row(i) = (values.row(k + 1) - values.row(k)) / h;
    }
    return out;
}

BaselineEstimate rbf_interp(const Vector& times, const Matrix& values,
                            const std::vector<double>& epsilon_factors, const Vector& query) {
    check_times(times, 3, "rbf_interp");
    if (values.rows() != times.size()) throw InvalidInputError("rbf_interp: row count mismatch");
    const Index n = times.size();
    const double mean = times.mean();
    const double var = (times.array() - mean).square().mean();
    const double eps_base = 1.0 / std::sqrt(var);

    auto kernel_matrix = [&](double eps) {
        Matrix phi(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                const double r = times[i] - times[j];
                phi(i, j) = std::sqrt(1.0 + eps * eps * r * r);
            }
        return phi;
    };

    const double tol = 1e-8 * (1.0 + values.cwiseAbs().maxCoeff());
    auto solve_refined = [&](const Matrix& phi, Matrix& w) {
        const Eigen::PartialPivLU<Matrix> lu(phi);
        w = lu.solve(values);
        // a couple of refinement steps keep the residual near machine
        // precision even in the flat-kernel regime
        for (int pass = 0; pass < 2; ++pass) w += lu.solve(values - phi * w);
        return (phi * w - values).cwiseAbs().maxCoeff();
    };

    // leave-one-out error (Rippa): e_i = w_i / inv(Phi)_ii; candidates whose
    // system cannot be solved to tolerance are treated as singular
    double best_eps = 0.0;
    double best_loo = std::numeric_limits<double>::infinity();
    double last_eps = 0.0;
    for (double f : epsilon_factors) {
        const double eps = f * eps_base;
        last_eps = eps;
        const Matrix phi = kernel_matrix(eps);
        Matrix w;
        if (solve_refined(phi, w) > tol) continue;
        const Matrix inv = Eigen::PartialPivLU<Matrix>(phi).inverse();
        double loo = 0.0;
        for (Index d = 0; d < values.cols(); ++d)
            for (Index i = 0; i < n; ++i) {
                const double e = w(i, d) / inv(i, i);
                loo += e * e;
            }
        if (loo < best_loo) {
            best_loo = loo;
            best_eps = eps;
        }
    }
    if (best_eps == 0.0)
        throw NumericError("rbf_interp: interpolation system near-singular at epsilon = " +
                           std::to_string(last_eps));

    const Matrix phi = kernel_matrix(best_eps);
    Matrix w;
    if (solve_refined(phi, w) > tol)
        throw NumericError("rbf_interp: interpolation system near-singular at epsilon = " +
                           std::to_string(best_eps));

    const Vector& q = query.size() > 0 ? query : times;
    auto eval_at = [&](double t, Index d) {
        double v = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double r = t - times[j];
            v += w(j, d) * std::sqrt(1.0 + best_eps * best_eps * r * r);
        }
        return v;
    };

    double dt_med;
    {
        std::vector<double> steps;
        for (Index i = 1; i < n; ++i) steps.push_back(times[i] - times[i - 1]);
        std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
        dt_med = steps[steps.size() / 2];
    }
    const double h = 1e-3 * dt_med;

    BaselineEstimate out;
    out.method = "rbf";
    out.times = q;
    out.states.resize(q.size(), values.cols());
    out.derivs.resize(q.size(), values.cols());
    for (Index d = 0; d < values.cols(); ++d)
        for (Index i = 0; i < q.size(); ++i) {
            out.states(i, d) = eval_at(q[i], d);
            out.derivs(i, d) = (eval_at(q[i] + h, d) - eval_at(q[i] - h, d)) / (2.0 * h);
        }
    return out;
}

BaselineEstimate kalman_rts(const Vector& times, const Matrix& values, double q, double r,
                            KalmanDetail* detail) {
    check_times(times, 2, "kalman_rts");
    if (values.rows() != times.size()) throw InvalidInputError("kalman_rts: row count mismatch");
    const Index n = times.size();
    const Index dim = values.cols();

    BaselineEstimate out;
    out.method = "kalman";
    out.times = times;
    out.states.resize(n, dim);
    out.derivs.resize(n, dim);
    if (detail) {
        detail->innovations = Matrix::Zero(n, dim);
        detail->filtered_pos_var.resize(n, dim);
        detail->smoothed_pos_var.resize(n, dim);
    }

    using Mat2 = Eigen::Matrix2d;
    using Vec2 = Eigen::Vector2d;

    for (Index d = 0; d < dim; ++d) {
        std::vector<Vec2> x_filt(n), x_pred(n);
        std::vector<Mat2> p_filt(n), p_pred(n);

        Vec2 x;
        x << values(0, d), (values(1, d) - values(0, d)) / (times[1] - times[0]);
        Mat2 p = Mat2::Identity();
        x_filt[0] = x;
        x_pred[0] = x;
        p_filt[0] = p;
        p_pred[0] = p;

        for (Index k = 1; k < n; ++k) {
            const double dt = times[k] - times[k - 1];
            Mat2 f;
            f << 1.0, dt, 0.0, 1.0;
            Mat2 qk; // discretized white-noise-acceleration covariance
            qk << q * dt * dt * dt / 3.0, q * dt * dt / 2.0, q * dt * dt / 2.0, q * dt;

            const Vec2 xp = f * x;
            const Mat2 pp = f * p * f.transpose() + qk;
            const double innov = values(k, d) - xp[0];
            const double s = pp(0, 0) + r;
            const Vec2 gain = pp.col(0) / s;
            x = xp + gain * innov;
            p = pp - gain * pp.row(0);

            x_pred[k] = xp;
            p_pred[k] = pp;
            x_filt[k] = x;
            p_filt[k] = p;
            if (detail) detail->innovations(k, d) = innov;
        }

        // RTS backward pass
        std::vector<Vec2> x_smooth(n);
        std::vector<Mat2> p_smooth(n);
        x_smooth[n - 1] = x_filt[n - 1];
        p_smooth[n - 1] = p_filt[n - 1];
        for (Index k = n - 2; k >= 0; --k) {
            const double dt = times[k + 1] - times[k];
            Mat2 f;
            f << 1.0, dt, 0.0, 1.0;
            const Mat2 c = p_filt[k] * f.transpose() * p_pred[k + 1].inverse();
            x_smooth[k] = x_filt[k] + c * (x_smooth[k + 1] - x_pred[k + 1]);
            p_smooth[k] = p_filt[k] + c * (p_smooth[k + 1] - p_pred[k + 1]) * c.transpose();
        }

        for (Index k = 0; k < n; ++k) {
            out.states(k, d) = x_smooth[k][0];
            out.derivs(k, d) = x_smooth[k][1];
            if (detail) {
                detail->filtered_pos_var(k, d) = p_filt[k](0, 0);
                detail->smoothed_pos_var(k, d) = p_smooth[k](0, 0);
            }
        }
    }
    return out;
}

BaselineEstimate run_baseline(const std::string& method, const Vector& times,
                              const Matrix& values, const Vector& query) {
    if (method == "fd") return resample(finite_difference(times, values), query);
    if (method == "savgol") return resample(savitzky_golay(times, values), query);
    if (method == "tvreg") return resample(tvregdiff_proxy(times, values), query);
    if (method == "kalman") return resample(kalman_rts(times, values), query);
    if (method == "spline") return cubic_spline(times, values, query);
    if (method == "linear") return linear_interp(times, values, query);
    if (method == "rbf") return rbf_interp(times, values, {0.25, 0.5, 1.0, 2.0, 4.0}, query);
    throw InvalidInputError("unknown baseline method: " + method);
}

std::vector<std::string> baseline_names() {
    return {"fd", "savgol", "spline", "linear", "rbf", "tvreg", "kalman"};
}

} // namespace maat
