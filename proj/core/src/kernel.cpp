#include "maat/kernel.hpp"

#include <cmath>

namespace maat {

void LengthScales::validate() const {
    if (sigma.size() == 0) throw InvalidInputError("length scales: empty");
    for (Index d = 0; d < sigma.size(); ++d) {
        if (!(sigma[d] > 0.0) || !std::isfinite(sigma[d]))
            throw InvalidParameterError("length scales: sigma must be positive and finite");
    }
}

double rbf_kernel(double t, double t_center, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameterError("rbf_kernel: sigma must be positive");
    const double d = t - t_center;
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

double rbf_kernel_dt(double t, double t_center, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameterError("rbf_kernel_dt: sigma must be positive");
    const double d = t - t_center;
    return -d / (sigma * sigma) * std::exp(-d * d / (2.0 * sigma * sigma));
}

GramPair gram(const Vector& eval_times, const Vector& center_times, double sigma) {
    if (eval_times.size() == 0 || center_times.size() == 0)
        throw InvalidInputError("gram: empty time grid");
    if (!(sigma > 0.0)) throw InvalidParameterError("gram: sigma must be positive");

    const Index n = eval_times.size();
    const Index m = center_times.size();
    GramPair out;
    out.K.resize(n, m);
    out.Kdot.resize(n, m);
    const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (Index j = 0; j < m; ++j) {
        const double tc = center_times[j];
        for (Index i = 0; i < n; ++i) {
            const double d = eval_times[i] - tc;
            const double k = std::exp(-d * d * inv_two_s2);
            out.K(i, j) = k;
            out.Kdot(i, j) = -d * inv_s2 * k;
        }
    }
    return out;
}

double initial_length_scale(const Vector& times) {
    if (times.size() < 2) throw InvalidInputError("initial_length_scale: need >= 2 times");
    const double mean = times.mean();
    const double var = (times.array() - mean).square().mean();
    if (!(var > 0.0)) throw InvalidInputError("initial_length_scale: degenerate time grid");
    return std::sqrt(var);
}

} // namespace maat
