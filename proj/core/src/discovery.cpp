#include "maat/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

namespace maat {

namespace {

void enumerate_exponents(Index dim, int degree_left, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
    if (static_cast<Index>(current.size()) == dim) {
        out.push_back(current);
        return;
    }
    for (int e = degree_left; e >= 0; --e) {
        current.push_back(e);
        enumerate_exponents(dim, degree_left - e, current, out);
        current.pop_back();
    }
}

} // namespace

FeatureLibrary make_library(Index state_dim, int max_degree, bool include_bias) {
    if (max_degree < 1) throw InvalidInputError("feature library: degree must be >= 1");
    if (state_dim < 1) throw InvalidInputError("feature library: dimension must be >= 1");
    FeatureLibrary lib;
    lib.max_degree = max_degree;
    lib.include_bias = include_bias;
    // graded order: total degree first, then leading variables with the
    // highest exponents (1, x1, x2, x1^2, x1 x2, x2^2, ...)
    for (int deg = include_bias ? 0 : 1; deg <= max_degree; ++deg) {
        std::vector<std::vector<int>> level;
        std::vector<int> current;
        enumerate_exponents(state_dim, deg, current, level);
        for (auto& e : level)
            if (std::accumulate(e.begin(), e.end(), 0) == deg) lib.exponents.push_back(e);
    }
    return lib;
}

std::string FeatureLibrary::feature_name(Index p,
                                         const std::vector<std::string>& state_names) const {
    const auto& e = exponents.at(static_cast<std::size_t>(p));
    std::ostringstream os;
    bool first = true;
    for (std::size_t d = 0; d < e.size(); ++d) {
        if (e[d] == 0) continue;
        if (!first) os << "*";
        first = false;
        const std::string name =
            d < state_names.size() ? state_names[d] : "x" + std::to_string(d + 1);
        os << name;
        if (e[d] > 1) os << "^" << e[d];
    }
    if (first) os << "1";
    return os.str();
}

Matrix build_features(const Matrix& states, const FeatureLibrary& library) {
    const Index n = states.rows();
    const Index p = library.feature_count();
    if (static_cast<Index>(library.exponents.front().size()) != states.cols())
        throw InvalidInputError("build_features: library dimension mismatch");
    Matrix out = Matrix::Ones(n, p);
    for (Index j = 0; j < p; ++j) {
        const auto& e = library.exponents[static_cast<std::size_t>(j)];
        for (std::size_t d = 0; d < e.size(); ++d)
            for (int rep = 0; rep < e[d]; ++rep)
                out.col(j) = out.col(j).cwiseProduct(states.col(static_cast<Index>(d)));
    }
    return out;
}

std::vector<std::vector<Index>> SparseDynamicsModel::support() const {
    std::vector<std::vector<Index>> s(xi.cols());
    for (Index d = 0; d < xi.cols(); ++d)
        for (Index p = 0; p < xi.rows(); ++p)
            if (xi(p, d) != 0.0) s[static_cast<std::size_t>(d)].push_back(p);
    return s;
}

Vector SparseDynamicsModel::rhs(const Vector& state) const {
    const Matrix feats = build_features(state.transpose(), library);
    return (feats * xi).row(0).transpose();
}

namespace {

Vector ridge_solve(const Matrix& x, const Vector& y, double ridge) {
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += ridge;
    return gram.ldlt().solve(x.transpose() * y);
}

} // namespace

SparseDynamicsModel stls_fit(const Matrix& features, const Matrix& targets,
                             const FeatureLibrary& library, const StlsConfig& config) {
    if (features.rows() != targets.rows())
        throw InvalidInputError("stls_fit: feature/target row mismatch");
    if (features.cols() != library.feature_count())
        throw InvalidInputError("stls_fit: feature count does not match the library");

    SparseDynamicsModel model;
    model.library = library;
    model.xi = Matrix::Zero(features.cols(), targets.cols());
    if (features.rows() < features.cols())
        std::cerr << "stls_fit: warning: fewer samples (" << features.rows() << ") than features ("
                  << features.cols() << ")\n";

    for (Index d = 0; d < targets.cols(); ++d) {
        std::vector<Index> active(features.cols());
        for (Index p = 0; p < features.cols(); ++p) active[static_cast<std::size_t>(p)] = p;

        Vector coef;
        for (int it = 1; it <= config.max_iterations; ++it) {
            Matrix sub(features.rows(), static_cast<Index>(active.size()));
            for (std::size_t j = 0; j < active.size(); ++j) sub.col(j) = features.col(active[j]);
            coef = ridge_solve(sub, targets.col(d), config.ridge);

            const double tau = config.threshold * std::pow(config.decay, it);
            std::vector<Index> surviving;
            for (std::size_t j = 0; j < active.size(); ++j)
                if (std::abs(coef[static_cast<Index>(j)]) >= tau) surviving.push_back(active[j]);

            if (surviving.empty()) {
                model.diagnostics.push_back("column " + std::to_string(d) +
                                            ": all features eliminated, zero model kept");
                active.clear();
                break;
            }
            if (surviving.size() == active.size()) {
                active = surviving;
                break;
            }
            active = surviving;
        }

        if (!active.empty()) {
            Matrix sub(features.rows(), static_cast<Index>(active.size()));
            for (std::size_t j = 0; j < active.size(); ++j) sub.col(j) = features.col(active[j]);
            coef = ridge_solve(sub, targets.col(d), config.ridge);
            for (std::size_t j = 0; j < active.size(); ++j) model.xi(active[j], d) = coef[j];
        }
    }
    return model;
}

Matrix rollout(const SparseDynamicsModel& model, const Vector& x0, double t0, double dt,
               long steps) {
    try {
        return rk4_integrate([&model](const Vector& x) { return model.rhs(x); }, x0, t0, dt,
                             steps);
    } catch (const IntegrationBlowupError& e) {
        throw IntegrationBlowupError(std::string("discovered-model-unstable: ") + e.what(),
                                     e.step_index);
    }
}

std::string format_equations(const SparseDynamicsModel& model,
                             const std::vector<std::string>& state_names) {
    std::ostringstream os;
    for (Index d = 0; d < model.xi.cols(); ++d) {
        const std::string lhs =
            static_cast<std::size_t>(d) < state_names.size() ? state_names[d]
                                                             : "x" + std::to_string(d + 1);
        os << "d" << lhs << "/dt =";
        bool any = false;
        for (Index p = 0; p < model.xi.rows(); ++p) {
            const double c = model.xi(p, d);
            if (c == 0.0) continue;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f", std::abs(c));
            os << (any ? (c < 0 ? " - " : " + ") : (c < 0 ? " -" : " ")) << buf;
            const std::string feat = model.library.feature_name(p, state_names);
            if (feat != "1") os << "*" << feat;
            any = true;
        }
        if (!any) os << " 0";
        os << "\n";
    }
    return os.str();
}

} // namespace maat
