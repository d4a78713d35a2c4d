#include "maat/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maat {

VectorField field_from_system(const OdeSystem& system) {
    VectorField f;
    f.value = [system](const Vector& x) { return system.field(x); };
    f.jacobian = [system](const Vector& x) { return system.jacobian(x); };
    return f;
}

void LossWeights::validate() const {
    if (w_snapshot < 0 || w_signal < 0 || lambda < 0)
        throw InvalidParameterError("loss weights must be non-negative");
}

void PriorSpec::validate(Index state_dim) const {
    if (gamma < 0 || w_nonneg < 0 || w_conserve < 0 || w_monotone < 0)
        throw InvalidParameterError("prior weights must be non-negative");
    for (const auto& [d, sign] : monotone) {
        if (d < 0 || d >= state_dim)
            throw InvalidParameterError("monotone constraint: dimension index out of range");
        if (sign != 1 && sign != -1)
            throw InvalidParameterError("monotone constraint: sign must be +1 or -1");
    }
}

PriorSpec PriorSpec::none() {
    PriorSpec p;
    p.gamma = 0.0;
    return p;
}

void KernelModel::validate() const {
    length_scales.validate();
    if (coeffs.rows() != centers.size())
        throw InvalidInputError("kernel model: coefficient rows must match centers");
    if (length_scales.dim() != coeffs.cols())
        throw InvalidInputError("kernel model: per-dimension sigma count must match D");
    if (!coeffs.allFinite()) throw NumericError("kernel model: non-finite coefficients");
}

namespace {

// every fifth row is held out for validation
void split_holdout(Index n, std::vector<Index>& fit_rows, std::vector<Index>& val_rows) {
    for (Index i = 0; i < n; ++i) {
        if (i % 5 == 4)
            val_rows.push_back(i);
        else
            fit_rows.push_back(i);
    }
    if (val_rows.empty() && n >= 3) {
        const Index mid = n / 2;
        val_rows.push_back(mid);
        fit_rows.erase(std::find(fit_rows.begin(), fit_rows.end(), mid));
    }
}

Matrix pick_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

Vector pick_rows(const Vector& v, const std::vector<Index>& rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
    return out;
}

void require_finite(double value, const char* term) {
    if (!std::isfinite(value))
        throw NumericError(std::string("composite loss: non-finite ") + term + " term");
}

} // namespace

LossContext::LossContext(const SplitData& split, const ObservationOperator& obs,
                         const LengthScales& scales, bool hold_out_validation) {
    split.validate();
    obs.validate();
    scales.validate();
    dim_ = split.state_dim();
    if (scales.dim() != dim_)
        throw InvalidInputError("loss context: length-scale count must match state dimension");
    if (obs.state_dim() != dim_)
        throw InvalidInputError("loss context: observation operator dimension mismatch");
    centers_ = split.times;
    H_ = obs.H;

    std::vector<Index> sig_fit, sig_val, snap_fit, snap_val;
    if (hold_out_validation) {
        split_holdout(split.grid_size(), sig_fit, sig_val);
        split_holdout(split.snapshot_times.size(), snap_fit, snap_val);
    } else {
        for (Index i = 0; i < split.grid_size(); ++i) sig_fit.push_back(i);
        for (Index i = 0; i < split.snapshot_times.size(); ++i) snap_fit.push_back(i);
    }

    const Vector sig_fit_t = pick_rows(split.times, sig_fit);
    const Vector sig_val_t = pick_rows(split.times, sig_val);
    const Vector snap_fit_t = pick_rows(split.snapshot_times, snap_fit);
    const Vector snap_val_t = pick_rows(split.snapshot_times, snap_val);

    signal_values_ = pick_rows(split.signals, sig_fit);
    val_signal_values_ = pick_rows(split.signals, sig_val);
    snapshot_values_ = pick_rows(split.snapshots, snap_fit);
    val_snapshot_values_ = pick_rows(split.snapshots, snap_val);

    for (Index d = 0; d < dim_; ++d) {
        const double s = scales.sigma[d];
        signal_gram_.push_back(gram(sig_fit_t, centers_, s));
        snapshot_gram_.push_back(snap_fit_t.size() > 0 ? gram(snap_fit_t, centers_, s).K
                                                       : Matrix(0, centers_.size()));
        val_signal_gram_.push_back(sig_val_t.size() > 0 ? gram(sig_val_t, centers_, s).K
                                                        : Matrix(0, centers_.size()));
        val_snapshot_gram_.push_back(snap_val_t.size() > 0 ? gram(snap_val_t, centers_, s).K
                                                           : Matrix(0, centers_.size()));
    }
}

double LossContext::loss(const Matrix& U, const LossWeights& weights,
                         const PriorSpec& priors) const {
    return loss_impl(U, weights, priors, nullptr);
}

Matrix LossContext::gradient(const Matrix& U, const LossWeights& weights,
                             const PriorSpec& priors) const {
    Matrix grad = Matrix::Zero(U.rows(), U.cols());
    loss_impl(U, weights, priors, &grad);
    return grad;
}

double LossContext::loss_and_gradient(const Matrix& U, const LossWeights& weights,
                                      const PriorSpec& priors, Matrix& grad) const {
    return loss_impl(U, weights, priors, &grad);
}

double LossContext::loss_impl(const Matrix& U, const LossWeights& weights,
                              const PriorSpec& priors, Matrix* grad) const {
    weights.validate();
    priors.validate(dim_);
    if (U.rows() != centers_.size() || U.cols() != dim_)
        throw InvalidInputError("composite loss: coefficient matrix has wrong shape");

    const Index n_sig = signal_values_.rows();
    const Index n_snap = snapshot_values_.rows();
    const double inv_n = n_sig > 0 ? 1.0 / static_cast<double>(n_sig) : 0.0;
    const double inv_no = n_snap > 0 ? 1.0 / static_cast<double>(n_snap) : 0.0;

    Matrix xhat(n_sig, dim_), dhat(n_sig, dim_), shat(n_snap, dim_);
    for (Index d = 0; d < dim_; ++d) {
        xhat.col(d).noalias() = signal_gram_[d].K * U.col(d);
        dhat.col(d).noalias() = signal_gram_[d].Kdot * U.col(d);
        if (n_snap > 0) shat.col(d).noalias() = snapshot_gram_[d] * U.col(d);
    }

    Matrix g_x, g_d, g_s;
    const bool want_grad = grad != nullptr;
    if (want_grad) {
        g_x = Matrix::Zero(n_sig, dim_);
        g_d = Matrix::Zero(n_sig, dim_);
        g_s = Matrix::Zero(n_snap, dim_);
    }

    double total = 0.0;

    if (n_snap > 0 && weights.w_snapshot > 0.0) {
        const Matrix r = shat - snapshot_values_;
        const double term = weights.w_snapshot * inv_no * r.squaredNorm();
        require_finite(term, "snapshot-fidelity");
        total += term;
        if (want_grad) g_s += (2.0 * weights.w_snapshot * inv_no) * r;
    }

    if (n_sig > 0 && weights.w_signal > 0.0) {
        const Matrix r = xhat * H_.transpose() - signal_values_;
        const double term = weights.w_signal * inv_n * r.squaredNorm();
        require_finite(term, "signal-fidelity");
        total += term;
        if (want_grad) g_x.noalias() += (2.0 * weights.w_signal * inv_n) * (r * H_);
    }

    if (n_sig > 0 && priors.gamma > 0.0) {
        Matrix r = dhat;
        if (priors.prior_field) {
            for (Index t = 0; t < n_sig; ++t)
                r.row(t) -= priors.prior_field->value(xhat.row(t).transpose()).transpose();
        }
        const double term = priors.gamma * inv_n * r.squaredNorm();
        require_finite(term, "prior-dynamics");
        total += term;
        if (want_grad) {
            g_d += (2.0 * priors.gamma * inv_n) * r;
            if (priors.prior_field) {
                for (Index t = 0; t < n_sig; ++t) {
                    const Matrix jac = priors.prior_field->jacobian(xhat.row(t).transpose());
                    g_x.row(t).noalias() -= (2.0 * priors.gamma * inv_n) *
                                            (jac.transpose() * r.row(t).transpose()).transpose();
                }
            }
        }
    }

    if (weights.lambda > 0.0) {
        const double term = weights.lambda * U.squaredNorm();
        require_finite(term, "ridge");
        total += term;
    }

    if (n_sig > 0 && priors.w_nonneg > 0.0) {
        const Matrix neg = xhat.cwiseMin(0.0);
        const double term = priors.w_nonneg * inv_n * neg.squaredNorm();
        require_finite(term, "non-negativity");
        total += term;
        if (want_grad) g_x += (2.0 * priors.w_nonneg * inv_n) * neg;
    }

    if (n_sig > 0 && priors.w_conserve > 0.0) {
        const Vector c = xhat.rowwise().sum().array() - priors.conserved_total;
        const double term = priors.w_conserve * inv_n * c.squaredNorm();
        require_finite(term, "conservation");
        total += term;
        if (want_grad)
            g_x.noalias() += (2.0 * priors.w_conserve * inv_n) * c * Matrix::Ones(1, dim_);
    }

    if (n_sig > 0 && priors.w_monotone > 0.0 && !priors.monotone.empty()) {
        double term = 0.0;
        for (const auto& [d, sign] : priors.monotone) {
            const Vector viol = (static_cast<double>(sign) * dhat.col(d)).cwiseMin(0.0);
            term += priors.w_monotone * inv_n * viol.squaredNorm();
            if (want_grad)
                g_d.col(d) += (2.0 * priors.w_monotone * inv_n * static_cast<double>(sign)) * viol;
        }
        require_finite(term, "monotonicity");
        total += term;
    }

    require_finite(total, "total");

    if (want_grad) {
        for (Index d = 0; d < dim_; ++d) {
            grad->col(d).noalias() = signal_gram_[d].K.transpose() * g_x.col(d);
            grad->col(d).noalias() += signal_gram_[d].Kdot.transpose() * g_d.col(d);
            if (n_snap > 0) grad->col(d).noalias() += snapshot_gram_[d].transpose() * g_s.col(d);
            grad->col(d) += 2.0 * weights.lambda * U.col(d);
        }
    }
    return total;
}

double LossContext::validation_loss(const Matrix& U, const LossWeights& weights) const {
    const Index n_sig = val_signal_values_.rows();
    const Index n_snap = val_snapshot_values_.rows();
    double total = 0.0;
    if (n_snap > 0) {
        Matrix shat(n_snap, dim_);
        for (Index d = 0; d < dim_; ++d)
            shat.col(d).noalias() = val_snapshot_gram_[d] * U.col(d);
        total += weights.w_snapshot / static_cast<double>(n_snap) *
                 (shat - val_snapshot_values_).squaredNorm();
    }
    if (n_sig > 0) {
        Matrix xhat(n_sig, dim_);
        for (Index d = 0; d < dim_; ++d) xhat.col(d).noalias() = val_signal_gram_[d] * U.col(d);
        total += weights.w_signal / static_cast<double>(n_sig) *
                 (xhat * H_.transpose() - val_signal_values_).squaredNorm();
    }
    return total;
}

double LossContext::validation_snapshot_mse(const Matrix& U) const {
    const Index n_snap = val_snapshot_values_.rows();
    if (n_snap == 0) throw ConfigError("no held-out snapshots available for validation");
    Matrix shat(n_snap, dim_);
    for (Index d = 0; d < dim_; ++d) shat.col(d).noalias() = val_snapshot_gram_[d] * U.col(d);
    return (shat - val_snapshot_values_).squaredNorm() /
           static_cast<double>(n_snap * dim_);
}

double composite_loss(const Matrix& U, const SplitData& split, const ObservationOperator& obs,
                      const LengthScales& scales, const LossWeights& weights,
                      const PriorSpec& priors) {
    LossContext ctx(split, obs, scales, /*hold_out_validation=*/false);
    return ctx.loss(U, weights, priors);
}

Matrix composite_loss_gradient(const Matrix& U, const SplitData& split,
                               const ObservationOperator& obs, const LengthScales& scales,
                               const LossWeights& weights, const PriorSpec& priors) {
    LossContext ctx(split, obs, scales, /*hold_out_validation=*/false);
    return ctx.gradient(U, weights, priors);
}

namespace {

Matrix adam_optimize(const LossContext& ctx, const LossWeights& weights, const PriorSpec& priors,
                     const OptimizerConfig& cfg, bool early_stop, FitReport* report) {
    const Index n = ctx.centers();
    const Index d = ctx.state_dim();
    Matrix u = Matrix::Zero(n, d);
    Matrix m = Matrix::Zero(n, d);
    Matrix v = Matrix::Zero(n, d);
    Matrix grad = Matrix::Zero(n, d);

    const bool use_validation = early_stop && ctx.has_validation();
    Matrix best_u = u;
    double best_score = use_validation ? ctx.validation_loss(u, weights)
                                       : std::numeric_limits<double>::infinity();
    long best_iter = 0;
    double last_loss = 0.0;

    long it = 0;
    for (it = 1; it <= cfg.max_iterations; ++it) {
        double loss;
        try {
            grad.setZero();
            loss = ctx.loss_and_gradient(u, weights, priors, grad);
        } catch (const NumericError&) {
            throw NumericError("fit: loss diverged at iteration " + std::to_string(it));
        }
        last_loss = loss;
        if (cfg.iteration_callback) cfg.iteration_callback(it, loss);

        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(it));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(it));
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        u.array() -= cfg.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.epsilon);
        if (!u.allFinite())
            throw NumericError("fit: coefficients diverged at iteration " + std::to_string(it));

        const double score = use_validation ? ctx.validation_loss(u, weights) : loss;
        if (score < best_score) {
            best_score = score;
            best_u = u;
            best_iter = it;
        } else if (early_stop && it - best_iter > cfg.patience) {
            break;
        }
    }

    if (report) {
        report->iterations = std::min(it, cfg.max_iterations);
        report->best_iteration = best_iter;
        report->best_validation_loss = best_score;
        report->final_training_loss = last_loss;
    }
    return early_stop ? best_u : u;
}

} // namespace

KernelModel fit_split(const SplitData& split, const ObservationOperator& obs,
                      const LengthScales& scales, const LossWeights& weights,
                      const PriorSpec& priors, const OptimizerConfig& config,
                      FitReport* report) {
    LossContext ctx(split, obs, scales);
    KernelModel model;
    model.length_scales = scales;
    model.centers = split.times;
    model.coeffs = adam_optimize(ctx, weights, priors, config, /*early_stop=*/true, report);
    if (report) report->scales = scales;
    return model;
}

LengthScales sweep_length_scales(const TimeSeriesDataset& dataset, const LossWeights& weights,
                                 const PriorSpec& priors, const SweepConfig& config) {
    const SplitData& split = dataset.train;
    const Index dim = split.state_dim();
    const double base = initial_length_scale(split.times);

    LengthScales scales;
    scales.sigma = Vector::Constant(dim, base);

    {
        // validation snapshots must exist before any candidate training
        LossContext probe(split, dataset.observation, scales);
        if (!probe.has_validation_snapshots())
            throw ConfigError("sweep: no held-out snapshots derivable");
    }

    OptimizerConfig short_cfg;
    short_cfg.max_iterations = config.steps_per_candidate;

    for (Index d = 0; d < dim; ++d) {
        double best_factor = 1.0;
        double best_mse = std::numeric_limits<double>::infinity();
        for (double f : config.factors) {
            LengthScales trial = scales;
            trial.sigma[d] = base * f;
            LossContext ctx(split, dataset.observation, trial);
            const Matrix u =
                adam_optimize(ctx, weights, priors, short_cfg, /*early_stop=*/false, nullptr);
            const double mse = ctx.validation_snapshot_mse(u);
            const bool better = mse < best_mse - 1e-12;
            const bool tie = std::abs(mse - best_mse) <= 1e-12 &&
                             std::abs(f - 1.0) < std::abs(best_factor - 1.0);
            if (better || tie) {
                best_mse = mse;
                best_factor = f;
            }
        }
        scales.sigma[d] = base * best_factor;
    }
    return scales;
}

LengthScales sweep_length_scales(const TimeSeriesDataset& dataset, const SweepConfig& config) {
    return sweep_length_scales(dataset, LossWeights{}, PriorSpec::none(), config);
}

KernelModel fit(const TimeSeriesDataset& dataset, const LossWeights& weights,
                const PriorSpec& priors, const OptimizerConfig& config, FitReport* report) {
    SweepConfig sweep_cfg;
    const LengthScales scales = sweep_length_scales(dataset, weights, priors, sweep_cfg);
    return fit_split(dataset.train, dataset.observation, scales, weights, priors, config,
                     report);
}

Evaluation evaluate(const KernelModel& model, const Vector& times) {
    model.validate();
    if (times.size() == 0) throw InvalidInputError("evaluate: empty time grid");
    const Index d_count = model.state_dim();
    Evaluation out;
    out.states.resize(times.size(), d_count);
    out.derivs.resize(times.size(), d_count);
    for (Index d = 0; d < d_count; ++d) {
        const GramPair g = gram(times, model.centers, model.length_scales.sigma[d]);
        out.states.col(d).noalias() = g.K * model.coeffs.col(d);
        out.derivs.col(d).noalias() = g.Kdot * model.coeffs.col(d);
    }
    return out;
}

Lemma1Bounds lemma1_bounds(const Matrix& x_true, const Matrix& x_hat,
                           const ObservationOperator& obs, const Vector& times) {
    if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols())
        throw InvalidInputError("lemma1_bounds: trajectory shapes differ");
    if (obs.state_dim() != x_true.cols())
        throw InvalidInputError("lemma1_bounds: observation operator dimension mismatch");
    const Index n = x_true.rows();

    Vector w;
    if (times.size() == 0) {
        w = Vector::Constant(n, 1.0 / static_cast<double>(n));
    } else {
        if (times.size() != n) throw InvalidInputError("lemma1_bounds: time grid length mismatch");
        w = Vector::Zero(n);
        for (Index i = 0; i + 1 < n; ++i) {
            const double h = times[i + 1] - times[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
    }

    const Matrix diff = x_true - x_hat;
    const Matrix hdiff = diff * obs.H.transpose();
    Lemma1Bounds b;
    double observed = 0.0;
    for (Index i = 0; i < n; ++i) {
        b.lower += w[i] * diff.row(i).squaredNorm();
        observed += w[i] * hdiff.row(i).squaredNorm();
    }
    b.risk = b.lower + observed;
    const double hn = obs.operator_norm();
    // ||H d||^2 <= ||H||^2 ||d||^2 holds exactly in the reals; when H has
    // rank one the two sides coincide and summation order alone decides the
    // float comparison, so the tighter mathematical bound is restored here
    b.upper = b.lower + std::max(observed, hn * hn * b.lower);
    return b;
}

} // namespace maat
