#include "maat/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace maat {

OdeSystem OdeSystem::with_params(const Vector& p) const {
    if (p.size() != params.size())
        throw InvalidInputError("with_params: parameter count mismatch for " + name);
    OdeSystem out = *this;
    out.params = p;
    if (conserved_total) out.conserved_total = nominal_initial_state.sum();
    return out;
}

Vector seir_field(const Vector& state, const Vector& params) {
    const double beta = params[0], sigma = params[1], gamma = params[2], n = params[3];
    const double s = state[0], e = state[1], i = state[2];
    Vector f(4);
    const double inf = beta * s * i / n;
    f[0] = -inf;
    f[1] = inf - sigma * e;
    f[2] = sigma * e - gamma * i;
    f[3] = gamma * i;
    return f;
}

static Matrix seir_jacobian(const Vector& state, const Vector& params) {
    const double beta = params[0], sigma = params[1], gamma = params[2], n = params[3];
    const double s = state[0], i = state[2];
    Matrix j = Matrix::Zero(4, 4);
    j(0, 0) = -beta * i / n;
    j(0, 2) = -beta * s / n;
    j(1, 0) = beta * i / n;
    j(1, 1) = -sigma;
    j(1, 2) = beta * s / n;
    j(2, 1) = sigma;
    j(2, 2) = -gamma;
    j(3, 2) = gamma;
    return j;
}

Vector seirh_field(const Vector& state, const Vector& params) {
    const double beta = params[0], sigma = params[1], gamma = params[2];
    const double delta = params[3], gamma_h = params[4], n = params[5];
    const double s = state[0], e = state[1], i = state[2], h = state[3];
    Vector f(5);
    const double inf = beta * s * i / n;
    f[0] = -inf;
    f[1] = inf - sigma * e;
    f[2] = sigma * e - (gamma + delta) * i;
    f[3] = delta * i - gamma_h * h;
    f[4] = gamma * i + gamma_h * h;
    return f;
}

static Matrix seirh_jacobian(const Vector& state, const Vector& params) {
    const double beta = params[0], sigma = params[1], gamma = params[2];
    const double delta = params[3], gamma_h = params[4], n = params[5];
    const double s = state[0], i = state[2];
    Matrix j = Matrix::Zero(5, 5);
    j(0, 0) = -beta * i / n;
    j(0, 2) = -beta * s / n;
    j(1, 0) = beta * i / n;
    j(1, 1) = -sigma;
    j(1, 2) = beta * s / n;
    j(2, 1) = sigma;
    j(2, 2) = -(gamma + delta);
    j(3, 2) = delta;
    j(3, 3) = -gamma_h;
    j(4, 2) = gamma;
    j(4, 3) = gamma_h;
    return j;
}

Vector viral_field(const Vector& state, const Vector& params) {
    const double beta = params[0], k = params[1], delta = params[2];
    const double p = params[3], c = params[4];
    const double t = state[0], e = state[1], i = state[2], v = state[3];
    Vector f(4);
    f[0] = -beta * t * v;
    f[1] = beta * t * v - k * e;
    f[2] = k * e - delta * i;
    f[3] = p * i - c * v;
    return f;
}

static Matrix viral_jacobian(const Vector& state, const Vector& params) {
    const double beta = params[0], k = params[1], delta = params[2];
    const double p = params[3], c = params[4];
    const double t = state[0], v = state[3];
    Matrix j = Matrix::Zero(4, 4);
    j(0, 0) = -beta * v;
    j(0, 3) = -beta * t;
    j(1, 0) = beta * v;
    j(1, 1) = -k;
    j(1, 3) = beta * t;
    j(2, 1) = k;
    j(2, 2) = -delta;
    j(3, 2) = p;
    j(3, 3) = -c;
    return j;
}

Vector predator_prey_field(const Vector& state, const Vector& params) {
    const double alpha = params[0], beta = params[1], delta = params[2], gamma = params[3];
    const double x = state[0], y = state[1];
    Vector f(2);
    f[0] = alpha * x - beta * x * y;
    f[1] = delta * x * y - gamma * y;
    return f;
}

static Matrix predator_prey_jacobian(const Vector& state, const Vector& params) {
    const double alpha = params[0], beta = params[1], delta = params[2], gamma = params[3];
    const double x = state[0], y = state[1];
    Matrix j(2, 2);
    j(0, 0) = alpha - beta * y;
    j(0, 1) = -beta * x;
    j(1, 0) = delta * y;
    j(1, 1) = delta * x - gamma;
    return j;
}

OdeSystem make_system(const std::string& name) {
    OdeSystem sys;
    sys.name = name;
    if (name == "seir") {
        sys.dim = 4;
        sys.nominal_initial_state = Vector{{0.99, 0.01, 0.0, 0.0}};
        sys.params = Vector{{0.3, 0.2, 0.1, 1.0}};
        sys.param_names = {"beta", "sigma", "gamma", "N"};
        sys.state_names = {"S", "E", "I", "R"};
        sys.field_fn = seir_field;
        sys.jacobian_fn = seir_jacobian;
        sys.conserved_total = sys.nominal_initial_state.sum();
        sys.default_operator = "mixing-infectious-total";
    } else if (name == "seirh") {
        sys.dim = 5;
        sys.nominal_initial_state = Vector{{0.99, 0.01, 0.0, 0.0, 0.0}};
        sys.params = Vector{{0.3, 0.2, 0.1, 0.15, 0.12, 1.0}};
        sys.param_names = {"beta", "sigma", "gamma", "delta", "gamma_h", "N"};
        sys.state_names = {"S", "E", "I", "H", "R"};
        sys.field_fn = seirh_field;
        sys.jacobian_fn = seirh_jacobian;
        sys.conserved_total = sys.nominal_initial_state.sum();
        sys.default_operator = "mixing-infectious-total";
    } else if (name == "viral") {
        sys.dim = 4;
        sys.nominal_initial_state = Vector{{1.0, 0.0, 0.0, 0.01}};
        sys.params = Vector{{0.6, 0.8, 0.4, 2.0, 1.0}};
        sys.param_names = {"beta", "k", "delta", "p", "c"};
        sys.state_names = {"T", "E", "I", "V"};
        sys.field_fn = viral_field;
        sys.jacobian_fn = viral_jacobian;
        sys.default_operator = "select:3";
    } else if (name == "predprey") {
        sys.dim = 2;
        sys.nominal_initial_state = Vector{{1.0, 0.6}};
        sys.params = Vector{{0.7, 1.2, 0.8, 0.5}};
        sys.param_names = {"alpha", "beta", "delta", "gamma"};
        sys.state_names = {"x", "y"};
        sys.field_fn = predator_prey_field;
        sys.jacobian_fn = predator_prey_jacobian;
        sys.default_operator = "identity";
    } else {
        throw InvalidInputError("unknown system: " + name);
    }
    return sys;
}

std::vector<std::string> system_names() { return {"seir", "seirh", "viral", "predprey"}; }

Matrix rk4_integrate(const std::function<Vector(const Vector&)>& field, const Vector& x0,
                     double t0, double dt, long steps) {
    (void)t0; // autonomous systems; kept for the time-grid contract
    if (!(dt > 0.0)) throw InvalidParameterError("rk4_integrate: dt must be positive");
    if (steps < 0) throw InvalidInputError("rk4_integrate: negative step count");
    Matrix out(steps + 1, x0.size());
    Vector x = x0;
    out.row(0) = x.transpose();
    for (long k = 0; k < steps; ++k) {
        const Vector k1 = field(x);
        const Vector k2 = field(x + 0.5 * dt * k1);
        const Vector k3 = field(x + 0.5 * dt * k2);
        const Vector k4 = field(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite())
            throw IntegrationBlowupError("rk4_integrate: non-finite state at step " +
                                             std::to_string(k + 1),
                                         k + 1);
        out.row(k + 1) = x.transpose();
    }
    return out;
}

Matrix rk4_integrate(const OdeSystem& system, const Vector& x0, double t0, double dt,
                     long steps) {
    if (x0.size() != system.dim) throw InvalidInputError("rk4_integrate: state dim mismatch");
    return rk4_integrate([&](const Vector& x) { return system.field(x); }, x0, t0, dt, steps);
}

double ObservationOperator::operator_norm() const {
    Eigen::JacobiSVD<Matrix> svd(H);
    return svd.singularValues()(0);
}

bool ObservationOperator::is_full_selection() const {
    if (H.rows() != H.cols()) return false;
    std::vector<bool> covered(H.cols(), false);
    for (Index r = 0; r < H.rows(); ++r) {
        Index hit = -1;
        for (Index c = 0; c < H.cols(); ++c) {
            if (H(r, c) == 1.0) {
                if (hit >= 0) return false;
                hit = c;
            } else if (H(r, c) != 0.0) {
                return false;
            }
        }
        if (hit < 0 || covered[hit]) return false;
        covered[hit] = true;
    }
    return true;
}

void ObservationOperator::validate() const {
    if (H.rows() < 1) throw InvalidInputError("observation operator: need >= 1 channel");
    for (Index r = 0; r < H.rows(); ++r)
        if (H.row(r).cwiseAbs().maxCoeff() == 0.0)
            throw InvalidInputError("observation operator: all-zero row");
}

static std::vector<Index> parse_dims(const std::string& list, Index dim) {
    std::vector<Index> dims;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const long v = std::stol(tok);
        if (v < 0 || v >= dim)
            throw InvalidInputError("observation operator: dimension index out of range: " + tok);
        dims.push_back(v);
    }
    if (dims.empty()) throw InvalidInputError("observation operator: empty selection");
    return dims;
}

ObservationOperator make_observation_operator(const std::string& kind, Index state_dim,
                                              const Matrix& mixing) {
    ObservationOperator out;
    if (kind == "identity") {
        out.H = Matrix::Identity(state_dim, state_dim);
        for (Index d = 0; d < state_dim; ++d)
            out.channel_labels.push_back("x" + std::to_string(d + 1));
    } else if (kind == "sum-all") {
        out.H = Matrix::Ones(1, state_dim);
        out.channel_labels = {"total"};
    } else if (kind.rfind("select:", 0) == 0) {
        const auto dims = parse_dims(kind.substr(7), state_dim);
        out.H = Matrix::Zero(static_cast<Index>(dims.size()), state_dim);
        for (std::size_t r = 0; r < dims.size(); ++r) {
            out.H(static_cast<Index>(r), dims[r]) = 1.0;
            out.channel_labels.push_back("x" + std::to_string(dims[r] + 1));
        }
    } else if (kind == "mixing") {
        if (mixing.size() == 0 || mixing.cols() != state_dim)
            throw InvalidInputError("observation operator: mixing matrix has wrong shape");
        out.H = mixing;
        for (Index r = 0; r < mixing.rows(); ++r)
            out.channel_labels.push_back("mix" + std::to_string(r + 1));
    } else if (kind == "mixing-infectious-total") {
        // dense infectious-compartment channel (index 2 in SEIR-family
        // layouts) plus the population total
        if (state_dim < 3) throw InvalidInputError("mixing-infectious-total needs dim >= 3");
        out.H = Matrix::Zero(2, state_dim);
        out.H(0, 2) = 1.0;
        out.H.row(1).setOnes();
        out.channel_labels = {"infectious", "total"};
    } else {
        throw InvalidInputError("unknown observation operator kind: " + kind);
    }
    out.validate();
    return out;
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian" || s == "isotropic-gaussian") return NoiseKind::isotropic_gaussian;
    if (s == "ar1" || s == "correlated-ar1") return NoiseKind::correlated_ar1;
    if (s == "student-t" || s == "student_t") return NoiseKind::student_t;
    throw InvalidInputError("unknown noise kind: " + s);
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::isotropic_gaussian: return "gaussian";
        case NoiseKind::correlated_ar1: return "ar1";
        case NoiseKind::student_t: return "student-t";
    }
    return "?";
}

void NoiseModel::validate() const {
    if (scale < 0.0) throw InvalidParameterError("noise model: scale must be >= 0");
    if (ar1_alpha < 0.0 || ar1_alpha >= 1.0)
        throw InvalidParameterError("noise model: ar1_alpha must be in [0, 1)");
    if (student_nu <= 2) throw InvalidParameterError("noise model: student_nu must be > 2");
}

Matrix apply_noise(const Matrix& clean, const NoiseModel& model, std::uint64_t rng_seed) {
    model.validate();
    if (model.scale == 0.0) return clean;
    Matrix out = clean;
    Rng rng(rng_seed);
    const double s = model.scale;
    switch (model.kind) {
        case NoiseKind::isotropic_gaussian:
            for (Index c = 0; c < out.cols(); ++c)
                for (Index r = 0; r < out.rows(); ++r) out(r, c) += s * rng.normal();
            break;
        case NoiseKind::correlated_ar1: {
            const double a = model.ar1_alpha;
            const double innov = std::sqrt(1.0 - a * a) * s;
            for (Index c = 0; c < out.cols(); ++c) {
                double e = s * rng.normal();
                out(0, c) += e;
                for (Index r = 1; r < out.rows(); ++r) {
                    e = a * e + innov * rng.normal();
                    out(r, c) += e;
                }
            }
            break;
        }
        case NoiseKind::student_t: {
            // unit-variance rescale so all three kinds share the same scale
            const double unit = std::sqrt((model.student_nu - 2.0) / model.student_nu);
            for (Index c = 0; c < out.cols(); ++c)
                for (Index r = 0; r < out.rows(); ++r)
                    out(r, c) += s * unit * rng.student_t(model.student_nu);
            break;
        }
    }
    return out;
}

void SplitData::validate() const {
    const Index n = times.size();
    if (n < 1) throw InvalidInputError("split: need >= 1 time point");
    for (Index i = 1; i < n; ++i)
        if (!(times[i] > times[i - 1]))
            throw InvalidInputError("split: time grid must be strictly increasing");
    if (signals.rows() != n) throw InvalidInputError("split: signal row count mismatch");
    if (truth.rows() != n) throw InvalidInputError("split: truth row count mismatch");
    if (snapshots.rows() != snapshot_times.size())
        throw InvalidInputError("split: snapshot row count mismatch");
    if (snapshots.cols() != truth.cols())
        throw InvalidInputError("split: snapshot dimension mismatch");
}

const SplitData& TimeSeriesDataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw InvalidInputError("unknown split: " + name);
}

GenConfig default_gen_config(const std::string& system_name) {
    GenConfig cfg;
    cfg.noise.scale = -1.0; // 5% of mean absolute state
    if (system_name == "predprey") cfg.dt = 0.05;
    return cfg;
}

long snapshot_count(long n_points) {
    return std::lround(1.5 * std::sqrt(static_cast<double>(n_points)));
}

namespace {

std::vector<Index> even_indices(long n, long count) {
    std::vector<Index> idx;
    if (count >= n) {
        for (long i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    if (count == 1) return {0};
    for (long k = 0; k < count; ++k) {
        const double pos = static_cast<double>(k) * (n - 1) / (count - 1);
        const Index i = static_cast<Index>(std::lround(pos));
        if (idx.empty() || idx.back() != i) idx.push_back(i);
    }
    return idx;
}

SplitData make_split(const OdeSystem& system, const GenConfig& cfg, long n,
                     const ObservationOperator& obs, Rng& ic_rng, std::uint64_t signal_seed,
                     std::uint64_t snap_seed, double& noise_scale_out) {
    Vector ic = system.nominal_initial_state;
    for (Index d = 0; d < ic.size(); ++d) {
        ic[d] *= 1.0 + ic_rng.uniform(-cfg.ic_jitter, cfg.ic_jitter);
        if (ic[d] < 0.0) ic[d] = 0.0;
    }

    SplitData split;
    split.truth = rk4_integrate(system, ic, 0.0, cfg.dt, n - 1);
    split.times = Vector::LinSpaced(n, 0.0, cfg.dt * (n - 1));

    NoiseModel noise = cfg.noise;
    if (noise.scale < 0.0) noise.scale = 0.05 * split.truth.cwiseAbs().mean();
    noise_scale_out = noise.scale;

    split.signals = apply_noise(split.truth * obs.H.transpose(), noise, signal_seed);

    auto idx = even_indices(n, snapshot_count(n));
    if (cfg.snapshot_stride > 1) {
        std::vector<Index> thinned;
        for (std::size_t i = 0; i < idx.size(); i += cfg.snapshot_stride)
            thinned.push_back(idx[i]);
        idx = thinned;
    }
    split.snapshot_indices = idx;
    split.snapshot_times.resize(static_cast<Index>(idx.size()));
    Matrix snaps(static_cast<Index>(idx.size()), system.dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        split.snapshot_times[static_cast<Index>(i)] = split.times[idx[i]];
        snaps.row(static_cast<Index>(i)) = split.truth.row(idx[i]);
    }
    split.snapshots = cfg.noisy_snapshots ? apply_noise(snaps, noise, snap_seed) : snaps;
    split.validate();
    return split;
}

} // namespace

TimeSeriesDataset generate_dataset(const OdeSystem& system, const GenConfig& config) {
    if (config.n_train < 2 || config.n_val < 2 || config.n_test < 2)
        throw InvalidInputError("generate_dataset: each split needs >= 2 points");
    if (config.snapshot_stride < 1)
        throw InvalidInputError("generate_dataset: snapshot_stride must be >= 1");
    {
        NoiseModel check = config.noise; // negative scale is the "derive" sentinel
        check.scale = std::max(0.0, check.scale);
        check.validate();
    }

    Rng param_rng = Rng::derive(config.seed, 1);
    Vector jittered = system.params;
    for (Index i = 0; i < jittered.size(); ++i)
        jittered[i] *= 1.0 + param_rng.uniform(-config.param_jitter, config.param_jitter);

    TimeSeriesDataset ds;
    ds.system_name = system.name;
    ds.system = system.with_params(jittered);
    ds.config = config;
    ds.noise_kind = config.noise.kind;
    const std::string op_kind =
        config.operator_kind.empty() ? system.default_operator : config.operator_kind;
    ds.observation = make_observation_operator(op_kind, system.dim);
    ds.config.operator_kind = op_kind;

    Rng ic_train = Rng::derive(config.seed, 2);
    Rng ic_val = Rng::derive(config.seed, 3);
    Rng ic_test = Rng::derive(config.seed, 4);
    ds.train = make_split(ds.system, config, config.n_train, ds.observation, ic_train,
                          Rng::derive(config.seed, 5).raw(), Rng::derive(config.seed, 6).raw(),
                          ds.noise_scale_train);
    ds.val = make_split(ds.system, config, config.n_val, ds.observation, ic_val,
                        Rng::derive(config.seed, 7).raw(), Rng::derive(config.seed, 8).raw(),
                        ds.noise_scale_val);
    ds.test = make_split(ds.system, config, config.n_test, ds.observation, ic_test,
                         Rng::derive(config.seed, 9).raw(), Rng::derive(config.seed, 10).raw(),
                         ds.noise_scale_test);
    return ds;
}

TimeSeriesDataset generate_dataset(const std::string& system_name, const GenConfig& config) {
    return generate_dataset(make_system(system_name), config);
}

TimeSeriesDataset make_direct_dataset(const Vector& times, const Matrix& values,
                                      const Matrix& truth, long snapshot_every) {
    if (times.size() != values.rows() || times.size() != truth.rows())
        throw InvalidInputError("make_direct_dataset: row count mismatch");
    if (snapshot_every < 1) throw InvalidInputError("make_direct_dataset: bad snapshot stride");
    TimeSeriesDataset ds;
    ds.system_name = "direct";
    ds.system.name = "direct";
    ds.system.dim = values.cols();
    ds.observation = make_observation_operator("identity", values.cols());

    SplitData split;
    split.times = times;
    split.signals = values;
    split.truth = truth;
    for (Index i = 0; i < times.size(); i += snapshot_every) split.snapshot_indices.push_back(i);
    split.snapshot_times.resize(static_cast<Index>(split.snapshot_indices.size()));
    split.snapshots.resize(static_cast<Index>(split.snapshot_indices.size()), values.cols());
    for (std::size_t i = 0; i < split.snapshot_indices.size(); ++i) {
        split.snapshot_times[static_cast<Index>(i)] = times[split.snapshot_indices[i]];
        split.snapshots.row(static_cast<Index>(i)) = values.row(split.snapshot_indices[i]);
    }
    split.validate();
    ds.train = split;
    ds.val = split;
    ds.test = split;
    return ds;
}

} // namespace maat
