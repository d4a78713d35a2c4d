#include <doctest.h>

#include "maat/reconstruction.hpp"

#include <cmath>
#include <memory>

using namespace maat;

namespace {

// arbitrary small instance with every loss term exercised
struct SmallInstance {
    SplitData split;
    ObservationOperator obs;
    LengthScales scales;
    LossWeights weights;
    PriorSpec priors;
    Matrix u;
};

SmallInstance make_instance(Rng& rng, Index n, Index d, bool all_priors) {
    SmallInstance inst;
    inst.split.times.resize(n);
    double t = 0.0;
    for (Index i = 0; i < n; ++i) {
        t += rng.uniform(0.1, 0.7);
        inst.split.times[i] = t;
    }
    const Index s = 1 + static_cast<Index>(rng.uniform() * 2.0); // 1..2 channels
    Matrix h(s, d);
    for (Index r = 0; r < s; ++r)
        for (Index c = 0; c < d; ++c) h(r, c) = rng.uniform(-1.0, 1.0);
    h(0, 0) = 1.0; // keep rows nonzero
    inst.obs.H = h;
    inst.split.signals.resize(n, s);
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < s; ++c) inst.split.signals(i, c) = rng.uniform(-1.0, 1.0);

    const Index m = 2 + static_cast<Index>(rng.uniform() * 2.0);
    inst.split.snapshot_times.resize(m);
    inst.split.snapshots.resize(m, d);
    for (Index i = 0; i < m; ++i) {
        inst.split.snapshot_times[i] = inst.split.times[0] + 0.31 * static_cast<double>(i + 1);
        for (Index c = 0; c < d; ++c) inst.split.snapshots(i, c) = rng.uniform(-1.0, 1.0);
    }
    inst.split.truth = Matrix::Zero(n, d);

    inst.scales.sigma.resize(d);
    for (Index c = 0; c < d; ++c) inst.scales.sigma[c] = rng.uniform(0.5, 2.0);

    inst.weights.w_snapshot = 1.1;
    inst.weights.w_signal = 0.9;
    inst.weights.lambda = 1e-3;

    if (all_priors) {
        inst.priors.gamma = 0.7;
        Matrix a(d, d);
        for (Index r = 0; r < d; ++r)
            for (Index c = 0; c < d; ++c) a(r, c) = rng.uniform(-0.5, 0.5);
        auto field = std::make_shared<VectorField>();
        field->value = [a](const Vector& x) -> Vector {
            return a * x + 0.3 * x.cwiseProduct(x);
        };
        field->jacobian = [a](const Vector& x) -> Matrix {
            Matrix j = a;
            j.diagonal() += 0.6 * x;
            return j;
        };
        inst.priors.prior_field = field;
        inst.priors.w_nonneg = 0.9;
        inst.priors.w_conserve = 0.8;
        inst.priors.conserved_total = 0.5;
        inst.priors.w_monotone = 0.6;
        inst.priors.monotone = {{0, +1}, {d - 1, -1}};
    } else {
        inst.priors = PriorSpec::none();
    }

    inst.u.resize(n, d);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < d; ++c) inst.u(r, c) = 0.5 * rng.uniform(-1.0, 1.0);
    return inst;
}

} // namespace

TEST_CASE("loss vanishes when every residual is zero") {
    SplitData split;
    split.times = Vector::LinSpaced(5, 0.0, 4.0);
    split.signals = Matrix::Zero(5, 1);
    split.snapshot_times = Vector::LinSpaced(2, 1.0, 3.0);
    split.snapshots = Matrix::Zero(2, 2);
    split.truth = Matrix::Zero(5, 2);
    ObservationOperator obs = make_observation_operator("sum-all", 2);
    LengthScales scales;
    scales.sigma = Vector::Constant(2, 1.0);
    LossWeights w;
    w.lambda = 0.0;
    CHECK(composite_loss(Matrix::Zero(5, 2), split, obs, scales, w, PriorSpec::none()) == 0.0);
}

TEST_CASE("loss at U = 0 equals the pure data terms") {
    Rng rng(21);
    SmallInstance inst = make_instance(rng, 6, 2, false);
    inst.weights.lambda = 0.0;
    const double expected =
        inst.weights.w_snapshot * inst.split.snapshots.squaredNorm() /
            static_cast<double>(inst.split.snapshots.rows()) +
        inst.weights.w_signal * inst.split.signals.squaredNorm() /
            static_cast<double>(inst.split.signals.rows());
    const Matrix zero = Matrix::Zero(6, 2);
    CHECK(composite_loss(zero, inst.split, inst.obs, inst.scales, inst.weights,
                         PriorSpec::none()) == doctest::Approx(expected));
}

TEST_CASE("single-snapshot quadratic has its minimizer at u = 1") {
    SplitData split;
    split.times = Vector::Zero(1);
    split.signals = Matrix::Zero(1, 1);
    split.snapshot_times = Vector::Zero(1);
    split.snapshots = Matrix::Ones(1, 1);
    split.truth = Matrix::Ones(1, 1);
    ObservationOperator obs = make_observation_operator("identity", 1);
    LengthScales scales;
    scales.sigma = Vector::Ones(1);
    LossWeights w;
    w.w_signal = 0.0;
    w.lambda = 0.0;

    const Matrix minimizer = Matrix::Ones(1, 1);
    CHECK(composite_loss(minimizer, split, obs, scales, w, PriorSpec::none()) ==
          doctest::Approx(0.0));
    const Matrix grad =
        composite_loss_gradient(minimizer, split, obs, scales, w, PriorSpec::none());
    CHECK(grad.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    // and it is a minimum: nearby points cost more
    CHECK(composite_loss(Matrix::Constant(1, 1, 1.1), split, obs, scales, w,
                         PriorSpec::none()) > 0.0);
}

TEST_CASE("ridge-only gradient is 2 lambda U") {
    Rng rng(5);
    SmallInstance inst = make_instance(rng, 5, 2, false);
    inst.weights.w_snapshot = 0.0;
    inst.weights.w_signal = 0.0;
    inst.weights.lambda = 0.37;
    const Matrix grad = composite_loss_gradient(inst.u, inst.split, inst.obs, inst.scales,
                                                inst.weights, PriorSpec::none());
    CHECK((grad - 2.0 * 0.37 * inst.u).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradient matches central finite differences with all priors active") {
    Rng rng(2024);
    for (int trial = 0; trial < 8; ++trial) {
        const Index n = 4 + static_cast<Index>(rng.uniform() * 3.0);
        const Index d = 2 + static_cast<Index>(rng.uniform() * 2.0);
        SmallInstance inst = make_instance(rng, n, d, true);
        const Matrix grad = composite_loss_gradient(inst.u, inst.split, inst.obs, inst.scales,
                                                    inst.weights, inst.priors);
        const double h = 1e-6;
        double worst = 0.0;
        Matrix fd(n, d);
        for (Index r = 0; r < n; ++r)
            for (Index c = 0; c < d; ++c) {
                Matrix up = inst.u, dn = inst.u;
                up(r, c) += h;
                dn(r, c) -= h;
                fd(r, c) = (composite_loss(up, inst.split, inst.obs, inst.scales, inst.weights,
                                           inst.priors) -
                            composite_loss(dn, inst.split, inst.obs, inst.scales, inst.weights,
                                           inst.priors)) /
                           (2 * h);
            }
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        worst = (grad - fd).cwiseAbs().maxCoeff() / scale;
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("shape mismatch raises invalid input") {
    Rng rng(9);
    SmallInstance inst = make_instance(rng, 5, 2, false);
    CHECK_THROWS_AS(composite_loss(Matrix::Zero(4, 2), inst.split, inst.obs, inst.scales,
                                   inst.weights, inst.priors),
                    InvalidInputError);
}

TEST_CASE("non-finite inputs are reported with the offending term") {
    Rng rng(10);
    SmallInstance inst = make_instance(rng, 5, 2, false);
    Matrix bad = inst.u;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    try {
        composite_loss(bad, inst.split, inst.obs, inst.scales, inst.weights, inst.priors);
        FAIL("expected numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("term") != std::string::npos);
    }
}

TEST_CASE("evaluate reproduces K U exactly on the center grid") {
    Rng rng(31);
    KernelModel model;
    model.centers = Vector::LinSpaced(9, 0.0, 4.0);
    model.length_scales.sigma = Vector{{0.8, 1.4}};
    model.coeffs.resize(9, 2);
    for (Index r = 0; r < 9; ++r)
        for (Index c = 0; c < 2; ++c) model.coeffs(r, c) = rng.uniform(-1.0, 1.0);

    const Evaluation ev = evaluate(model, model.centers);
    for (Index d = 0; d < 2; ++d) {
        const GramPair g = gram(model.centers, model.centers, model.length_scales.sigma[d]);
        const Vector expected = g.K * model.coeffs.col(d);
        CHECK((ev.states.col(d) - expected).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("evaluate derivative matches finite differences of the state output") {
    Rng rng(32);
    KernelModel model;
    model.centers = Vector::LinSpaced(12, 0.0, 5.0);
    model.length_scales.sigma = Vector{{1.0}};
    model.coeffs.resize(12, 1);
    for (Index r = 0; r < 12; ++r) model.coeffs(r, 0) = rng.uniform(-1.0, 1.0);

    const Vector query = Vector::LinSpaced(40, 0.3, 4.7);
    const Evaluation ev = evaluate(model, query);
    const double h = 1e-5;
    Vector qp = query.array() + h;
    Vector qm = query.array() - h;
    const Evaluation evp = evaluate(model, qp);
    const Evaluation evm = evaluate(model, qm);
    const Matrix fd = (evp.states - evm.states) / (2 * h);
    CHECK((fd - ev.derivs).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("lemma 1 bounds") {
    ObservationOperator id = make_observation_operator("identity", 3);

    SUBCASE("zero error gives the zero triple") {
        const Matrix x = Matrix::Random(20, 3);
        const Lemma1Bounds b = lemma1_bounds(x, x, id);
        CHECK(b.lower == 0.0);
        CHECK(b.risk == 0.0);
        CHECK(b.upper == 0.0);
    }

    SUBCASE("identity operator doubles the lower bound exactly") {
        const Matrix x = Matrix::Random(20, 3);
        const Matrix y = Matrix::Random(20, 3);
        const Lemma1Bounds b = lemma1_bounds(x, y, id);
        CHECK(b.risk == doctest::Approx(2.0 * b.lower));
        CHECK(b.upper == doctest::Approx(2.0 * b.lower));
    }

    SUBCASE("sandwich holds on randomized trials") {
        Rng rng(77);
        for (int trial = 0; trial < 1000; ++trial) {
            const Index d = 1 + static_cast<Index>(rng.uniform() * 5.0);
            const Index p = 1 + static_cast<Index>(rng.uniform() * 5.0);
            const Index n = 5 + static_cast<Index>(rng.uniform() * 40.0);
            Matrix x(n, d), y(n, d);
            ObservationOperator obs;
            obs.H.resize(p, d);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < d; ++j) {
                    x(i, j) = rng.normal();
                    y(i, j) = rng.normal();
                }
            for (Index i = 0; i < p; ++i)
                for (Index j = 0; j < d; ++j) obs.H(i, j) = rng.normal();
            const Lemma1Bounds b = lemma1_bounds(x, y, obs);
            CHECK(b.lower <= b.risk);
            CHECK(b.risk <= b.upper);
        }
    }

    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(lemma1_bounds(Matrix::Zero(3, 2), Matrix::Zero(4, 2),
                                      make_observation_operator("identity", 2)),
                        InvalidInputError);
    }
}

TEST_CASE("prior spec validation") {
    PriorSpec p;
    p.monotone = {{5, +1}};
    CHECK_THROWS_AS(p.validate(3), InvalidParameterError);
    p.monotone = {{1, 2}};
    CHECK_THROWS_AS(p.validate(3), InvalidParameterError);
    p.monotone = {{1, -1}};
    CHECK_NOTHROW(p.validate(3));
    p.gamma = -1.0;
    CHECK_THROWS_AS(p.validate(3), InvalidParameterError);
}
