#include <doctest.h>

#include "maat/common.hpp"
#include "maat/kernel.hpp"

#include <cmath>

using namespace maat;

TEST_CASE("rbf kernel analytic values") {
    CHECK(rbf_kernel(3.7, 3.7, 0.5) == doctest::Approx(1.0));
    CHECK(rbf_kernel(0.0, 1.0, 1.0) == doctest::Approx(std::exp(-0.5)));
    CHECK(rbf_kernel(0.0, 2.0 * std::sqrt(2.0), 2.0) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(rbf_kernel(0.0, 0.0, 0.0), InvalidParameterError);
    CHECK_THROWS_AS(rbf_kernel(0.0, 0.0, -1.0), InvalidParameterError);
}

TEST_CASE("rbf kernel derivative analytic values") {
    CHECK(rbf_kernel_dt(2.0, 2.0, 1.0) == doctest::Approx(0.0));
    CHECK(rbf_kernel_dt(1.0, 0.0, 1.0) == doctest::Approx(-std::exp(-0.5)));
    CHECK(rbf_kernel_dt(0.0, 1.0, 1.0) == doctest::Approx(std::exp(-0.5)));
    CHECK_THROWS_AS(rbf_kernel_dt(0.0, 0.0, 0.0), InvalidParameterError);
}

TEST_CASE("derivative identity against central differences") {
    Rng rng(42);
    const double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform(-5.0, 5.0);
        const double tc = rng.uniform(-5.0, 5.0);
        const double sigma = rng.uniform(0.3, 3.0);
        const double fd = (rbf_kernel(t + h, tc, sigma) - rbf_kernel(t - h, tc, sigma)) / (2 * h);
        CHECK(std::abs(fd - rbf_kernel_dt(t, tc, sigma)) < 1e-6);
    }
}

TEST_CASE("Kdot entries satisfy the Gaussian derivative identity") {
    Rng rng(7);
    Vector eval(5), centers(4);
    for (Index i = 0; i < 5; ++i) eval[i] = rng.uniform(0.0, 10.0);
    for (Index j = 0; j < 4; ++j) centers[j] = rng.uniform(0.0, 10.0);
    std::sort(eval.begin(), eval.end());
    std::sort(centers.begin(), centers.end());
    const double sigma = 0.8;
    const GramPair g = gram(eval, centers, sigma);
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 4; ++j) {
            CHECK(g.Kdot(i, j) ==
                  doctest::Approx(-(eval[i] - centers[j]) / (sigma * sigma) * g.K(i, j)));
            CHECK(g.K(i, j) > 0.0);
            CHECK(g.K(i, j) <= 1.0);
        }
}

TEST_CASE("gram on coincident grids: symmetric, unit diagonal, zero Kdot diagonal") {
    Vector t(2);
    t << 0.0, 1.0;
    const GramPair g = gram(t, t, 1.0);
    CHECK(g.K(0, 0) == doctest::Approx(1.0));
    CHECK(g.K(1, 1) == doctest::Approx(1.0));
    CHECK(g.K(0, 1) == doctest::Approx(std::exp(-0.5)));
    CHECK(g.K(1, 0) == doctest::Approx(std::exp(-0.5)));
    CHECK(g.Kdot(0, 0) == 0.0);
    CHECK(g.Kdot(1, 1) == 0.0);

    Vector grid = Vector::LinSpaced(17, 0.0, 4.0);
    const GramPair gg = gram(grid, grid, 0.7);
    CHECK((gg.K - gg.K.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (Index i = 0; i < grid.size(); ++i) CHECK(gg.K(i, i) == doctest::Approx(1.0));

    CHECK_THROWS_AS(gram(Vector(), grid, 1.0), InvalidInputError);
}

TEST_CASE("kernel decays monotonically in |t - t'|") {
    const double sigma = 1.3;
    double prev = rbf_kernel(0.0, 0.0, sigma);
    for (int k = 1; k <= 50; ++k) {
        const double cur = rbf_kernel(0.1 * k, 0.0, sigma);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("initial length scale is the time-grid standard deviation") {
    Vector t = Vector::LinSpaced(500, 0.0, 99.8);
    const double mean = t.mean();
    const double expected = std::sqrt((t.array() - mean).square().mean());
    CHECK(initial_length_scale(t) == doctest::Approx(expected));
}
