#include <doctest.h>

#include "maat/io.hpp"

#include <filesystem>

using namespace maat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "maat_io_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("doubles survive the 17-digit decimal round trip") {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const double v = std::exp(rng.uniform(-300.0, 300.0) * 0.1) *
                         (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.normal();
        const double back = std::stod(format_double(v));
        CHECK(back == v);
    }
}

TEST_CASE("kernel model round trip is bit exact") {
    TempDir tmp;
    Rng rng(2);
    KernelModel model;
    model.centers = Vector::LinSpaced(40, 0.0, 9.75);
    model.length_scales.sigma = Vector{{0.731234567890123, 2.0000000001}};
    model.coeffs.resize(40, 2);
    for (Index r = 0; r < 40; ++r)
        for (Index c = 0; c < 2; ++c) model.coeffs(r, c) = rng.normal() * 1e-3;

    const fs::path p = tmp.path / "model.txt";
    save_kernel_model(model, p);
    const KernelModel loaded = load_kernel_model(p);
    CHECK((loaded.centers - model.centers).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.length_scales.sigma - model.length_scales.sigma).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.coeffs - model.coeffs).cwiseAbs().maxCoeff() == 0.0);

    // loaded model evaluates identically
    const Vector q = Vector::LinSpaced(23, -1.0, 11.0);
    const Evaluation a = evaluate(model, q);
    const Evaluation b = evaluate(loaded, q);
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.derivs - b.derivs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset round trip preserves every matrix bit exactly") {
    TempDir tmp;
    GenConfig cfg = default_gen_config("seir");
    cfg.n_train = 60;
    cfg.n_val = 30;
    cfg.n_test = 30;
    cfg.seed = 11;
    const TimeSeriesDataset ds = generate_dataset("seir", cfg);
    save_dataset(ds, tmp.path / "ds");
    const TimeSeriesDataset back = load_dataset(tmp.path / "ds");
    CHECK(back.system_name == "seir");
    CHECK((back.train.times - ds.train.times).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.train.signals - ds.train.signals).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.train.snapshots - ds.train.snapshots).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.test.truth - ds.test.truth).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.observation.H - ds.observation.H).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.system.params - ds.system.params).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.config.seed == 11);
    CHECK(back.train.snapshot_indices == ds.train.snapshot_indices);

    CHECK_THROWS_AS(load_dataset(tmp.path / "nowhere"), Error);
}

TEST_CASE("estimate round trip") {
    TempDir tmp;
    Rng rng(3);
    const Vector t = Vector::LinSpaced(25, 0.0, 4.8);
    Matrix states(25, 3), derivs(25, 3);
    for (Index r = 0; r < 25; ++r)
        for (Index c = 0; c < 3; ++c) {
            states(r, c) = rng.normal();
            derivs(r, c) = rng.normal();
        }
    const fs::path p = tmp.path / "estimate_maat.csv";
    save_estimate("maat", t, states, derivs, p);
    const Estimate est = load_estimate(p);
    CHECK(est.method == "maat");
    CHECK((est.times - t).cwiseAbs().maxCoeff() == 0.0);
    CHECK((est.states - states).cwiseAbs().maxCoeff() == 0.0);
    CHECK((est.derivs - derivs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sparse model round trip") {
    TempDir tmp;
    const FeatureLibrary lib = make_library(2, 2);
    SparseDynamicsModel model;
    model.library = lib;
    model.xi = Matrix::Zero(lib.feature_count(), 2);
    model.xi(1, 0) = -0.25;
    model.xi(4, 1) = 0.125;
    const fs::path p = tmp.path / "model_sparse.txt";
    save_sparse_model(model, {"x", "y"}, p);
    const SparseDynamicsModel back = load_sparse_model(p);
    CHECK(back.library.exponents == lib.exponents);
    CHECK((back.xi - model.xi).cwiseAbs().maxCoeff() == 0.0);

    const std::string text = read_text_file(p);
    CHECK(text.find("dx/dt") != std::string::npos);
}

TEST_CASE("result tables serialize infinities and order rows stably") {
    ResultRow r;
    r.dataset = "seir";
    r.noise = "gaussian";
    r.method = "spline";
    r.seed = 3;
    r.state_mse = 1.25e-4;
    r.deriv_mse = std::numeric_limits<double>::infinity();
    r.rollout_mse = 2.0;
    const std::string csv = rows_to_csv({r});
    CHECK(csv.find("inf") != std::string::npos);
    CHECK(csv.find("seir,gaussian,spline,3,") != std::string::npos);
    const std::string lng = rows_to_long_csv({r});
    CHECK(lng.find("rollout_mse,2") != std::string::npos);
}

TEST_CASE("csv reader rejects malformed content") {
    TempDir tmp;
    write_text_file(tmp.path / "bad.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(tmp.path / "bad.csv"), Error);
    write_text_file(tmp.path / "bad2.csv", "a,b\n1,two\n");
    CHECK_THROWS_AS(read_csv(tmp.path / "bad2.csv"), Error);
}
