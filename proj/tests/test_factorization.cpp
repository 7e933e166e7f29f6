#include "doctest.h"

#include <cmath>

#include "mflab/factorization.hpp"
#include "mflab/problem.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

namespace {

FactorizationSpec make_spec(int depth, int width, int m, int mp, ActivationKind act) {
    FactorizationSpec spec;
    spec.depth = depth;
    spec.width = width;
    spec.out_dim = m;
    spec.in_dim = mp;
    spec.activation.kind = act;
    return spec;
}

WeightSetting random_weights(const FactorizationSpec& spec, std::uint64_t seed,
                             double scale = 0.5) {
    rng::Stream s(seed);
    WeightSetting ws;
    ws.layers.resize(spec.depth);
    for (int j = 0; j < spec.depth; ++j) {
        ws.layers[j].resize(spec.layer_rows(j), spec.layer_cols(j));
        for (int c = 0; c < ws.layers[j].cols(); ++c)
            for (int r = 0; r < ws.layers[j].rows(); ++r)
                ws.layers[j](r, c) = scale * s.normal();
    }
    return ws;
}

}  // namespace

TEST_CASE("forward composes plain products under linear activation") {
    const auto spec = make_spec(2, 5, 3, 4, ActivationKind::linear);
    const auto ws = random_weights(spec, 1);
    const Matrix expected = ws.layers[1] * ws.layers[0];
    CHECK((forward(spec, ws) - expected).norm() == 0.0);
}

TEST_CASE("forward of all-zero tanh weights is zero") {
    const auto spec = make_spec(3, 4, 2, 2, ActivationKind::tanh);
    WeightSetting ws;
    for (int j = 0; j < 3; ++j)
        ws.layers.push_back(Matrix::Zero(spec.layer_rows(j), spec.layer_cols(j)));
    CHECK(forward(spec, ws).norm() == 0.0);
}

TEST_CASE("leaky relu scalar chain") {
    auto spec = make_spec(2, 1, 1, 1, ActivationKind::leaky_relu);
    spec.activation.slope = 0.2;
    WeightSetting ws;
    ws.layers = {Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0)};
    CHECK(forward(spec, ws)(0, 0) == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("forward rejects shape mismatches") {
    const auto spec = make_spec(2, 5, 3, 4, ActivationKind::linear);
    auto ws = random_weights(spec, 2);
    ws.layers[0].resize(2, 2);
    CHECK_THROWS(forward(spec, ws));
    FactorizationSpec narrow = spec;
    narrow.width = 2;  // below min(m, m')
    CHECK_THROWS(narrow.validate());
}

TEST_CASE("negating the last layer negates the output for every activation") {
    for (auto act : {ActivationKind::linear, ActivationKind::tanh, ActivationKind::leaky_relu}) {
        const auto spec = make_spec(3, 5, 4, 4, act);
        const auto ws = random_weights(spec, 3);
        auto flipped = ws;
        flipped.layers.back() = -flipped.layers.back();
        CHECK((forward(spec, flipped) + forward(spec, ws)).norm() == 0.0);
    }
}

TEST_CASE("activation derivative conventions") {
    Activation lrelu{ActivationKind::leaky_relu, 0.2};
    CHECK(lrelu.deriv(0.0) == 1.0);  // pinned convention
    CHECK(lrelu.deriv(-1.0) == 0.2);
    CHECK(lrelu.deriv(1.0) == 1.0);
    Activation th{ActivationKind::tanh, 0.2};
    CHECK(th.apply(-0.3) == -th.apply(0.3));  // anti-symmetry
    CHECK(th.deriv(0.0) == 1.0);
}

TEST_CASE("prior scaling matches Kaiming variance") {
    const auto spec = make_spec(2, 5, 5, 5, ActivationKind::linear);
    PriorSpec prior;  // gaussian, nu = 1
    const int draws = 10000;
    double sum_sq = 0.0;
    std::int64_t count = 0;
    for (int t = 0; t < draws; ++t) {
        const auto ws = sample_prior(spec, prior, rng::derive(5, t));
        sum_sq += ws.layers[0].squaredNorm();
        count += ws.layers[0].size();
    }
    const double var = sum_sq / static_cast<double>(count);
    const double expected = 1.0 / 5.0;  // nu / m'
    const double se = expected * std::sqrt(2.0 / static_cast<double>(count));
    CHECK(std::abs(var - expected) < 3.0 * se);
}

TEST_CASE("uniform prior draws stay inside the scaled bounds") {
    const auto spec = make_spec(3, 4, 4, 4, ActivationKind::linear);
    PriorSpec prior;
    prior.base = BaseKind::uniform;
    prior.param = 1.0;
    for (int t = 0; t < 50; ++t) {
        const auto ws = sample_prior(spec, prior, rng::derive(6, t));
        for (int j = 0; j < spec.depth; ++j) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_cols(j)));
            CHECK(ws.layers[j].cwiseAbs().maxCoeff() <= bound);
        }
    }
}

TEST_CASE("normalized prior yields unit-norm linear products") {
    for (int depth : {2, 5, 10}) {
        const auto spec = make_spec(depth, 5, 5, 5, ActivationKind::linear);
        PriorSpec prior;
        prior.normalize = true;
        for (int t = 0; t < 20; ++t) {
            const auto ws = sample_prior(spec, prior, rng::derive(7, depth, t));
            CHECK(std::abs(forward(spec, ws).norm() - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("prior output is symmetric around zero") {
    for (auto act : {ActivationKind::linear, ActivationKind::tanh}) {
        const auto spec = make_spec(3, 5, 3, 3, ActivationKind::linear);
        auto s2 = spec;
        s2.activation.kind = act;
        PriorSpec prior;
        const int draws = 20000;
        Matrix mean = Matrix::Zero(3, 3);
        Matrix mean_sq = Matrix::Zero(3, 3);
        for (int t = 0; t < draws; ++t) {
            const Matrix w = forward(s2, sample_prior(s2, prior, rng::derive(8, t)));
            mean += w;
            mean_sq += w.cwiseProduct(w);
        }
        mean /= draws;
        mean_sq /= draws;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double se = std::sqrt(mean_sq(i, j) / draws);
                CHECK(std::abs(mean(i, j)) < 4.0 * se);
            }
    }
}

TEST_CASE("kaiming scaling preserves product magnitude across widths") {
    PriorSpec prior;
    const int draws = 100000;
    double reference = -1.0;
    for (int k : {5, 20, 80}) {
        const auto spec = make_spec(2, k, 5, 5, ActivationKind::linear);
        double acc = 0.0;
        for (int t = 0; t < draws; ++t)
            acc += forward(spec, sample_prior(spec, prior, rng::derive(9, k, t))).squaredNorm();
        const double mean_norm_sq = acc / draws;
        if (reference < 0)
            reference = mean_norm_sq;
        else
            CHECK(std::abs(mean_norm_sq - reference) < 0.05 * reference);
    }
}

TEST_CASE("factorized losses equal losses of the multiplied-out product") {
    const auto inst = make_instance(4, 4, 1, 1.0, 10, MeasurementKind::gaussian, 13);
    const auto spec = make_spec(3, 6, 4, 4, ActivationKind::tanh);
    const auto ws = random_weights(spec, 21);
    const Matrix w = forward(spec, ws);
    CHECK(fact_train_loss(spec, ws, inst) == doctest::Approx(train_loss(w, inst)).epsilon(1e-12));
    CHECK(fact_gen_loss(spec, ws, inst) == doctest::Approx(gen_loss(w, inst)).epsilon(1e-12));
}

TEST_CASE("gradient vanishes at a realizable optimum") {
    // d = 2 linear with W_2 W_1 equal to the ground truth exactly.
    const auto spec = make_spec(2, 4, 4, 4, ActivationKind::linear);
    const auto inst = make_instance(4, 4, 1, 1.0, 10, MeasurementKind::gaussian, 31);
    WeightSetting ws;
    ws.layers = {Matrix::Identity(4, 4), inst.ground_truth};
    REQUIRE(fact_train_loss(spec, ws, inst) < 1e-24);
    const auto grad = loss_gradient(spec, ws, inst);
    double norm_sq = 0.0;
    for (const auto& g : grad.layers) norm_sq += g.squaredNorm();
    CHECK(std::sqrt(norm_sq) <= 1e-10);
}

TEST_CASE("gradient matches central finite differences") {
    const auto inst = make_instance(2, 2, 1, 1.0, 3, MeasurementKind::gaussian, 41);
    for (auto act : {ActivationKind::linear, ActivationKind::tanh, ActivationKind::leaky_relu}) {
        const auto spec = make_spec(3, 2, 2, 2, act);
        auto ws = random_weights(spec, 55, 0.7);
        const auto grad = loss_gradient(spec, ws, inst);
        const double h = 1e-5;
        for (int j = 0; j < spec.depth; ++j)
            for (int c = 0; c < ws.layers[j].cols(); ++c)
                for (int r = 0; r < ws.layers[j].rows(); ++r) {
                    const double saved = ws.layers[j](r, c);
                    ws.layers[j](r, c) = saved + h;
                    const double up = fact_train_loss(spec, ws, inst);
                    ws.layers[j](r, c) = saved - h;
                    const double down = fact_train_loss(spec, ws, inst);
                    ws.layers[j](r, c) = saved;
                    const double fd = (up - down) / (2.0 * h);
                    const double scale = std::max({std::abs(fd), std::abs(grad.layers[j](r, c)),
                                                   1e-8});
                    CHECK(std::abs(grad.layers[j](r, c) - fd) / scale < 1e-5);
                }
    }
}

TEST_CASE("d=2 linear gradient closed form on scalars") {
    // L = (a w2 w1 - y)^2  =>  dL/dw2 = 2 (a w2 w1 - y) a w1.
    ProblemInstance inst;
    inst.ground_truth = Matrix::Constant(1, 1, 0.8);
    inst.measurements = {Matrix::Constant(1, 1, 1.0)};
    inst.labels = Eigen::VectorXd::Constant(1, 0.8);
    inst.meta = {1, 1, 1, 0.8, 1, MeasurementKind::gaussian, 0};
    const auto spec = make_spec(2, 1, 1, 1, ActivationKind::linear);
    WeightSetting ws;
    ws.layers = {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, -0.5)};
    const auto grad = loss_gradient(spec, ws, inst);
    const double resid = -0.5 * 0.3 - 0.8;
    CHECK(grad.layers[1](0, 0) == doctest::Approx(2.0 * resid * 0.3).epsilon(1e-12));
    CHECK(grad.layers[0](0, 0) == doctest::Approx(2.0 * resid * -0.5).epsilon(1e-12));
}

TEST_CASE("f32 forward tracks f64 on bounded weights") {
    const auto spec = make_spec(10, 5, 5, 5, ActivationKind::tanh);
    const auto ws = random_weights(spec, 77, 0.3);
    std::vector<DenseMatrix<float>> layers32;
    for (const auto& w : ws.layers) layers32.push_back(w.cast<float>());
    DenseMatrix<float> a32, b32, out32;
    forward_into(spec, layers32, a32, b32, out32);
    const Matrix out64 = forward(spec, ws);
    const double rel = (out32.cast<double>() - out64).norm() / out64.norm();
    CHECK(rel < 1e-4);
}

TEST_CASE("sample_prior is deterministic in the seed") {
    const auto spec = make_spec(4, 5, 5, 5, ActivationKind::linear);
    PriorSpec prior;
    prior.normalize = true;
    const auto a = sample_prior(spec, prior, 123);
    const auto b = sample_prior(spec, prior, 123);
    for (int j = 0; j < spec.depth; ++j) CHECK((a.layers[j] - b.layers[j]).norm() == 0.0);
}
