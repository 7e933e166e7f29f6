#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mflab/diagnostics.hpp"
#include "mflab/harness.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

namespace {

double median_residual(const std::vector<SpectralProbe>& probes) {
    std::vector<double> r;
    for (const auto& p : probes)
        if (p.ok) r.push_back(p.rank_one_residual);
    std::sort(r.begin(), r.end());
    return r[r.size() / 2];
}

double median_gap(const std::vector<SpectralProbe>& probes) {
    std::vector<double> g;
    for (const auto& p : probes)
        if (p.ok) g.push_back(p.gap);
    std::sort(g.begin(), g.end());
    return g[g.size() / 2];
}

}  // namespace

TEST_CASE("iid oracle events are independent at 3 sigma") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 201);
    // 20 threshold pairs spread over the plausible loss range.
    rng::Stream s(5);
    int failures = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const double eps_t = 0.05 + 0.4 * s.uniform01();
        const double eps_g = 0.05 + 0.4 * s.uniform01();
        const auto probe =
            probe_independence_iid(inst, 0.2, eps_t, eps_g, 40000, rng::derive(55, rep));
        REQUIRE(probe.total == 40000);
        if (!probe.conditional_defined) continue;
        if (std::abs(probe.gap) > 3.0 * probe.standard_error) ++failures;
    }
    // 3-sigma misses on 20 independent checks are overwhelmingly unlikely
    // to exceed one.
    CHECK(failures <= 1);
}

TEST_CASE("probe counts are consistent and deterministic") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 202);
    FactorizationSpec spec;
    spec.depth = 2;
    spec.width = 5;
    spec.out_dim = 5;
    spec.in_dim = 5;
    PriorSpec prior;
    const auto a = probe_independence(spec, inst, prior, 0.3, 0.2, 20000, 7, 1);
    const auto b = probe_independence(spec, inst, prior, 0.3, 0.2, 20000, 7, 8);
    CHECK(a.joint == b.joint);
    CHECK(a.train_only == b.train_only);
    CHECK(a.gen_only == b.gen_only);
    CHECK(a.joint + a.train_only + a.gen_only + a.neither == a.total);
    CHECK(a.p_gen == doctest::Approx(static_cast<double>(a.joint + a.gen_only) / a.total));
    if (a.conditional_defined)
        CHECK(a.gap == doctest::Approx(a.p_gen_given_train - a.p_gen));
}

TEST_CASE("zero train acceptances flag the conditional as undefined") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 203);
    FactorizationSpec spec;
    spec.depth = 2;
    spec.width = 5;
    spec.out_dim = 5;
    spec.in_dim = 5;
    PriorSpec prior;
    const auto probe = probe_independence(spec, inst, prior, 1e-14, 0.2, 2000, 9);
    CHECK_FALSE(probe.conditional_defined);
    CHECK(probe.low_acceptance_warning);
    CHECK(probe.joint + probe.train_only == 0);
}

TEST_CASE("spectral probe of the identity") {
    const auto p = spectral_probe_of(Matrix::Identity(5, 5), 7);
    for (int i = 0; i < 5; ++i) CHECK(p.lyapunov(i) == 0.0);
    CHECK(p.gap == 0.0);
    CHECK(p.rank_one_residual == doctest::Approx(std::sqrt(4.0 / 5.0)).epsilon(1e-12));
    CHECK(p.effective_rank == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("spectral probe of a rank-one matrix") {
    Matrix w = Matrix::Zero(5, 5);
    rng::Stream s(11);
    Eigen::VectorXd u(5), v(5);
    for (int i = 0; i < 5; ++i) {
        u(i) = s.normal();
        v(i) = s.normal();
    }
    w = u * v.transpose();
    const auto p = spectral_probe_of(w, 3);
    CHECK(p.rank_one_residual < 1e-10);
    CHECK(p.effective_rank == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rank-one residual is scale invariant") {
    rng::Stream s(13);
    Matrix w(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) w(i, j) = s.normal();
    const double base = spectral_probe_of(w, 1).rank_one_residual;
    for (double scale : {1e-6, 1e6}) {
        const double scaled = spectral_probe_of(scale * w, 1).rank_one_residual;
        CHECK(scaled == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("lyapunov exponents agree with an independent eigen route") {
    // Shallow enough that the squared-condition Gram route keeps the small
    // singular values well above the f64 noise floor.
    const int depth = 5, factors = depth - 2;
    const auto probes = probe_spectrum(5, depth, false, 17, 3);
    // Recompute the products with the same streams and compare the
    // singular values against sqrt(eig(W^T W)).
    for (int t = 0; t < 3; ++t) {
        rng::Stream stream(rng::derive(17, 0x73706563ull, static_cast<std::uint64_t>(t)));
        Matrix cur = Matrix::Identity(5, 5);
        const double sd = 1.0 / std::sqrt(5.0);
        for (int f = 0; f < factors; ++f) {
            Matrix factor(5, 5);
            for (int c = 0; c < 5; ++c)
                for (int r = 0; r < 5; ++r) factor(r, c) = sd * stream.normal();
            cur = factor * cur;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cur.transpose() * cur);
        Eigen::VectorXd sv = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().reverse();
        for (int i = 0; i < 5; ++i) {
            const double lam = std::log(sv(i)) / factors;
            CHECK(std::abs(lam - probes[t].lyapunov(i)) < 1e-8);
        }
    }
}

TEST_CASE("mid-product residual concentrates with depth") {
    // Median residual decreases monotonically across probe depths.
    std::vector<double> depths, residuals;
    for (int d : {3, 5, 8, 12, 20}) {
        const auto probes = probe_spectrum(5, d, false, 19, 100);
        depths.push_back(d);
        residuals.push_back(median_residual(probes));
    }
    CHECK(spearman_rho(depths, residuals) == doctest::Approx(-1.0));
    // Long products develop a dominant direction.
    const auto deep = probe_spectrum(5, 52, true, 23, 100);
    CHECK(median_gap(deep) > 0.0);
    CHECK(median_residual(deep) < 0.05);
}

TEST_CASE("single-factor probe is just the svd of a gaussian matrix") {
    const auto probes = probe_spectrum(5, 3, false, 29, 50);
    for (const auto& p : probes) {
        CHECK(p.singular_values.size() == 5);
        for (int i = 0; i < 5; ++i)
            CHECK(p.lyapunov(i) == doctest::Approx(std::log(p.singular_values(i))));
    }
    CHECK(median_residual(probes) > 0.3);  // no product structure yet
}

TEST_CASE("end-to-end probes replay prior draws") {
    FactorizationSpec spec;
    spec.depth = 2;
    spec.width = 5;
    spec.out_dim = 5;
    spec.in_dim = 5;
    PriorSpec prior;
    prior.normalize = true;
    const auto probes = probe_end_to_end_rank(spec, prior, 31, 5);
    for (int t = 0; t < 5; ++t) {
        const auto ws =
            sample_prior(spec, prior, rng::derive(31, 0x73706563ull, static_cast<std::uint64_t>(t)));
        const auto direct = spectral_probe_of(forward(spec, ws), 1);
        CHECK(direct.rank_one_residual ==
              doctest::Approx(probes[t].rank_one_residual).epsilon(1e-12));
    }
}

TEST_CASE("end-to-end residual falls with depth under the normalized prior") {
    PriorSpec prior;
    prior.normalize = true;
    std::vector<double> medians;
    for (int d : {3, 10}) {
        FactorizationSpec spec;
        spec.depth = d;
        spec.width = 5;
        spec.out_dim = 5;
        spec.in_dim = 5;
        medians.push_back(median_residual(probe_end_to_end_rank(spec, prior, 37, 100)));
    }
    CHECK(medians[1] < medians[0]);
}

TEST_CASE("rank-one weights give a rank-one end-to-end product") {
    FactorizationSpec spec;
    spec.depth = 3;
    spec.width = 5;
    spec.out_dim = 5;
    spec.in_dim = 5;
    rng::Stream s(41);
    WeightSetting ws;
    for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd u(spec.layer_rows(j)), v(spec.layer_cols(j));
        for (int i = 0; i < u.size(); ++i) u(i) = s.normal();
        for (int i = 0; i < v.size(); ++i) v(i) = s.normal();
        ws.layers.push_back(u * v.transpose());
    }
    const auto p = spectral_probe_of(forward(spec, ws), 1);
    CHECK(p.rank_one_residual <= 1e-10);
}

TEST_CASE("effective rank pinned values") {
    CHECK(effective_rank(Matrix::Identity(5, 5)) == doctest::Approx(5.0).epsilon(1e-12));
    Matrix diag = Matrix::Zero(4, 4);
    diag(0, 0) = 1.0;
    diag(1, 1) = 1.0;
    CHECK(effective_rank(diag) == doctest::Approx(2.0).epsilon(1e-9));
    Matrix rank1 = Matrix::Zero(3, 3);
    rank1(1, 2) = 42.0;
    CHECK(effective_rank(rank1) == doctest::Approx(1.0).epsilon(1e-9));
}
