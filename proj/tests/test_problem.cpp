#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "mflab/problem.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

namespace {

// Test-only alternative complement basis: Gram-Schmidt over the
// measurements followed by *random Gaussian* completions instead of the
// canonical ones. Spans the same complement, in a different basis.
std::vector<Matrix> random_complement_basis(const std::vector<Matrix>& meas,
                                            std::uint64_t seed) {
    const int m = static_cast<int>(meas.front().rows());
    const int mp = static_cast<int>(meas.front().cols());
    const int dim = m * mp;
    rng::Stream stream(seed);
    std::vector<Eigen::VectorXd> ortho;
    std::vector<Matrix> basis;
    auto push = [&](Eigen::VectorXd v, bool keep) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : ortho) v -= q.dot(v) * q;
        if (v.norm() < 1e-10) return;
        v /= v.norm();
        ortho.push_back(v);
        if (keep) {
            Matrix b(m, mp);
            for (int i = 0; i < dim; ++i) b(i / mp, i % mp) = v(i);
            basis.push_back(b);
        }
    };
    for (const auto& a : meas) push(flatten(a), false);
    while (static_cast<int>(ortho.size()) < dim) {
        Eigen::VectorXd g(dim);
        for (int i = 0; i < dim; ++i) g(i) = stream.normal();
        push(g, true);
    }
    return basis;
}

}  // namespace

TEST_CASE("ground truth has requested rank and norm") {
    const Matrix w5 = make_ground_truth(5, 5, 1, 1.0, 17);
    CHECK(std::abs(w5.norm() - 1.0) < 1e-12);
    Eigen::JacobiSVD<Matrix> svd5(w5);
    CHECK(svd5.singularValues()(1) < 1e-12);  // rank one

    const Matrix w2 = make_ground_truth(2, 2, 2, 1.0, 3);
    CHECK(std::abs(w2.norm() - 1.0) < 1e-12);
    Eigen::JacobiSVD<Matrix> svd2(w2);
    CHECK(svd2.singularValues()(1) > 1e-8);  // full rank

    const Matrix w3 = make_ground_truth(3, 3, 2, 1.0, 7);
    Eigen::JacobiSVD<Matrix> svd3(w3);
    CHECK(svd3.singularValues()(2) < 1e-12);  // third singular value vanishes

    CHECK(make_ground_truth(5, 5, 1, 1.0, 17) == w5);  // deterministic
    CHECK_THROWS(make_ground_truth(5, 5, 0, 1.0, 1));
    CHECK_THROWS(make_ground_truth(5, 5, 6, 1.0, 1));
    CHECK_THROWS(make_ground_truth(5, 5, 1, 0.0, 1));
}

TEST_CASE("gaussian measurements are unit norm and distinct") {
    const auto meas = make_measurements(5, 5, 22, MeasurementKind::gaussian, 5);
    REQUIRE(meas.size() == 22);
    for (const auto& a : meas) CHECK(std::abs(a.norm() - 1.0) < 1e-12);
    for (std::size_t i = 0; i < meas.size(); ++i)
        for (std::size_t j = i + 1; j < meas.size(); ++j)
            CHECK((meas[i] - meas[j]).norm() > 1e-6);
}

TEST_CASE("indicator measurements exhaust the grid without replacement") {
    const auto meas = make_measurements(2, 2, 4, MeasurementKind::indicator, 9);
    REQUIRE(meas.size() == 4);
    std::set<std::pair<int, int>> seen;
    for (const auto& a : meas) {
        REQUIRE(a.sum() == 1.0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (a(i, j) == 1.0) seen.insert({i, j});
    }
    CHECK(seen.size() == 4);
    CHECK_THROWS_WITH(make_measurements(2, 2, 5, MeasurementKind::indicator, 1),
                      "too many indicator measurements");
}

TEST_CASE("complement basis size and orthogonality") {
    const auto meas = make_measurements(5, 5, 15, MeasurementKind::gaussian, 21);
    const auto basis = make_complement_basis(meas);
    CHECK(basis.size() == 10);  // 25 - rank(15 generic vectors)
    for (std::size_t i = 0; i < basis.size(); ++i) {
        CHECK(std::abs(basis[i].norm() - 1.0) <= 1e-10);
        for (std::size_t j = i + 1; j < basis.size(); ++j)
            CHECK(std::abs(frob_inner(basis[i], basis[j])) <= 1e-10);
        for (const auto& a : meas) CHECK(std::abs(frob_inner(basis[i], a)) <= 1e-10);
    }
}

TEST_CASE("complement basis of a full span is empty") {
    const auto meas = make_measurements(2, 3, 6, MeasurementKind::indicator, 2);
    CHECK(make_complement_basis(meas).empty());
}

TEST_CASE("duplicated measurements span only once") {
    const auto one = make_measurements(2, 2, 1, MeasurementKind::gaussian, 4);
    const std::vector<Matrix> dup = {one[0], one[0]};
    CHECK(make_complement_basis(dup).size() == 3);
}

TEST_CASE("instance invariants") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 33);
    for (int i = 0; i < inst.meta.n; ++i)
        CHECK(std::abs(inst.labels(i) - frob_inner(inst.measurements[i], inst.ground_truth)) <
              1e-12);
    CHECK(train_loss(inst.ground_truth, inst) == 0.0);
    CHECK(gen_loss(inst.ground_truth, inst) < 1e-24);
}

TEST_CASE("train loss hand value") {
    // 2x2, one indicator measurement E_11, W*_11 = 0.5 vs W_11 = 0.7.
    ProblemInstance inst;
    inst.ground_truth = Matrix::Zero(2, 2);
    inst.ground_truth(0, 0) = 0.5;
    Matrix e11 = Matrix::Zero(2, 2);
    e11(0, 0) = 1.0;
    inst.measurements = {e11};
    inst.labels.resize(1);
    inst.labels(0) = 0.5;
    inst.complement_basis = make_complement_basis(inst.measurements);
    inst.meta = {2, 2, 1, 0.5, 1, MeasurementKind::indicator, 0};
    Matrix w = Matrix::Zero(2, 2);
    w(0, 0) = 0.7;
    CHECK(train_loss(w, inst) == doctest::Approx(0.04).epsilon(1e-12));

    Matrix zero = Matrix::Zero(2, 2);
    CHECK(train_loss(zero, inst) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("gen loss along measurement and basis directions") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 8);
    const double nb = static_cast<double>(inst.complement_basis.size());

    // Perturbing along a measurement direction is invisible to gen loss.
    const Matrix w_meas = inst.ground_truth + 3.0 * inst.measurements[0];
    CHECK(gen_loss(w_meas, inst) < 1e-18);

    // Perturbing along a basis element costs c^2 / |B|.
    const double c = 0.37;
    const Matrix w_basis = inst.ground_truth + c * inst.complement_basis[0];
    CHECK(gen_loss(w_basis, inst) == doctest::Approx(c * c / nb).epsilon(1e-9));

    CHECK_THROWS_WITH(
        gen_loss(Matrix::Zero(2, 2), make_instance(2, 2, 1, 1.0, 4,
                                                   MeasurementKind::indicator, 3)),
        "generalization undefined: measurements span the space");
}

TEST_CASE("losses are invariant under list permutations") {
    auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 12);
    rng::Stream s(99);
    Matrix w(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) w(i, j) = s.normal();
    const double tl = train_loss(w, inst);
    const double gl = gen_loss(w, inst);

    auto permuted = inst;
    std::reverse(permuted.measurements.begin(), permuted.measurements.end());
    permuted.labels = inst.labels.reverse();
    std::reverse(permuted.complement_basis.begin(), permuted.complement_basis.end());
    CHECK(train_loss(w, permuted) == doctest::Approx(tl).epsilon(1e-12));
    CHECK(gen_loss(w, permuted) == doctest::Approx(gl).epsilon(1e-12));
}

TEST_CASE("basis independence of the generalization loss") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 51);
    auto alt = inst;
    alt.complement_basis = random_complement_basis(inst.measurements, 1234);
    REQUIRE(alt.complement_basis.size() == inst.complement_basis.size());

    rng::Stream s(7);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix w(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) w(i, j) = s.normal();
        const double a = gen_loss(w, inst);
        const double b = gen_loss(w, alt);
        CHECK(std::abs(a - b) <= 1e-9 * std::max(a, b));
    }
}

TEST_CASE("projection decomposition identity") {
    const auto inst = make_instance(5, 5, 1, 1.0, 15, MeasurementKind::gaussian, 60);
    // Orthonormalize the measurements for the span projector.
    std::vector<Eigen::VectorXd> span;
    for (const auto& a : inst.measurements) {
        Eigen::VectorXd v = flatten(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : span) v -= q.dot(v) * q;
        if (v.norm() > 1e-10) span.push_back(v / v.norm());
    }
    rng::Stream s(3);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix w(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) w(i, j) = s.normal();
        const Eigen::VectorXd diff = flatten(w) - flatten(inst.ground_truth);
        double span_sq = 0.0;
        for (const auto& q : span) span_sq += q.dot(diff) * q.dot(diff);
        double perp_sq = 0.0;
        for (const auto& b : inst.complement_basis) {
            const double c = flatten(b).dot(diff);
            perp_sq += c * c;
        }
        CHECK(span_sq + perp_sq == doctest::Approx(diff.squaredNorm()).epsilon(1e-9));
    }
}

TEST_CASE("rip estimate on an isometry is zero") {
    const auto meas = make_measurements(3, 3, 9, MeasurementKind::indicator, 5);
    const auto est = estimate_rip(meas, 2, 500, 1);
    CHECK(est.delta_hat < 1e-12);
    CHECK(est.order == 2);
    CHECK(est.samples_used == 500);
}

TEST_CASE("rip estimate detects a single measurement's blind spots") {
    const auto meas = make_measurements(3, 3, 1, MeasurementKind::gaussian, 6);
    const auto est = estimate_rip(meas, 1, 20000, 2);
    CHECK(est.delta_hat >= 1.0 - 1e-6);  // some rank-1 W is nearly orthogonal to A_1
}

TEST_CASE("rip estimate is nondecreasing in samples for a fixed stream") {
    const auto meas = make_measurements(5, 5, 15, MeasurementKind::gaussian, 44);
    double prev = 0.0;
    for (int samples : {10, 100, 1000, 5000}) {
        const auto est = estimate_rip(meas, 2, samples, 77);
        CHECK(est.delta_hat >= prev);
        prev = est.delta_hat;
    }
    CHECK(prev > 0.0);
    CHECK(prev < 1.0);
}

TEST_CASE("instance json round trip") {
    const auto inst = make_instance(4, 3, 2, 2.5, 7, MeasurementKind::gaussian, 91);
    const auto back = instance_from_json(instance_to_json(inst));
    CHECK((back.ground_truth - inst.ground_truth).norm() == 0.0);
    CHECK(back.measurements.size() == inst.measurements.size());
    for (std::size_t i = 0; i < inst.measurements.size(); ++i)
        CHECK((back.measurements[i] - inst.measurements[i]).norm() == 0.0);
    CHECK((back.labels - inst.labels).norm() == 0.0);
    CHECK(back.complement_basis.size() == inst.complement_basis.size());
    CHECK(back.meta.seed == inst.meta.seed);
    CHECK(back.meta.kind == inst.meta.kind);
    CHECK(back.meta.b == inst.meta.b);
}
