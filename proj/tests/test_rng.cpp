#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

TEST_CASE("derive is order and component sensitive") {
    CHECK(rng::derive(1, 2, 3) != rng::derive(1, 3, 2));
    CHECK(rng::derive(1, 2) != rng::derive(2, 1));
    CHECK(rng::derive(0, 0) != rng::derive(0, 0, 0));
    CHECK(rng::derive(7, 1, 0) == rng::derive(7, 1, 0));
}

TEST_CASE("streams are reproducible and key-disjoint") {
    rng::Stream a(42), b(42), c(43);
    bool all_equal = true, any_equal_across = false;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t va = a.bits();
        all_equal = all_equal && (va == b.bits());
        any_equal_across = any_equal_across || (va == c.bits());
    }
    CHECK(all_equal);
    CHECK_FALSE(any_equal_across);
}

TEST_CASE("uniform01 lies in [0,1) with mean near 1/2") {
    rng::Stream s(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal moments") {
    rng::Stream s(11);
    const int n = 400000;
    double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        sum += x;
        sum_sq += x * x;
        sum_4 += x * x * x * x;
    }
    CHECK(std::abs(sum / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(sum_sq / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(sum_4 / n - 3.0) < 3.0 * std::sqrt(96.0 / n));  // Var(x^4) = 96
}

TEST_CASE("below is unbiased over small ranges") {
    rng::Stream s(13);
    std::vector<int> counts(5, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<int>(s.below(5))];
    for (int c : counts) CHECK(std::abs(c - n / 5) < 5 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("parallel_chunks is schedule independent") {
    auto run = [](int threads) {
        return parallel_chunks<double>(1000, 37, threads,
                                       [](std::uint64_t lo, std::uint64_t hi, std::uint64_t) {
                                           double acc = 0;
                                           for (std::uint64_t i = lo; i < hi; ++i)
                                               acc += std::sqrt(static_cast<double>(i));
                                           return acc;
                                       });
    };
    const auto a = run(1);
    const auto b = run(8);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
