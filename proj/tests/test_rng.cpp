#include "segtraj/rng.hpp"

#include <cmath>
#include <doctest.h>
#include <set>
#include <vector>

using namespace segtraj;

TEST_SUITE("rng") {

TEST_CASE("same seed, same sequence") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("streams are order-independent") {
    Rng s0 = Rng::stream(9, 0);
    const std::uint64_t first = s0.next();
    Rng s1 = Rng::stream(9, 1);
    (void)s1.next();
    Rng s0_again = Rng::stream(9, 0);
    CHECK(s0_again.next() == first);
    Rng other = Rng::stream(9, 1);
    CHECK(Rng::stream(9, 0).next() != other.next());
}

TEST_CASE("uniform01 stays in the half-open interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_below covers the range") {
    Rng rng(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("normal moments") {
    Rng rng(13);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);        // ~6 standard errors
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("categorical matches its weights") {
    Rng rng(17);
    const std::vector<double> weights{1.0, 3.0, 0.0, 6.0};
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(weights)];
    CHECK(counts[2] == 0);
    CHECK(std::abs(counts[0] / double(n) - 0.1) < 0.01);
    CHECK(std::abs(counts[1] / double(n) - 0.3) < 0.01);
    CHECK(std::abs(counts[3] / double(n) - 0.6) < 0.01);
}

TEST_CASE("mix64 is a bijection on small samples and not identity") {
    std::set<std::uint64_t> out;
    for (std::uint64_t x = 0; x < 1000; ++x) out.insert(mix64(x));
    CHECK(out.size() == 1000);
    CHECK(mix64(0) != 0);
}

}
