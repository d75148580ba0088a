#include <doctest.h>

#include <cmath>
#include <vector>

#include "bdqcd/cusum.hpp"
#include "bdqcd/random.hpp"

using namespace bdqcd;

namespace {
HypothesisSet gaussian_set(std::initializer_list<double> means) {
    std::vector<DensityModel> ds;
    for (double m : means) ds.push_back(DensityModel::gaussian(m, 1.0));
    return HypothesisSet(std::move(ds));
}

// max(0, max_{1<=s<=t} sum_{i=s}^t l_i): the non-recursive CUSUM definition.
double brute_force_cusum(const std::vector<double>& llrs, std::size_t t) {
    double best = 0.0;
    for (std::size_t s = 0; s < t; ++s) {
        double acc = 0.0;
        for (std::size_t i = s; i < t; ++i) acc += llrs[i];
        best = std::max(best, acc);
    }
    return best;
}
}  // namespace

TEST_CASE("scalar update examples") {
    ScalarCusum c;
    CHECK(c.update(0.3) == doctest::Approx(0.3));
    c.reset();
    c.update(0.2);
    CHECK(c.update(-0.5) == doctest::Approx(0.0));

    SUBCASE("stream value equals the brute-force definition") {
        ScalarCusum s;
        std::vector<double> stream{1.0, -2.0, 1.5, 0.5};
        for (double l : stream) s.update(l);
        CHECK(s.value() == doctest::Approx(2.0));
        CHECK(s.value() == doctest::Approx(brute_force_cusum(stream, stream.size())));
    }
}

TEST_CASE("scalar cusum stays nonnegative on random streams") {
    RandomStream rng(5);
    ScalarCusum c;
    for (int i = 0; i < 1000; ++i) {
        c.update(rng.normal() - 0.2);
        CHECK(c.value() >= 0.0);
    }
    c.reset();
    CHECK(c.value() == 0.0);
}

TEST_CASE("matrix update equals brute force per entry over 200 steps") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto matrix = CusumMatrix::full(2);
    RandomStream rng(99);
    std::vector<std::vector<double>> llr_streams(6);
    const std::pair<int, int> pairs[] = {{1, 0}, {1, 2}, {2, 0}, {2, 1}};
    for (int step = 1; step <= 200; ++step) {
        const double x = hs.density(1).sample(rng);
        matrix.update(hs, x);
        int pi = 0;
        for (auto [q, j] : pairs)
            llr_streams[pi++].push_back(hs.log_likelihood_ratio(q, j, x));
        pi = 0;
        for (auto [q, j] : pairs) {
            const double expected =
                brute_force_cusum(llr_streams[pi++], static_cast<std::size_t>(step));
            CHECK(matrix.entry(q, j) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("negative LLRs clamp entries at zero") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto matrix = CusumMatrix::full(2);
    // x = -1 keeps every row-2 LLR and the (1,0) LLR negative
    matrix.update(hs, -1.0);
    CHECK(matrix.entry(1, 0) == 0.0);
    CHECK(matrix.entry(2, 0) == 0.0);
    CHECK(matrix.entry(2, 1) == 0.0);
    auto snap = matrix.row_min();
    CHECK(snap.value(1) == 0.0);
    CHECK(snap.value(2) == 0.0);
}

TEST_CASE("Q = 1 matrix is the scalar CUSUM") {
    auto hs = gaussian_set({0.0, 1.0});
    auto matrix = CusumMatrix::full(1);
    ScalarCusum scalar;
    RandomStream rng(123);
    for (int i = 0; i < 300; ++i) {
        const double x = rng.normal(0.7, 1.0);
        matrix.update(hs, x);
        scalar.update(hs.log_likelihood_ratio(1, 0, x));
        CHECK(matrix.entry(1, 0) == doctest::Approx(scalar.value()).epsilon(1e-14));
    }
}

TEST_CASE("row minima and acceptance checks") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    RowMinSnapshot snap;
    snap.values = {9.3, 2.1};
    auto accepted = acceptance_time_check(snap, 9.21);
    REQUIRE(accepted.size() == 1);
    CHECK(accepted[0] == 1);

    snap.values = {9.3, 9.3};
    accepted = acceptance_time_check(snap, 9.21);
    REQUIRE(accepted.size() == 2);  // ties are surfaced, not resolved here

    snap.values = {1.0, 2.0};
    CHECK(acceptance_time_check(snap, 9.21).empty());
    CHECK_THROWS_AS(acceptance_time_check(snap, 0.0), std::invalid_argument);
}

TEST_CASE("reduced mode maintains only the closest-alternative entries") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto alts = hs.closest_alternatives();
    auto reduced = CusumMatrix::reduced(alts);
    auto full = CusumMatrix::full(2);
    RandomStream rng(17);
    for (int i = 0; i < 100; ++i) {
        const double x = hs.density(1).sample(rng);
        reduced.update(hs, x);
        full.update(hs, x);
        // maintained entries match the full recursion
        CHECK(reduced.entry(1, 0) == doctest::Approx(full.entry(1, 0)));
        CHECK(reduced.entry(2, 1) == doctest::Approx(full.entry(2, 1)));
        // the rest of the row is conceptually +infinity
        CHECK(std::isinf(reduced.entry(1, 2)));
        // the reduced row minimum is the single maintained entry
        CHECK(reduced.row_min().value(1) == doctest::Approx(full.entry(1, 0)));
        CHECK(reduced.row_min().value(1) >= full.row_min().value(1));
    }
    CHECK_THROWS_AS(reduced.entry(1, 1), std::invalid_argument);
}

TEST_CASE("reset returns every entry to exactly zero") {
    auto hs = gaussian_set({0.0, 1.0, 3.0});
    auto matrix = CusumMatrix::full(2);
    matrix.update(hs, 2.0);
    matrix.reset();
    for (auto [q, j] : {std::pair{1, 0}, std::pair{1, 2}, std::pair{2, 0}, std::pair{2, 1}})
        CHECK(matrix.entry(q, j) == 0.0);
}
