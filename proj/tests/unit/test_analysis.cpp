#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "broker/analysis.hpp"

using namespace broker;

TEST_CASE("minmax normalize") {
    std::vector<double> a{0, 5, 10};
    CHECK(minmax_normalize(a) == std::vector<double>{0, 0.5, 1});
    std::vector<double> c{7, 7, 7};
    CHECK(minmax_normalize(c) == std::vector<double>{0.5, 0.5, 0.5});
    std::vector<double> two{-2, 2};
    CHECK(minmax_normalize(two) == std::vector<double>{0, 1});
    CHECK_THROWS_AS(minmax_normalize({}), ValidationError);
}

TEST_CASE("minmax normalize is affine invariant") {
    std::vector<double> x{3, -1, 8, 4, 0};
    std::vector<double> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = 2.5 * x[i] - 7.0;
    std::vector<double> nx = minmax_normalize(x), nax = minmax_normalize(ax);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(nx[i] == doctest::Approx(nax[i]).epsilon(1e-12));
}

TEST_CASE("pearson: perfect linear and errors") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{3, 5, 7, 9, 11};  // y = 2x + 1
    CorrelationResult r = pearson(x, y);
    CHECK(r.coefficient == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.p_value == 0.0);

    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ValidationError);
    std::vector<double> flat{2, 2, 2, 2, 2};
    CHECK_THROWS_AS(pearson(x, flat), ValidationError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                    ValidationError);
}

TEST_CASE("spearman rank invariance on monotone nonlinear data") {
    std::vector<double> x{-3, -1, 0, 1, 2, 3}, y;
    for (double v : x) y.push_back(v * v * v);
    CHECK(spearman(x, y).coefficient == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pearson(x, y).coefficient < 1.0);
}

TEST_CASE("spearman equals pearson on ranks") {
    std::vector<double> x{4, 1, 1, 7, 3, 9, 3}, y{2, 8, 8, 1, 5, 5, 0};
    CorrelationResult s = spearman(x, y);
    CorrelationResult p = pearson(detail::ranks(x), detail::ranks(y));
    CHECK(s.coefficient == doctest::Approx(p.coefficient).epsilon(1e-14));
    CHECK(s.p_value == doctest::Approx(p.p_value).epsilon(1e-14));
}

TEST_CASE("kendall tau on the known 4-point dataset") {
    std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
    CHECK(kendall(x, y).coefficient == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("reference fixtures to 1e-10") {
    struct Fixture {
        std::vector<double> x, y;
        double pr, pp, sr, sp, kr, kp;
    };
    // reference statistics computed with an independent statistics library
    std::vector<Fixture> fixtures{
        {{10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5},
         {8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68},
         0.81642051634483959, 0.002169628873078804,
         0.81818181818181823, 0.0020831448404786904,
         0.63636363636363635, 0.0064350912315591169},
        {{1, 2, 2, 3, 4, 5, 5, 6},
         {2, 1, 3, 3, 5, 4, 6, 6},
         0.87959899426708499, 0.0039789185190504915,
         0.89024390243902451, 0.0030392955684888081,
         0.76923076923076938, 0.010747577580460075},
        {{1, 2, 3, 4, 5, 6, 7},
         {13, 9, 8, 6, 5, 3, 1},
         -0.98515094683997617, 5.1196139759998289e-05,
         -1.0, 0.0,
         -1.0, 0.0016107949638926159},
    };
    for (const Fixture& f : fixtures) {
        CorrelationResult p = correlate(f.x, f.y, CorrelationMethod::Pearson);
        CorrelationResult s = correlate(f.x, f.y, CorrelationMethod::Spearman);
        CorrelationResult k = correlate(f.x, f.y, CorrelationMethod::Kendall);
        CHECK(std::abs(p.coefficient - f.pr) < 1e-10);
        CHECK(std::abs(p.p_value - f.pp) < 1e-10);
        CHECK(std::abs(s.coefficient - f.sr) < 1e-10);
        CHECK(std::abs(s.p_value - f.sp) < 1e-10);
        CHECK(std::abs(k.coefficient - f.kr) < 1e-10);
        CHECK(std::abs(k.p_value - f.kp) < 1e-10);
    }
}

TEST_CASE("kendall matches pair enumeration on all permutations up to length 6") {
    // brute force: tau-b from direct pair counting with tie terms
    auto brute = [](const std::vector<double>& x, const std::vector<double>& y) {
        std::size_t n = x.size();
        double c = 0, d = 0, extra_x = 0, extra_y = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double a = x[i] - x[j], b = y[i] - y[j];
                if (a == 0 && b == 0) continue;
                if (a == 0) { ++extra_x; continue; }
                if (b == 0) { ++extra_y; continue; }
                (a * b > 0 ? c : d) += 1;
            }
        double nx = c + d + extra_x, ny = c + d + extra_y;
        return (c - d) / std::sqrt(nx * ny);
    };
    for (std::size_t n : {3u, 4u, 5u, 6u}) {
        std::vector<double> x(n), perm(n);
        std::iota(x.begin(), x.end(), 1.0);
        std::iota(perm.begin(), perm.end(), 1.0);
        do {
            double got = kendall(x, perm).coefficient;
            CHECK(got == doctest::Approx(brute(x, perm)).epsilon(1e-12));
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST_CASE("estimation error series") {
    std::vector<double> f{110, 90, 5, 0}, a{100, 100, 0, 0};
    std::vector<double> e = estimation_error_series(f, a);
    CHECK(e[0] == doctest::Approx(10.0));
    CHECK(e[1] == doctest::Approx(-10.0));
    CHECK(std::isinf(e[2]));
    CHECK(e[3] == 0.0);
    CHECK_THROWS_AS(estimation_error_series(f, std::vector<double>{1}), ValidationError);
}

TEST_CASE("compare strategies") {
    std::vector<double> s1{10, 20, 30}, s2{10, 20, 30}, best{30, 40, 50};
    ComparisonTable t = compare_strategies({{"a", s1}, {"b", s2}, {"best", best}});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].highest == 30);
    CHECK(t.rows[0].lowest == 10);
    CHECK(t.rows[0].mean == doctest::Approx(20));
    // identical series give identical rows
    CHECK(t.rows[0].highest == t.rows[1].highest);
    CHECK(t.rows[0].mean == t.rows[1].mean);
    // pointwise-dominant series dominates in lowest
    CHECK(t.rows[2].lowest >= t.rows[0].lowest);
    // invariant: highest >= mean >= lowest
    for (const StrategySummary& r : t.rows) {
        CHECK(r.highest >= r.mean);
        CHECK(r.mean >= r.lowest);
    }
    ComparisonTable single = compare_strategies({{"x", {5.0}}});
    CHECK(single.rows[0].highest == single.rows[0].lowest);
    CHECK(single.rows[0].highest == single.rows[0].mean);
    CHECK_THROWS_AS(compare_strategies({{"x", {1.0}}, {"y", {1.0, 2.0}}}), ValidationError);
}

TEST_CASE("series difference") {
    std::vector<double> a{5, 7}, b{2, 10};
    CHECK(series_difference(a, b) == std::vector<double>{3, -3});
}
