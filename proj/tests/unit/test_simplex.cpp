#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "copert/error.hpp"
#include "copert/simplex.hpp"
#include "generators.hpp"

using namespace copert;

namespace {

errc code_of(const auto& fn) {
    try {
        fn();
    } catch (const error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return errc::invalid_argument;
}

double brute_gini(const std::vector<double>& z) {
    double s = 0.0;
    for (double a : z) {
        for (double b : z) s += std::abs(a - b);
    }
    return s / (2.0 * static_cast<double>(z.size()));
}

}  // namespace

TEST_SUITE("simplex") {
    TEST_CASE("closure normalizes") {
        const auto z = closure({1, 1, 2});
        CHECK(z[0] == doctest::Approx(0.25));
        CHECK(z[1] == doctest::Approx(0.25));
        CHECK(z[2] == doctest::Approx(0.5));
        const auto v = closure({0, 0, 5});
        CHECK(v.values() == std::vector<double>{0, 0, 1});
    }

    TEST_CASE("closure rejects bad input") {
        CHECK(code_of([] { closure({0, 0, 0}); }) == errc::all_zero);
        CHECK(code_of([] { closure({1, -0.5, 1}); }) == errc::negative_entry);
    }

    TEST_CASE("closure is idempotent and lands on the simplex") {
        rng r(11);
        for (int t = 0; t < 200; ++t) {
            const auto v = gen::nonnegative(r, gen::dim(r, 2, 12));
            const auto z = closure(v);
            const auto zz = closure(z.values());
            double s = 0.0;
            for (std::size_t i = 0; i < z.dim(); ++i) {
                CHECK(z[i] >= 0.0);
                CHECK(zz[i] == doctest::Approx(z[i]).epsilon(1e-15));
                s += z[i];
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("construction tolerance bands") {
        const composition silent({0.5, 0.5 + 1e-10});
        CHECK_FALSE(silent.renormalized_with_warning());
        CHECK(silent[0] + silent[1] == doctest::Approx(1.0).epsilon(1e-15));
        const composition flagged({0.5, 0.5 + 1e-7});
        CHECK(flagged.renormalized_with_warning());
        CHECK(code_of([] { composition({0.5, 0.5 + 1e-5}); }) == errc::not_normalized);
        const composition clipped({-1e-13, 1.0});
        CHECK(clipped[0] == 0.0);
        CHECK(code_of([] { composition({-1e-3, 1.001}); }) == errc::negative_entry);
        CHECK(code_of([] { composition({1.0}); }) == errc::dimension_mismatch);
    }

    TEST_CASE("gini values") {
        for (std::size_t d = 2; d < 8; ++d) CHECK(gini(composition::center(d)) == doctest::Approx(0.0));
        CHECK(gini(composition::vertex(3, 1)) == doctest::Approx(2.0 / 3.0));
        CHECK(gini(composition({0.5, 0.5, 0.0})) == doctest::Approx(1.0 / 3.0));
    }

    TEST_CASE("gini range, permutation invariance and pairwise oracle") {
        rng r(12);
        for (int t = 0; t < 200; ++t) {
            const std::size_t d = gen::dim(r, 2, 10);
            const auto z = gen::sparse(r, d);
            const double g = gini(z);
            CHECK(g >= -1e-15);
            CHECK(g <= (static_cast<double>(d) - 1.0) / static_cast<double>(d) + 1e-12);
            CHECK(g == doctest::Approx(brute_gini(z.values())).epsilon(1e-12));
            auto p = z.values();
            std::reverse(p.begin(), p.end());
            std::rotate(p.begin(), p.begin() + 1, p.end());
            CHECK(gini(closure(p)) == doctest::Approx(g).epsilon(1e-12));
        }
    }

    TEST_CASE("amalgamate examples") {
        const auto a = amalgamate(composition({0.2, 0.3, 0.5}), index_set({1}), index_set({2}));
        CHECK(a[0] == 0.0);
        CHECK(a[1] == doctest::Approx(0.5));
        CHECK(a[2] == doctest::Approx(0.5));
        const auto b = amalgamate(composition({0.1, 0.2, 0.3, 0.4}), index_set({1}), index_set({2}));
        CHECK(b[0] == 0.0);
        CHECK(b[1] == doctest::Approx(0.3));
        CHECK(b[2] == doctest::Approx(0.3));
        CHECK(b[3] == doctest::Approx(0.4));
        const composition z({0.0, 0.4, 0.6});
        CHECK(amalgamate(z, index_set({1}), index_set({2})) == z);
    }

    TEST_CASE("amalgamate errors") {
        CHECK(code_of([] { amalgamate(composition({0.5, 0.0, 0.5}), index_set({1}), index_set({2})); }) ==
              errc::empty_subcomposition_b);
        CHECK(code_of([] { amalgamate(composition::center(3), index_set({1, 2}), index_set({2})); }) ==
              errc::overlapping_sets);
        CHECK(code_of([] { amalgamate(composition::center(3), index_set({1}), index_set({4})); }) ==
              errc::invalid_index);
    }

    TEST_CASE("amalgamate preserves mass and the B subcomposition") {
        rng r(13);
        for (int t = 0; t < 200; ++t) {
            const std::size_t d = gen::dim(r, 3, 9);
            const auto z = gen::interior(r, d);
            const std::size_t split = 1 + static_cast<std::size_t>(r.below(d - 2));
            std::vector<std::size_t> av;
            std::vector<std::size_t> bv;
            for (std::size_t i = 1; i <= split; ++i) av.push_back(i);
            for (std::size_t i = split + 1; i <= d; ++i) {
                if (r.bernoulli(0.7) || bv.empty()) bv.push_back(i);
            }
            const index_set a(av);
            const index_set b(bv);
            const auto out = amalgamate(z, a, b);
            double s = 0.0;
            for (double x : out.values()) s += x;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(a.mass(out) == 0.0);
            const double mb_in = b.mass(z);
            const double mb_out = b.mass(out);
            for (std::size_t i : bv) CHECK(out[i - 1] / mb_out == doctest::Approx(z[i - 1] / mb_in).epsilon(1e-12));
            for (std::size_t i = 1; i <= d; ++i) {
                if (!a.contains(i) && !b.contains(i)) CHECK(out[i - 1] == doctest::Approx(z[i - 1]).epsilon(1e-14));
            }
        }
    }

    TEST_CASE("l1 distance") {
        CHECK(l1_distance(composition::vertex(3, 1), composition::vertex(3, 2)) == doctest::Approx(2.0));
        const composition z({0.2, 0.3, 0.5});
        CHECK(l1_distance(z, z) == 0.0);
        CHECK(l1_distance(z, composition::center(3)) == doctest::Approx(1.0 / 3.0));
        CHECK(code_of([&] { l1_distance(z, composition::center(4)); }) == errc::dimension_mismatch);
        rng r(14);
        for (int t = 0; t < 200; ++t) {
            const std::size_t d = gen::dim(r, 2, 8);
            const auto a = gen::sparse(r, d);
            const auto b = gen::sparse(r, d);
            CHECK(l1_distance(a, b) <= 2.0 + 1e-12);
            CHECK(l1_distance(a, b) == l1_distance(b, a));
        }
    }

    TEST_CASE("index sets") {
        CHECK(code_of([] { index_set({2, 2}); }) == errc::invalid_index);
        CHECK(code_of([] { index_set({0, 1}); }) == errc::invalid_index);
        const index_set s({3, 1});
        CHECK(s.indices() == std::vector<std::size_t>{1, 3});
        CHECK(s.contains(3));
        CHECK_FALSE(s.contains(2));
        CHECK(s.intersects(index_set({3})));
        CHECK_FALSE(s.intersects(index_set({2})));
        CHECK(code_of([&] { s.check_bounds(2); }) == errc::invalid_index);
    }
}
