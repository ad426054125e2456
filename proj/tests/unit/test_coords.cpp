// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "coords.hpp"

using namespace arbiscale;

TEST_SUITE("coord_geometry") {

TEST_CASE("make_coord_grid places cell centers") {
    SUBCASE("2x2") {
        const auto g = make_coord_grid(2, 2);
        REQUIRE(g.size() == 4);
        CHECK(g.coords.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
        CHECK(g.coords.at(0, 1) == doctest::Approx(-0.5).epsilon(1e-15));
        CHECK(g.coords.at(3, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(g.coords.at(3, 1) == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("1x1 is the domain center") {
        const auto g = make_coord_grid(1, 1);
        CHECK(g.coords.at(0, 0) == 0.0);
        CHECK(g.coords.at(0, 1) == 0.0);
    }
    SUBCASE("4x2 row coordinates") {
        const auto g = make_coord_grid(4, 2);
        const double expected[4] = {-0.75, -0.25, 0.25, 0.75};
        for (int r = 0; r < 4; ++r)
            CHECK(g.coords.at(r * 2, 0) == doctest::Approx(expected[r]).epsilon(1e-15));
    }
    SUBCASE("rejects non-positive dims") {
        CHECK_THROWS_AS(make_coord_grid(0, 4), Error);
        CHECK_THROWS_AS(make_coord_grid(4, -1), Error);
    }
}

TEST_CASE("grid coordinates are strictly increasing, symmetric and interior") {
    for (int n : {1, 2, 3, 7, 16, 33, 128}) {
        const auto g = make_coord_grid(n, 1);
        for (int i = 0; i < n; ++i) {
            const double c = g.coords.at(i, 0);
            CHECK(c > -1.0);
            CHECK(c < 1.0);
            // Symmetric about zero.
            CHECK(c == doctest::Approx(-g.coords.at(n - 1 - i, 0)).epsilon(1e-14));
            if (i > 0) {
                CHECK(c > g.coords.at(i - 1, 0));
                CHECK(c - g.coords.at(i - 1, 0) == doctest::Approx(2.0 / n).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("make_cell entries") {
    SUBCASE("128x128") {
        const auto c = make_cell(128, 128, 5);
        for (int i = 0; i < 5; ++i) {
            CHECK(c.sizes.at(i, 0) == 0.015625);
            CHECK(c.sizes.at(i, 1) == 0.015625);
        }
    }
    SUBCASE("2x4") {
        const auto c = make_cell(2, 4, 1);
        CHECK(c.sizes.at(0, 0) == 1.0);
        CHECK(c.sizes.at(0, 1) == 0.5);
    }
    SUBCASE("1x1") {
        const auto c = make_cell(1, 1, 1);
        CHECK(c.sizes.at(0, 0) == 2.0);
        CHECK(c.sizes.at(0, 1) == 2.0);
    }
    SUBCASE("entry times dimension recovers the domain width") {
        for (int n : {1, 2, 3, 5, 8, 49, 64, 100, 333}) {
            const auto c = make_cell(n, n, 1);
            CHECK(c.sizes.at(0, 0) * n == doctest::Approx(2.0).epsilon(1e-15));
            // exact for power-of-two sizes
            if ((n & (n - 1)) == 0) CHECK(c.sizes.at(0, 0) * n == 2.0);
        }
    }
    SUBCASE("rejects non-positive dims") { CHECK_THROWS_AS(make_cell(0, 1, 1), Error); }
}

TEST_CASE("nearest_feature_index") {
    CoordGrid q;
    q.coords = Tensor<double>({1, 2});

    SUBCASE("equidistant tie picks the smaller index") {
        q.coords.at(0, 0) = 0.0;
        q.coords.at(0, 1) = 0.0;
        const auto r = nearest_feature_index(q, 2, 2, 0, 0);
        CHECK(r.index.at(0, 0) == 0);
        CHECK(r.index.at(0, 1) == 0);
        CHECK(r.center.at(0, 0) == doctest::Approx(-0.5));
        CHECK(r.center.at(0, 1) == doctest::Approx(-0.5));
    }
    SUBCASE("corner query") {
        q.coords.at(0, 0) = -0.9;
        q.coords.at(0, 1) = -0.9;
        const auto r = nearest_feature_index(q, 2, 2, 0, 0);
        CHECK(r.index.at(0, 0) == 0);
        CHECK(r.index.at(0, 1) == 0);
    }
    SUBCASE("out-of-range shift clamps") {
        q.coords.at(0, 0) = -0.9;
        q.coords.at(0, 1) = -0.9;
        const auto r = nearest_feature_index(q, 2, 2, -1, -1);
        CHECK(r.index.at(0, 0) == 0);
        CHECK(r.index.at(0, 1) == 0);
    }
}

TEST_CASE("nearest index matches brute force over small grids") {
    // Independent oracle: scan all centers for the minimum Euclidean distance.
    for (int fh : {1, 2, 3, 5}) {
        for (int fw : {1, 2, 4, 7}) {
            const auto queries = make_coord_grid(9, 11);
            const auto r = nearest_feature_index(queries, fh, fw, 0, 0);
            for (std::int64_t i = 0; i < queries.size(); ++i) {
                const double qr = queries.coords.at(i, 0);
                const double qc = queries.coords.at(i, 1);
                double best = 1e300;
                int br = -1, bc = -1;
                for (int rr = 0; rr < fh; ++rr)
                    for (int cc = 0; cc < fw; ++cc) {
                        const double dr = qr - axis_cell_center(rr, fh);
                        const double dc = qc - axis_cell_center(cc, fw);
                        const double d = dr * dr + dc * dc;
                        if (d < best - 1e-12) {
                            best = d;
                            br = rr;
                            bc = cc;
                        }
                    }
                const double dr = qr - axis_cell_center(r.index.at(i, 0), fh);
                const double dc = qc - axis_cell_center(r.index.at(i, 1), fw);
                CHECK(dr * dr + dc * dc == doctest::Approx(best).epsilon(1e-12));
                // Unique minima must agree exactly.
                if (br == r.index.at(i, 0)) CHECK(bc == r.index.at(i, 1));
            }
        }
    }
}

TEST_CASE("relative_coord") {
    CoordGrid q, c;
    q.coords = Tensor<double>({1, 2});
    c.coords = Tensor<double>({1, 2});

    SUBCASE("query at center is zero") {
        q.coords.at(0, 0) = 0.25;
        q.coords.at(0, 1) = -0.5;
        c.coords = q.coords;
        const auto r = relative_coord(q, c, 8, 8);
        CHECK(r.rel.at(0, 0) == 0.0);
        CHECK(r.rel.at(0, 1) == 0.0);
    }
    SUBCASE("half-cell offset on an 8-wide grid scales to 1") {
        q.coords.at(0, 0) = 0.0;
        q.coords.at(0, 1) = 2.0 / 16.0;
        c.coords.at(0, 0) = 0.0;
        c.coords.at(0, 1) = 0.0;
        const auto r = relative_coord(q, c, 8, 8);
        CHECK(r.rel.at(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("offset (1/8, -1/8) on a 4x4 grid") {
        q.coords.at(0, 0) = 0.125;
        q.coords.at(0, 1) = -0.125;
        c.coords.at(0, 0) = 0.0;
        c.coords.at(0, 1) = 0.0;
        const auto r = relative_coord(q, c, 4, 4);
        CHECK(r.rel.at(0, 0) == doctest::Approx(0.5));
        CHECK(r.rel.at(0, 1) == doctest::Approx(-0.5));
    }
    SUBCASE("shape mismatch throws") {
        CoordGrid bad;
        bad.coords = Tensor<double>({2, 2});
        CHECK_THROWS_AS(relative_coord(q, bad, 4, 4), Error);
    }
}

TEST_CASE("scaled relative coordinates are resolution invariant") {
    // A query at a fixed fractional offset inside its cell yields the same
    // scaled relative coordinate on any grid resolution.
    const double frac = 0.3; // fraction of a cell to the right of the center
    double reference = 0.0;
    bool first = true;
    for (int n : {4, 8, 16, 64}) {
        const double center = axis_cell_center(n / 2, n);
        CoordGrid q, c;
        q.coords = Tensor<double>({1, 2});
        c.coords = Tensor<double>({1, 2});
        q.coords.at(0, 0) = center + frac * (2.0 / n);
        q.coords.at(0, 1) = center;
        c.coords.at(0, 0) = center;
        c.coords.at(0, 1) = center;
        const auto r = relative_coord(q, c, n, n);
        if (first) {
            reference = r.rel.at(0, 0);
            first = false;
        } else {
            CHECK(r.rel.at(0, 0) == doctest::Approx(reference).epsilon(1e-12));
        }
    }
}

} // TEST_SUITE
