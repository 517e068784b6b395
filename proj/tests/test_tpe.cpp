#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "moot/tpe.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace moot;

namespace {

MixedPoint num(std::initializer_list<double> v) { return {std::vector<double>(v), {}}; }

}  // namespace

TEST_SUITE("tpe") {
    TEST_CASE("quantile split sizes and threshold") {
        std::vector<Scored> eight;
        for (RowId i = 0; i < 8; ++i) eight.push_back({i, 0.1 * static_cast<double>(8 - i)});
        auto s = split_by_quantile(eight, 0.25);
        CHECK(s.low.size() == 2);
        CHECK(s.high.size() == 6);
        CHECK(s.low[0].id == 7);
        CHECK(s.y_star == s.high.front().score);

        std::vector<Scored> equal{{3, 0.5}, {1, 0.5}, {2, 0.5}, {0, 0.5}};
        auto e = split_by_quantile(equal, 0.25);
        CHECK(e.low == std::vector<Scored>{{0, 0.5}});

        CHECK_THROWS_AS(split_by_quantile(std::vector<Scored>{{0, 0.1}}, 0.25), std::invalid_argument);
        CHECK(split_by_quantile(std::vector<Scored>{{0, 0.1}, {1, 0.2}}, 0.99).high.size() == 1);
    }

    TEST_CASE("low set equals the brute-force lower quantile") {
        Rng rng(12);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Scored> rows;
            for (RowId i = 0; i < 20; ++i) rows.push_back({i, u(rng)});
            auto s = split_by_quantile(rows, 0.25);
            REQUIRE(s.low.size() == 5);
            for (const auto& lo : s.low) {
                int below = 0;
                for (const auto& r : rows) below += r.score < lo.score;
                CHECK(below < 5);
            }
            for (double g : {0.1, 0.2, 0.25}) CHECK(split_by_quantile(rows, g).low.size() <= s.low.size());
        }
    }

    TEST_CASE("density closed forms") {
        std::vector<MixedPoint> one{num({0.4})};
        const double h = kBandwidthFloor;  // a single point has zero spread
        CHECK(kde_density(one, num({0.4})) == doctest::Approx(1.0 / (h * std::sqrt(2 * M_PI))).epsilon(1e-12));
        CHECK(kde_density(one, num({0.9})) == kDensityFloor);

        std::vector<MixedPoint> two{num({0.2}), num({0.6})};
        const double sd = std::sqrt(0.08);  // sample sd of {0.2, 0.6}
        const double bw = sd * std::pow(2.0, -0.2);
        for (double q : {0.0, 0.2, 0.35, 0.6, 1.0}) {
            double want = 0.5 * (moot::testing::normal_pdf(q, 0.2, bw) + moot::testing::normal_pdf(q, 0.6, bw));
            CHECK(std::abs(kde_density(two, num({q})) - want) <= 1e-10);
        }
    }

    TEST_CASE("symbolic dims use Laplace frequencies") {
        std::vector<MixedPoint> pts{{{}, {0}}, {{}, {0}}, {{}, {1}}};
        std::vector<std::size_t> levels{3};
        CHECK(kde_density(pts, {{}, {0}}, levels) == doctest::Approx(3.0 / 6.0));
        CHECK(kde_density(pts, {{}, {2}}, levels) == doctest::Approx(1.0 / 6.0));
        CHECK(kde_density(pts, {{}, {-1}}, levels) == doctest::Approx(1.0 / 6.0));
    }

    TEST_CASE("log density stays finite where the floored density underflows") {
        ParzenEstimator est({num({0.0, 0.0})}, {});
        double ld = est.log_density(num({1.0, 1.0}));
        CHECK(std::isfinite(ld));
        CHECK(ld < std::log(kDensityFloor));
    }

    TEST_CASE("acquisition prefers the low cluster and matches brute force") {
        moot::testing::SyntheticSpec spec;
        spec.numeric_dims = 2;
        spec.symbolic_dims = 1;
        spec.rows = 30;
        auto t = moot::testing::make_synthetic(spec);
        auto scores = score_all(t);
        std::vector<Scored> labeled;
        for (RowId i = 0; i < 12; ++i) labeled.push_back({i, scores[i]});
        auto pair = ParzenPair::fit(t, labeled);
        CHECK(pair.l.size() == 3);
        CHECK(pair.g.size() == 9);
        std::vector<RowId> pool;
        for (RowId i = 12; i < 30; ++i) pool.push_back(i);
        RowId want = pool.front();
        double best = 1e300;
        for (RowId id : pool) {
            auto x = encode_mixed(t.row(id).x, t.x_columns());
            double v = pair.log_ratio(x);
            if (v < best) best = v, want = id;
        }
        CHECK(acquire_tpe(pair, t, pool) == want);
        CHECK_THROWS_AS(acquire_tpe(pair, t, std::vector<RowId>{}), std::invalid_argument);
    }

    TEST_CASE("a pool row on the low support wins over one on the high support") {
        auto t = moot::testing::table_from("A,B-\n0.1,0\n0.9,1\n0.85,1\n0.95,1\n0.1,5\n0.9,6\n");
        std::vector<Scored> labeled{{0, 0.0}, {1, 0.2}, {2, 0.2}, {3, 0.2}};
        auto pair = ParzenPair::fit(t, labeled);
        CHECK(acquire_tpe(pair, t, std::vector<RowId>{4, 5}) == 4);
        CHECK(acquire_tpe(pair, t, std::vector<RowId>{5, 4}) == 4);
    }

    TEST_CASE("identical l and g reduce to the id tie-break") {
        ParzenEstimator a({num({0.3}), num({0.7})}, {});
        ParzenPair pair{0.25, 0.0, a, a};
        auto t = moot::testing::parabola_pool(10);
        CHECK(acquire_tpe(pair, t, std::vector<RowId>{7, 2, 5}) == 2);
    }

    TEST_CASE("bandwidths respect the floor and the shared spread") {
        ParzenEstimator tight({num({0.5}), num({0.5})}, {});
        CHECK(tight.bandwidths()[0] == kBandwidthFloor);
        std::vector<double> spread{0.3};
        ParzenEstimator shared({num({0.5})}, {}, spread);
        CHECK(shared.bandwidths()[0] == doctest::Approx(0.3));
        CHECK_THROWS_AS(ParzenEstimator({num({0.5})}, {}, std::vector<double>{0.1, 0.2}), std::invalid_argument);
    }
}
