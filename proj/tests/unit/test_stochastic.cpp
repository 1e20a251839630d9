#include "trialsim/stochastic.hpp"

#include "doctest.h"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace trialsim;

namespace {

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

}  // namespace

TEST_SUITE("philox") {
    // Known-answer vectors of the reference Philox4x32-10 implementation.
    TEST_CASE("zero counter and key") {
        const auto out = RngStream::philox4x32_10({0, 0, 0, 0}, {0, 0});
        CHECK(out == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    }

    TEST_CASE("all-ones counter and key") {
        const auto out = RngStream::philox4x32_10({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
        CHECK(out == std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    }

    TEST_CASE("pi digits") {
        const auto out = RngStream::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                                  {0xa4093822, 0x299f31d0});
        CHECK(out == std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
    }

    TEST_CASE("stream output is the block function over (block, stream) counters") {
        RngStream rng(0x1234'5678'9abc'def0ull, 42);
        for (std::uint32_t block = 0; block < 40; ++block) {
            const auto out = RngStream::philox4x32_10({block, 0, 42, 0}, {0x9abcdef0u, 0x12345678u});
            CHECK(rng() == ((std::uint64_t{out[1]} << 32) | out[0]));
            CHECK(rng() == ((std::uint64_t{out[3]} << 32) | out[2]));
        }
    }

    TEST_CASE("same seed and stream reproduce; different streams differ") {
        RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
        std::vector<std::uint64_t> va, vb, vc, vd;
        for (int i = 0; i < 100; ++i) {
            va.push_back(a());
            vb.push_back(b());
            vc.push_back(c());
            vd.push_back(d());
        }
        CHECK(va == vb);
        CHECK(va != vc);
        CHECK(va != vd);
    }

    TEST_CASE("uniform stays strictly inside (0, 1)") {
        RngStream rng(1, 1);
        double lo = 1.0, hi = 0.0, sum = 0.0;
        for (int i = 0; i < 200000; ++i) {
            const double u = rng.uniform();
            lo = std::min(lo, u);
            hi = std::max(hi, u);
            sum += u;
        }
        CHECK(lo > 0.0);
        CHECK(hi < 1.0);
        CHECK(sum / 200000 == doctest::Approx(0.5).epsilon(0.01));
    }
}

TEST_SUITE("samplers") {
    TEST_CASE("beta draws follow the beta distribution") {
        const std::pair<double, double> shapes[] = {{1, 1}, {2.094532, 0.7244881}, {0.4, 0.6}, {301, 901}, {5, 1}};
        for (const auto& [a, b] : shapes) {
            CAPTURE(a);
            CAPTURE(b);
            RngStream rng(11, 5);
            std::vector<double> xs(100000);
            for (double& x : xs) x = sample_beta(rng, a, b);
            const boost::math::beta_distribution<> dist(a, b);
            CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }) < 0.01);
            double mean = 0.0;
            for (double x : xs) mean += x / xs.size();
            CHECK(mean == doctest::Approx(a / (a + b)).epsilon(0.01));
        }
    }

    TEST_CASE("gamma draws follow the gamma distribution") {
        for (double shape : {0.3, 1.0, 2.5, 50.0}) {
            CAPTURE(shape);
            RngStream rng(3, 9);
            std::vector<double> xs(100000);
            for (double& x : xs) x = sample_gamma(rng, shape);
            const boost::math::gamma_distribution<> dist(shape, 1.0);
            CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }) < 0.01);
        }
    }

    TEST_CASE("normal draws follow the normal distribution") {
        RngStream rng(5, 5);
        std::vector<double> xs(100000);
        for (double& x : xs) x = sample_normal(rng, 2.0, 3.0);
        const boost::math::normal_distribution<> dist(2.0, 3.0);
        CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); }) < 0.01);
        CHECK(sample_normal(rng, 1.5, 0.0) == 1.5);
    }

    TEST_CASE("binomial mean and variance") {
        RngStream rng(2, 2);
        double sum = 0.0, sq = 0.0;
        const int reps = 50000;
        for (int i = 0; i < reps; ++i) {
            const double k = sample_binomial(rng, 40, 0.3);
            sum += k;
            sq += k * k;
        }
        const double mean = sum / reps;
        CHECK(mean == doctest::Approx(12.0).epsilon(0.01));
        CHECK(sq / reps - mean * mean == doctest::Approx(8.4).epsilon(0.05));
        CHECK(sample_binomial(rng, 10, 0.0) == 0);
        CHECK(sample_binomial(rng, 10, 1.0) == 10);
    }

    TEST_CASE("categorical frequencies and zero-probability arms") {
        RngStream rng(4, 4);
        const std::vector<double> p{0.5, 0.0, 0.2, 0.3};
        std::vector<int> counts(4, 0);
        const int reps = 100000;
        for (int i = 0; i < reps; ++i) ++counts[sample_categorical(rng, p)];
        CHECK(counts[1] == 0);
        CHECK(counts[0] / double(reps) == doctest::Approx(0.5).epsilon(0.02));
        CHECK(counts[2] / double(reps) == doctest::Approx(0.2).epsilon(0.03));
        CHECK(counts[3] / double(reps) == doctest::Approx(0.3).epsilon(0.03));
    }

    TEST_CASE("domain errors") {
        RngStream rng(0, 0);
        CHECK_THROWS_AS(sample_beta(rng, 0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_gamma(rng, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_normal(rng, 0.0, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_binomial(rng, -1, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(sample_categorical(rng, std::vector<double>{}), std::invalid_argument);
        CHECK_THROWS_AS(sample_categorical(rng, std::vector<double>{0.0, 0.0}), std::invalid_argument);
    }
}
