#include <cmath>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "sfm/error.hpp"
#include "sfm/special.hpp"

namespace sp = sfm::special;
namespace bm = boost::math;

TEST(Special, NormalQuantileMatchesBoost) {
    bm::normal n;
    for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.975, 0.999999, 1 - 1e-12}) {
        const double expect = bm::quantile(n, p);
        EXPECT_NEAR(sp::normal_quantile(p), expect, 1e-9 * std::max(1.0, std::abs(expect))) << p;
    }
}

TEST(Special, NormalCdfRoundTrip) {
    for (double z = -8.0; z <= 8.0; z += 0.37) {
        const double p = z < 0 ? sp::normal_cdf(z) : sp::normal_sf(z);
        const double back = z < 0 ? sp::normal_quantile(p) : -sp::normal_quantile(p);
        EXPECT_NEAR(back, z, 1e-9) << z;
    }
}

TEST(Special, NormalQuantileRejectsBoundary) {
    EXPECT_THROW(sp::normal_quantile(0.0), sfm::Error);
    EXPECT_THROW(sp::normal_quantile(1.0), sfm::Error);
}

TEST(Special, IncompleteGammaMatchesBoost) {
    for (double a : {0.5, 1.0, 2.5, 10.0, 80.0}) {
        for (double x : {1e-4, 0.1, 0.5, 1.0, 3.0, 12.0, 90.0}) {
            EXPECT_NEAR(sp::gamma_p(a, x), bm::gamma_p(a, x), 1e-12) << a << " " << x;
            const double q = bm::gamma_q(a, x);
            EXPECT_NEAR(sp::gamma_q(a, x), q, 1e-12 + 1e-10 * q) << a << " " << x;
        }
    }
}

TEST(Special, IncompleteBetaMatchesBoost) {
    for (double a : {0.5, 1.5, 5.0, 50.0, 5000.0}) {
        for (double b : {0.5, 2.0, 7.0}) {
            for (double x : {0.001, 0.2, 0.5, 0.9, 0.999}) {
                EXPECT_NEAR(sp::ibeta(a, b, x), bm::ibeta(a, b, x), 1e-11) << a << " " << b << " " << x;
            }
        }
    }
}

TEST(Special, GammaQuantileSelfInverse) {
    for (double x : {0.1, 1.0, 3.0}) {
        const double p = sp::gamma_cdf(x, 0.5, 1.0);
        EXPECT_NEAR(sp::gamma_quantile(p, 0.5, 1.0), x, 1e-8);
    }
    bm::gamma_distribution<> g(0.5, 1.0);
    for (double p : {1e-12, 1e-5, 0.1, 0.5, 0.9, 0.99999}) {
        const double expect = bm::quantile(g, p);
        EXPECT_NEAR(sp::gamma_quantile(p, 0.5, 1.0), expect, 1e-9 * std::max(expect, 1e-3)) << p;
    }
    for (double q : {1e-15, 1e-9, 1e-3}) {
        const double expect = bm::quantile(bm::complement(g, q));
        EXPECT_NEAR(sp::gamma_quantile_upper(q, 0.5, 1.0), expect, 1e-9 * expect) << q;
    }
}

TEST(Special, GammaMedianByBisection) {
    // independent bisection on the Boost regularised gamma
    double lo = 0.0, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (bm::gamma_p(0.5, mid) < 0.5 ? lo : hi) = mid;
    }
    EXPECT_NEAR(sp::gamma_quantile(0.5, 0.5, 1.0), 0.5 * (lo + hi), 1e-10);
    EXPECT_NEAR(sp::gamma_quantile(0.5, 0.5, 1.0), 0.2275, 1e-4);
}

TEST(Special, StudentTMatchesBoost) {
    for (double nu : {2.5, 5.0, 30.0, 1e3, 1e6, 1e9}) {
        bm::students_t t(nu);
        for (double x : {-30.0, -4.0, -1.0, -0.1, 0.0, 0.7, 3.0, 12.0}) {
            EXPECT_NEAR(sp::student_t_cdf(x, nu), bm::cdf(t, x), 1e-11) << nu << " " << x;
            EXPECT_NEAR(sp::student_t_pdf(x, nu), bm::pdf(t, x), 1e-9) << nu << " " << x;
        }
        for (double p : {1e-10, 0.01, 0.3, 0.5, 0.8, 0.999}) {
            const double expect = bm::quantile(t, p);
            EXPECT_NEAR(sp::student_t_quantile(p, nu), expect, 1e-8 * std::max(1.0, std::abs(expect))) << nu << " " << p;
        }
    }
}

TEST(Special, TailAwareConversions) {
    for (double nu : {3.0, 8.0, 100.0}) {
        bm::students_t t(nu);
        bm::normal n;
        for (double z : {-9.0, -2.0, 0.0, 1.5, 9.0}) {
            const double expect = z > 0 ? -bm::quantile(t, bm::cdf(bm::complement(n, z)))
                                        : bm::quantile(t, bm::cdf(n, z));
            EXPECT_NEAR(sp::t_quantile_of_normal(z, nu), expect, 1e-8 * std::max(1.0, std::abs(expect)));
            const double x = sp::t_quantile_of_normal(z, nu);
            EXPECT_NEAR(sp::normal_score_of_t(x, nu), z, 1e-8);
        }
    }
}

TEST(Special, TCopulaDensityIntegratesToOne) {
    for (double nu : {3.0, 10.0}) {
        for (double rho : {0.0, 0.6}) {
            const int n = 200;
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double u = (i + 0.5) / n, v = (j + 0.5) / n;
                    total += std::exp(sp::t_copula_logpdf(u, v, rho, nu));
                }
            }
            EXPECT_NEAR(total / (n * n), 1.0, 1e-3) << nu << " " << rho;
        }
    }
}

TEST(Special, TCopulaIndependenceAtZeroCorrelationLargeNu) {
    EXPECT_NEAR(sp::t_copula_logpdf(0.3, 0.8, 0.0, 1e8), 0.0, 1e-6);
}
