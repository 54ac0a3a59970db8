#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "sfm/error.hpp"
#include "sfm/simgen.hpp"
#include "sfm/special.hpp"
#include "sfm/splines.hpp"

namespace {

// Independent bisection on the regularised lower incomplete gamma.
double gamma_quantile_bisect(double p, double shape) {
    double lo = 0.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (sfm::special::gamma_p(shape, mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(Simgen, FourierOrthonormalOnGrid) {
    const sfm::RegularGrid grid(0.0, 1.0, 50);
    const Eigen::VectorXd w = grid.trapezoid_weights();
    for (int a = 1; a <= 4; ++a)
        for (int b = 1; b <= 4; ++b) {
            double s = 0.0;
            for (int g = 0; g < 50; ++g) s += w[g] * sfm::fourier(a, grid[g]) * sfm::fourier(b, grid[g]);
            EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-2);
        }
    EXPECT_NEAR(sfm::fourier(1, 0.25), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(sfm::fourier(2, 0.0), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(sfm::fourier(3, 0.125), std::sqrt(2.0), 1e-15);
}

TEST(Simgen, SigmaRuleAndMeanNorm) {
    const auto sim = sfm::simulate_gaussian({}, {}, 3);
    const auto& s = sim.truth.sigmas();
    ASSERT_EQ(s.size(), 4u);
    EXPECT_NEAR(s[0] / s[1], std::exp(0.2), 1e-12);
    EXPECT_NEAR(s[0] / s[3], std::exp(0.6), 1e-12);
    const double norm = sim.truth.mean_norm();
    EXPECT_NEAR(s[3], norm * std::exp(0.2) / 2.0, 1e-12);
    // fine Gauss-Legendre oracle for ||mu||
    const auto q = sfm::gauss_legendre(10);
    double fine = 0.0;
    for (int c = 0; c < 100; ++c)
        for (int k = 0; k < 10; ++k) {
            const double t = (c + 0.5 * (q.nodes[k] + 1.0)) / 100.0;
            const double m = sim.truth.latent_mean(t);
            fine += q.weights[k] / 200.0 * m * m;
        }
    EXPECT_NEAR(norm, std::sqrt(fine), 1e-3 * std::sqrt(fine));
}

TEST(Simgen, SamplingLayout) {
    sfm::SamplingSpec sp;
    sp.n = 300;
    sp.j_lo = 6;
    sp.j_hi = 10;
    const auto sim = sfm::simulate_gaussian({}, sp, 4);
    ASSERT_EQ(sim.data.size(), 300u);
    std::set<std::size_t> sizes;
    for (const auto& s : sim.data.subjects()) {
        sizes.insert(s.size());
        std::set<int> slots;
        for (const auto& p : s.points) slots.insert(p.slot);
        EXPECT_EQ(slots.size(), s.size());
    }
    EXPECT_EQ(*sizes.begin(), 6u);
    EXPECT_EQ(*sizes.rbegin(), 10u);
    EXPECT_EQ(sim.data.grid().size(), 50);
    EXPECT_TRUE(sfm::simulate_gaussian({}, sp, 4).data == sim.data);
    EXPECT_FALSE(sfm::simulate_gaussian({}, sp, 5).data == sim.data);
    sp.j_lo = 1;
    EXPECT_THROW(sp.validate(), sfm::Error);
}

TEST(Simgen, FreshDrawMeanMatchesMu) {
    const auto sim = sfm::simulate_gaussian({}, {}, 6);
    const Eigen::MatrixXd x = sim.truth.draw(5000, 7);
    const Eigen::VectorXd diff = x.colwise().mean().transpose() - sim.truth.mean_on_grid();
    const double rmse = std::sqrt(diff.squaredNorm() / diff.size());
    EXPECT_LT(rmse, 0.1 * sim.truth.mean_norm());
}

TEST(Simgen, GammaCase) {
    sfm::SamplingSpec sp;
    sp.n = 200;
    const auto sim = sfm::simulate_gamma({}, sp, 8);
    for (const auto& s : sim.data.subjects())
        for (const auto& p : s.points) EXPECT_GT(p.x, 0.0);
    const double median = gamma_quantile_bisect(0.5, 0.5);
    EXPECT_NEAR(median, 0.2275, 1e-4);
    for (double t : {0.0, 0.3, 0.77}) EXPECT_NEAR(sim.truth.transform(t, sim.truth.latent_mean(t)), median, 1e-10);
    EXPECT_NEAR(sim.truth.median_on_grid()[10], median, 1e-10);
    for (double x : {0.1, 1.0, 3.0}) {
        const double p = sfm::special::gamma_cdf(x, 0.5, 1.0);
        EXPECT_NEAR(sfm::special::gamma_quantile(p, 0.5, 1.0), x, 1e-8);
        EXPECT_NEAR(gamma_quantile_bisect(p, 0.5), x, 1e-8);
    }
    // every observed marginal is Gamma(0.5, 1): fresh draws have sample mean 0.5
    const Eigen::MatrixXd d = sim.truth.draw(4000, 9);
    EXPECT_NEAR(d.mean(), 0.5, 0.03);
    EXPECT_GT(d.minCoeff(), 0.0);
}

TEST(Simgen, GammaObservedMomentsMatchMonteCarlo) {
    const auto sim = sfm::simulate_gamma({}, {}, 10);
    const Eigen::MatrixXd d = sim.truth.draw(40000, 11);
    const Eigen::RowVectorXd mean = d.colwise().mean();
    const Eigen::MatrixXd centred = d.rowwise() - mean;
    const Eigen::MatrixXd mc = centred.transpose() * centred / (d.rows() - 1.0);
    const Eigen::MatrixXd c = sim.truth.covariance_on_grid();
    EXPECT_NEAR(sim.truth.mean_on_grid()[5], 0.5, 1e-15);
    EXPECT_NEAR(c(7, 7), 0.5, 1e-6);
    EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    // MC standard error of a covariance entry is about 0.5 * sqrt(3 / m)
    EXPECT_LT((c - mc).cwiseAbs().maxCoeff(), 0.03);
    // zero latent correlation maps to zero observed covariance; correlation 1 to the variance
    const Eigen::MatrixXd lat = sim.truth.latent_covariance_on_grid();
    for (int s = 0; s < c.rows(); s += 7)
        for (int t = 0; t < c.cols(); t += 5) {
            const double rho = lat(s, t) / std::sqrt(lat(s, s) * lat(t, t));
            EXPECT_LE(std::abs(c(s, t)), 0.5 * std::abs(rho) + 1e-9);
        }
    const Eigen::MatrixXd psi = sim.truth.eigenfunctions_on_grid();
    const Eigen::VectorXd w = sim.truth.grid().trapezoid_weights();
    const Eigen::MatrixXd gram = psi * w.asDiagonal() * psi.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Simgen, NoiseRule) {
    const auto sim = sfm::simulate_gaussian({}, {}, 10);
    EXPECT_TRUE(sfm::add_noise(sim.data, 0.0, 1) == sim.data);
    const sfm::RegularGrid grid(0.0, 1.0, 4);
    std::vector<sfm::Subject> subjects;
    for (int i = 0; i < 2500; ++i) {
        subjects.push_back({"s" + std::to_string(i), {}});
        for (int g = 0; g < 4; ++g) subjects.back().points.push_back({grid[g], 1.0, g});
    }
    const sfm::IrregularDataset ones(grid, subjects);
    const auto noisy = sfm::add_noise(ones, 0.04, 2);
    double s = 0.0, s2 = 0.0, n = 0.0;
    for (const auto& sub : noisy.subjects())
        for (const auto& p : sub.points) {
            s += p.x - 1.0;
            s2 += (p.x - 1.0) * (p.x - 1.0);
            n += 1.0;
        }
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(var, 0.04, 0.05 * 0.04);
    EXPECT_NEAR(std::sqrt(var), 0.2, 0.01);
}
