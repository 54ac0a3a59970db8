#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sfm/error.hpp"
#include "sfm/eval.hpp"
#include "sfm/fda.hpp"
#include "sfm/simgen.hpp"
#include "sfm/special.hpp"

namespace {

Eigen::MatrixXd random_curves(int m, int G, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(m, G);
    for (int i = 0; i < m; ++i)
        for (int g = 0; g < G; ++g) a(i, g) = nd(rng);
    return a;
}

double brute_force_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const sfm::RegularGrid& grid) {
    const Eigen::VectorXd w = grid.trapezoid_weights();
    std::vector<int> perm(a.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (int i = 0; i < a.rows(); ++i) s += w.dot((a.row(i) - b.row(perm[i])).array().square().matrix().transpose());
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / a.rows());
}

// Dense curves X(t_j) = x0 * rate^j on a 31-point grid.
sfm::IrregularDataset geometric_curves(int n, double rate, std::uint64_t seed) {
    const sfm::RegularGrid grid(0.0, 1.0, 31);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> start(-2.0, 2.0);
    std::vector<sfm::Subject> subjects;
    for (int i = 0; i < n; ++i) {
        double x = start(rng);
        subjects.push_back({"s" + std::to_string(i), {}});
        for (int g = 0; g < 31; ++g) {
            subjects.back().points.push_back({grid[g], x, g});
            x *= rate;
        }
    }
    return sfm::IrregularDataset(grid, std::move(subjects));
}

}  // namespace

TEST(Eval, HungarianMatchesBruteForce) {
    std::mt19937_64 rng(1);
    const sfm::RegularGrid grid(0.0, 1.0, 7);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::MatrixXd a = random_curves(6, 7, rng), b = random_curves(6, 7, rng);
        EXPECT_NEAR(sfm::wasserstein2(a, b, grid), brute_force_w2(a, b, grid), 1e-10);
    }
}

TEST(Eval, HungarianHandlesTiesAndTrivialSizes) {
    EXPECT_EQ(sfm::hungarian(Eigen::MatrixXd::Zero(3, 3)).size(), 3u);
    Eigen::MatrixXd c(3, 3);
    c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const auto m = sfm::hungarian(c);
    EXPECT_DOUBLE_EQ(c(0, m[0]) + c(1, m[1]) + c(2, m[2]), 5.0);
    EXPECT_THROW(sfm::hungarian(Eigen::MatrixXd::Zero(2, 3)), sfm::Error);
}

TEST(Eval, WassersteinBasics) {
    std::mt19937_64 rng(2);
    const sfm::RegularGrid grid(0.0, 1.0, 20);
    const Eigen::MatrixXd a = random_curves(30, 20, rng);
    EXPECT_EQ(sfm::wasserstein2(a, a, grid), 0.0);
    const Eigen::MatrixXd f = random_curves(1, 20, rng);
    EXPECT_NEAR(sfm::wasserstein2(f, (f.array() + 0.7).matrix(), grid), 0.7, 1e-12);
    EXPECT_THROW(sfm::wasserstein2(a, a.topRows(29), grid), sfm::Error);
}

TEST(Eval, WassersteinMetricAxioms) {
    std::mt19937_64 rng(3);
    const sfm::RegularGrid grid(0.0, 1.0, 10);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::MatrixXd a = random_curves(12, 10, rng), b = random_curves(12, 10, rng),
                              c = random_curves(12, 10, rng);
        const double ab = sfm::wasserstein2(a, b, grid), ba = sfm::wasserstein2(b, a, grid);
        const double bc = sfm::wasserstein2(b, c, grid), ac = sfm::wasserstein2(a, c, grid);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_LE(ac, ab + bc + 1e-9);
        EXPECT_GT(ab, 0.0);
    }
}

TEST(Eval, IdenticalCurvesHaveNoVariation) {
    const sfm::RegularGrid grid(0.0, 1.0, 30);
    Eigen::MatrixXd c(40, 30);
    for (int g = 0; g < 30; ++g) c.col(g).setConstant(std::sin(3.0 * grid[g]) + grid[g] * grid[g]);
    const auto s = sfm::fpca_summary(c, grid, 2);
    EXPECT_LT(s.eigenvalues.maxCoeff(), 1e-8);
    EXPECT_LT((s.mean - c.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((s.median - c.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Eval, RecoversLeadingEigenfunction) {
    const auto sim = sfm::simulate_gaussian({}, {}, 4);
    const Eigen::MatrixXd x = sim.truth.draw(2000, 5);
    const auto& grid = sim.truth.grid();
    const auto s = sfm::fpca_summary(x, grid, 3);
    const Eigen::VectorXd w = grid.trapezoid_weights();
    const Eigen::MatrixXd gram = s.eigenfunctions * w.asDiagonal() * s.eigenfunctions.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
    for (int k = 1; k < 3; ++k) EXPECT_LE(s.eigenvalues[k], s.eigenvalues[k - 1]);
    for (int k = 0; k < 3; ++k) EXPECT_GE(w.dot(s.eigenfunctions.row(k).transpose()), 0.0);
    const auto r = sfm::mse_against_truth(s, sim.truth.mean_on_grid(), sim.truth.eigenfunctions_on_grid(),
                                          sim.truth.median_on_grid(), grid);
    EXPECT_LT(r.ef1, 0.05);
}

TEST(Eval, SparseSummaryTracksTruth) {
    sfm::SamplingSpec sp;
    sp.n = 400;
    sp.j_lo = 6;
    sp.j_hi = 10;
    const auto sim = sfm::simulate_gaussian({}, sp, 6);
    const auto s = sfm::fpca_summary(sim.data, 2);
    EXPECT_EQ(s.median.size(), 0);
    const auto r = sfm::mse_against_truth(s, sim.truth.mean_on_grid(), sim.truth.eigenfunctions_on_grid(),
                                          sim.truth.median_on_grid(), sim.truth.grid());
    EXPECT_LT(std::sqrt(r.mf), 0.2 * sim.truth.mean_norm());
    EXPECT_TRUE(std::isnan(r.mdf));
}

TEST(Eval, GammaMedian) {
    const sfm::RegularGrid grid(0.0, 1.0, 12);
    std::mt19937_64 rng(7);
    std::gamma_distribution<double> gd(0.5, 1.0);
    Eigen::MatrixXd c(5000, 12);
    for (int i = 0; i < 5000; ++i)
        for (int g = 0; g < 12; ++g) c(i, g) = gd(rng);
    const auto s = sfm::fpca_summary(c, grid, 1);
    for (int g = 0; g < 12; ++g) EXPECT_NEAR(s.median[g], 0.2275, 0.02);
}

TEST(Eval, MseConventions) {
    const sfm::RegularGrid grid(0.0, 1.0, 25);
    sfm::FpcaSummary s;
    s.mean = Eigen::VectorXd::LinSpaced(25, 0.0, 1.0);
    s.median = s.mean;
    s.eigenfunctions.resize(2, 25);
    for (int g = 0; g < 25; ++g) {
        s.eigenfunctions(0, g) = sfm::fourier(1, grid[g]);
        s.eigenfunctions(1, g) = sfm::fourier(2, grid[g]);
    }
    auto r = sfm::mse_against_truth(s, s.mean, s.eigenfunctions, s.median, grid);
    EXPECT_EQ(r.mf, 0.0);
    EXPECT_EQ(r.ef1, 0.0);
    EXPECT_EQ(r.ef2, 0.0);
    EXPECT_EQ(r.mdf, 0.0);
    r = sfm::mse_against_truth(s, s.mean, -s.eigenfunctions, s.median, grid);
    EXPECT_EQ(r.ef1, 0.0);
    EXPECT_EQ(r.ef2, 0.0);
    const Eigen::VectorXd shifted = (s.mean.array() + 0.5).matrix();
    EXPECT_NEAR(sfm::integrated_sq_error(shifted, s.mean, grid), 0.25, 1e-12);
}

TEST(Eval, PredictionOfIdentityDynamics) {
    const auto ds = geometric_curves(50, 1.0, 8);
    const auto f = sfm::fit_prediction(ds);
    const auto err = sfm::prediction_errors(f, geometric_curves(20, 1.0, 9), 4);
    for (double e : err) EXPECT_LT(e, 1e-5);
}

TEST(Eval, PredictionOfContractiveDynamics) {
    const auto f = sfm::fit_prediction(geometric_curves(200, 0.9, 10));
    const auto val = geometric_curves(100, 0.9, 11);
    const auto err = sfm::prediction_errors(f, val, 6);
    EXPECT_LT(err[0], 1e-3);
    for (std::size_t g = 1; g < err.size(); ++g) EXPECT_GE(err[g], err[g - 1]);
}

TEST(Eval, PredictionNeedsConsecutivePairs) {
    const sfm::RegularGrid grid(0.0, 1.0, 10);
    std::vector<sfm::Subject> subjects;
    for (int i = 0; i < 30; ++i) subjects.push_back({"s" + std::to_string(i), {{grid[0], 1.0, 0}, {grid[2], 2.0, 2}}});
    try {
        sfm::fit_prediction(sfm::IrregularDataset(grid, subjects));
        FAIL();
    } catch (const sfm::Error& e) {
        EXPECT_EQ(e.stage(), sfm::Stage::predict);
    }
}

TEST(Fda, DenoiseSmoothsAndKeepsLayout) {
    sfm::SamplingSpec sp;
    sp.n = 60;
    sp.j_lo = 2;
    sp.j_hi = 10;
    const auto sim = sfm::simulate_gaussian({}, sp, 12);
    const auto noisy = sfm::add_noise(sim.data, 0.04, 13);
    const auto clean = sfm::denoise(noisy);
    ASSERT_EQ(clean.size(), noisy.size());
    double err_noisy = 0.0, err_clean = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const auto& a = clean.subjects()[i].points;
        const auto& b = noisy.subjects()[i].points;
        const auto& truth = sim.data.subjects()[i].points;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t j = 0; j < a.size(); ++j) {
            EXPECT_EQ(a[j].slot, b[j].slot);
            if (a.size() < 4) EXPECT_NEAR(a[j].x, b[j].x, 1e-12);  // interpolation fallback
            err_noisy += std::pow(b[j].x - truth[j].x, 2);
            err_clean += std::pow(a[j].x - truth[j].x, 2);
        }
    }
    EXPECT_LT(err_clean, err_noisy);
}
