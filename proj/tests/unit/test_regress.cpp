#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sfm/error.hpp"
#include "sfm/regress.hpp"

using sfm::BSplineBasis;
using sfm::NormalEquations;
using sfm::PenalizedProblem;
using sfm::PenalizedSolver;
using sfm::SparseRow;

namespace {

struct DenseData {
    Eigen::MatrixXd w;
    Eigen::VectorXd y;
    Eigen::VectorXd d;
};

SparseRow dense_row(const Eigen::VectorXd& v) {
    SparseRow r;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        r.index.push_back(static_cast<int>(i));
        r.value.push_back(v[i]);
    }
    return r;
}

PenalizedProblem make_problem(const DenseData& data, std::vector<Eigen::MatrixXd> pens, std::size_t chunks = 3) {
    PenalizedProblem p;
    p.dim = static_cast<int>(data.w.cols());
    p.penalties = std::move(pens);
    p.chunks = chunks;
    const auto n = static_cast<std::size_t>(data.w.rows());
    p.rows = [&data, n, chunks](std::size_t c, const sfm::RowSink& emit) {
        for (std::size_t i = n * c / chunks; i < n * (c + 1) / chunks; ++i) {
            emit(dense_row(data.w.row(static_cast<Eigen::Index>(i)).transpose()), data.y[i], data.d[i]);
        }
    };
    return p;
}

DenseData spline_data(const BSplineBasis& b, const std::vector<double>& ts, double (*f)(double), double noise,
                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    DenseData data;
    const auto n = static_cast<Eigen::Index>(ts.size());
    data.w.resize(n, b.dim());
    data.y.resize(n);
    data.d = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        data.w.row(i) = b.eval(ts[i]).transpose();
        data.y[i] = f(ts[i]) + noise * nd(rng);
    }
    return data;
}

std::vector<double> uniform_times(int n, double lo, double hi) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = lo + (hi - lo) * (i + 0.5) / n;
    return t;
}

double objective(const DenseData& data, const std::vector<Eigen::MatrixXd>& pens, const std::vector<double>& lam,
                 const Eigen::VectorXd& beta) {
    const Eigen::VectorXd r = data.y - data.w * beta;
    double s = (r.array().square() * data.d.array()).sum();
    for (std::size_t k = 0; k < pens.size(); ++k) s += lam[k] * beta.dot(pens[k] * beta);
    return s;
}

// First-difference penalty on coefficients: null space is the constant vector.
Eigen::MatrixXd difference_penalty(int dim) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim - 1, dim);
    for (int i = 0; i < dim - 1; ++i) {
        d(i, i) = -1.0;
        d(i, i + 1) = 1.0;
    }
    return d.transpose() * d;
}

}  // namespace

TEST(Regress, ZeroLambdaInterpolatesExactData) {
    BSplineBasis b(6, 0.0, 1.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    Eigen::VectorXd truth(6);
    for (auto& v : truth) v = nd(rng);
    DenseData data;
    data.w.resize(6, 6);
    data.y.resize(6);
    data.d = Eigen::VectorXd::Constant(6, 0.7);
    const auto ts = uniform_times(6, 0.0, 1.0);
    for (int i = 0; i < 6; ++i) data.w.row(i) = b.eval(ts[i]).transpose();
    data.y = data.w * truth;
    const auto fit = sfm::solve_fixed_lambda(make_problem(data, {b.roughness()}), {0.0});
    EXPECT_LT((fit.beta - truth).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Regress, HugeLambdaGivesWeightedMean) {
    BSplineBasis b(8, 0.0, 1.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(0.1, 2.0);
    auto data = spline_data(b, uniform_times(60, 0.0, 1.0), [](double t) { return std::sin(6 * t); }, 0.3, 5);
    for (auto& v : data.d) v = unif(rng);
    const double mean = (data.y.array() * data.d.array()).sum() / data.d.sum();
    const auto fit = sfm::solve_fixed_lambda(make_problem(data, {difference_penalty(8)}), {1e12});
    const Eigen::VectorXd fitted = data.w * fit.beta;
    EXPECT_LT((fitted.array() - mean).abs().maxCoeff(), 1e-6);
}

TEST(Regress, MatchesExplicitInverse) {
    const int dim = 20, rows = 100;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    DenseData data;
    data.w.resize(rows, dim);
    data.y.resize(rows);
    data.d.resize(rows);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < dim; ++j) data.w(i, j) = nd(rng);
        data.y[i] = nd(rng);
        data.d[i] = unif(rng);
    }
    Eigen::MatrixXd r1 = difference_penalty(dim);
    Eigen::MatrixXd r2 = Eigen::MatrixXd::Identity(dim, dim);
    const std::vector<double> lam = {0.3, 2.0};
    const auto fit = sfm::solve_fixed_lambda(make_problem(data, {r1, r2}, 7), lam);
    const Eigen::MatrixXd a = data.w.transpose() * data.d.asDiagonal() * data.w + lam[0] * r1 + lam[1] * r2;
    const Eigen::VectorXd expect = a.inverse() * (data.w.transpose() * data.d.asDiagonal() * data.y);
    EXPECT_LT((fit.beta - expect).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Regress, ObjectiveIsMinimalUnderPerturbation) {
    BSplineBasis b(10, 0.0, 1.0);
    auto data = spline_data(b, uniform_times(80, 0.0, 1.0), [](double t) { return std::cos(5 * t); }, 0.2, 12);
    const std::vector<Eigen::MatrixXd> pens = {b.roughness()};
    const std::vector<double> lam = {1e-3};
    const auto fit = sfm::solve_fixed_lambda(make_problem(data, pens), lam);
    const double base = objective(data, pens, lam, fit.beta);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd(0.0, 1e-3);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd eps(b.dim());
        for (auto& v : eps) v = nd(rng);
        EXPECT_LE(base, objective(data, pens, lam, fit.beta + eps));
    }
}

TEST(Regress, CriterionMatchesMarginalLikelihoodForm) {
    // proper prior (ridge present) so V = D^-1 + W S^-1 W' is well defined
    BSplineBasis b(9, 0.0, 1.0);
    auto data = spline_data(b, uniform_times(150, 0.0, 1.0), [](double t) { return t * t; }, 0.1, 21);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    for (auto& v : data.d) v = unif(rng);
    const std::vector<Eigen::MatrixXd> pens = {b.roughness(), Eigen::MatrixXd::Identity(9, 9)};
    PenalizedSolver solver(sfm::accumulate(make_problem(data, pens)), pens);
    for (const std::vector<double>& lam : {std::vector<double>{0.01, 0.1}, {3.0, 0.02}, {1e-4, 1.0}}) {
        const Eigen::MatrixXd s = lam[0] * pens[0] + lam[1] * pens[1];
        const Eigen::MatrixXd v = Eigen::MatrixXd(data.d.cwiseInverse().asDiagonal()) +
                                  data.w * s.inverse() * data.w.transpose();
        Eigen::LLT<Eigen::MatrixXd> llt(v);
        const double quad = data.y.dot(llt.solve(data.y));
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double expect = -0.5 * (150.0 * std::log(quad) + logdet);
        EXPECT_NEAR(solver.criterion(lam), expect, 1e-6 * std::abs(expect));
    }
}

TEST(Regress, RemlRecoversSmoothSignal) {
    BSplineBasis b(12, 0.0, 1.0);
    const double sd = 0.01;
    auto data = spline_data(b, uniform_times(300, 0.0, 1.0), [](double t) { return std::sin(2 * std::numbers::pi * t); },
                            sd, 31);
    const std::vector<Eigen::MatrixXd> pens = {b.roughness()};
    PenalizedSolver solver(sfm::accumulate(make_problem(data, pens)), pens);
    const std::vector<double> init = {solver.scale(0) * 1e3};
    const auto fit = solver.fit_reml(init);
    const Eigen::VectorXd res = data.y - data.w * fit.beta;
    EXPECT_LE(std::sqrt(res.squaredNorm() / res.size()), 2.0 * sd);
    EXPECT_GE(fit.reml, solver.criterion(init));
    EXPECT_GT(fit.edf, 0.0);
    EXPECT_LE(fit.edf, b.dim() + 1e-9);
    EXPECT_GT(fit.sigma2, 0.0);
}

TEST(Regress, RemlOnWhiteNoiseSmoothsHeavily) {
    BSplineBasis b(12, 0.0, 1.0);
    auto data = spline_data(b, uniform_times(300, 0.0, 1.0), [](double) { return 0.0; }, 1.0, 41);
    const auto fit = sfm::fit_reml(make_problem(data, {b.roughness()}), {1.0});
    EXPECT_LT(fit.edf, b.dim() / 2.0);
    EXPECT_GT(fit.edf, 0.0);
}

TEST(Regress, ChunkingDoesNotChangeResult) {
    BSplineBasis b(10, 0.0, 1.0);
    auto data = spline_data(b, uniform_times(97, 0.0, 1.0), [](double t) { return t; }, 0.5, 3);
    const auto a = sfm::accumulate(make_problem(data, {}, 1));
    const auto c = sfm::accumulate(make_problem(data, {}, 5));
    EXPECT_LT((a.wdw - c.wdw).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_DOUBLE_EQ(a.count, c.count);
    EXPECT_EQ((a.wdw - a.wdw.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Regress, RejectsBadWeights) {
    BSplineBasis b(6, 0.0, 1.0);
    auto data = spline_data(b, uniform_times(10, 0.0, 1.0), [](double t) { return t; }, 0.0, 1);
    data.d[3] = 0.0;
    EXPECT_THROW(sfm::accumulate(make_problem(data, {})), sfm::Error);
}

TEST(Regress, RankDeficientDesignIsRescuedByJitter) {
    DenseData data;
    data.w = Eigen::MatrixXd::Zero(5, 3);
    data.w.col(0).setOnes();
    data.y = Eigen::VectorXd::Constant(5, 2.0);
    data.d = Eigen::VectorXd::Ones(5);
    const auto fit = sfm::solve_fixed_lambda(make_problem(data, {}), {});
    EXPECT_GT(fit.jitter, 0.0);
    EXPECT_LE(fit.jitter, 1e-6 * 5.0 / 3.0 * 1.0001);
    EXPECT_NEAR(fit.beta[0], 2.0, 1e-8);
    EXPECT_TRUE(fit.beta.allFinite());
}

TEST(Regress, SymmetricSurfaceFitIsSymmetric) {
    sfm::TensorBasis tb({BSplineBasis(7, 0, 1), BSplineBasis(7, 0, 1)});
    const auto pens = tb.penalties();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> nd;
    const int pairs = 200;
    DenseData data;
    data.w.resize(2 * pairs, tb.dim());
    data.y.resize(2 * pairs);
    data.d = Eigen::VectorXd::Ones(2 * pairs);
    for (int i = 0; i < pairs; ++i) {
        const double t = unif(rng), s = unif(rng);
        const double y = std::exp(-(t - s) * (t - s) / 0.1) + 0.1 * nd(rng);
        const double p1[2] = {t, s}, p2[2] = {s, t};
        data.w.row(2 * i) = tb.eval_dense(p1).transpose();
        data.w.row(2 * i + 1) = tb.eval_dense(p2).transpose();
        data.y[2 * i] = data.y[2 * i + 1] = y;
    }
    const Eigen::MatrixXd tied = pens[0] + pens[1];
    const auto fit = sfm::fit_reml(make_problem(data, {tied}), {1.0});
    for (int a = 0; a < 7; ++a)
        for (int c = 0; c < 7; ++c) EXPECT_NEAR(fit.beta[a * 7 + c], fit.beta[c * 7 + a], 1e-8);
}

TEST(SmoothingSpline, ReproducesCubic) {
    std::vector<std::pair<double, double>> pts;
    auto cubic = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t * t; };
    for (double t : {0.0, 0.15, 0.3, 0.44, 0.61, 0.8, 0.93, 1.0}) pts.emplace_back(t, cubic(t));
    const auto curve = sfm::smoothing_spline_1d(pts, 10, 0.0, 1.0);
    EXPECT_FALSE(curve.is_linear_fallback());
    for (const auto& [t, y] : pts) EXPECT_NEAR(curve(t), y, 1e-6);
}

TEST(SmoothingSpline, DenoisesSine) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0.0, 0.1);
    std::vector<std::pair<double, double>> pts;
    auto f = [](double t) { return std::sin(2 * std::numbers::pi * t); };
    for (double t : uniform_times(30, 0.0, 1.0)) pts.emplace_back(t, f(t) + nd(rng));
    const auto curve = sfm::smoothing_spline_1d(pts, 12, 0.0, 1.0);
    double sse = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double t = i / 200.0;
        sse += std::pow(curve(t) - f(t), 2);
    }
    EXPECT_LT(std::sqrt(sse / 201), 0.1);
}

TEST(SmoothingSpline, FewPointsFallBackToLinear) {
    std::vector<std::pair<double, double>> pts = {{0.0, 1.0}, {0.5, 2.0}, {1.0, 0.0}};
    const auto curve = sfm::smoothing_spline_1d(pts, 8, 0.0, 1.0);
    EXPECT_TRUE(curve.is_linear_fallback());
    EXPECT_DOUBLE_EQ(curve(0.25), 1.5);
    EXPECT_DOUBLE_EQ(curve(0.75), 1.0);
    EXPECT_DOUBLE_EQ(curve(0.5), 2.0);
}
