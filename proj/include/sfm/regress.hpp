#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfm/splines.hpp"

namespace sfm {

using RowSink = std::function<void(const SparseRow& row, double y, double weight)>;

/// Weighted penalized least squares problem whose rows are produced on demand.
/// rows(chunk, emit) must emit the same rows for a chunk every time it is called;
/// rows are never stored, only reduced to normal equations.
struct PenalizedProblem {
    int dim = 0;
    std::vector<Eigen::MatrixXd> penalties;
    std::size_t chunks = 1;
    std::function<void(std::size_t chunk, const RowSink& emit)> rows;
};

/// Sufficient statistics W'DW, W'Dy, y'Dy, row count and sum of log weights.
struct NormalEquations {
    Eigen::MatrixXd wdw;
    Eigen::VectorXd wdy;
    double ydy = 0.0;
    double count = 0.0;
    double sum_log_weight = 0.0;

    explicit NormalEquations(int dim = 0);
    void add(const SparseRow& row, double y, double weight);
    void merge(const NormalEquations& other);
    /// Fills the lower triangle of wdw from the upper one.
    void finalize();
};

/// Accumulates the rows of p chunk by chunk in parallel, reducing in chunk order.
NormalEquations accumulate(const PenalizedProblem& p);

struct FitResult {
    Eigen::VectorXd beta;
    std::vector<double> lambdas;
    double sigma2 = 0.0;
    double edf = 0.0;
    double reml = 0.0;
    double jitter = 0.0;
    int cycles = 0;
    bool converged = true;
};

struct RemlOptions {
    double log10_lower = -8.0;
    double log10_upper = 8.0;
    double tolerance = 1e-4;
    int max_cycles = 20;
};

/// Fixed normal equations plus penalties; evaluates fits and the restricted
/// likelihood for any smoothing parameters.
class PenalizedSolver {
public:
    PenalizedSolver(NormalEquations ne, std::vector<Eigen::MatrixXd> penalties);

    int dim() const noexcept { return static_cast<int>(ne_.wdy.size()); }
    std::size_t penalty_count() const noexcept { return penalties_.size(); }

    /// Solves (W'DW + sum lambda_d R_d) beta = W'Dy with escalating ridge jitter.
    FitResult solve(const std::vector<double>& lambdas) const;
    /// Profiled restricted log likelihood -1/2 [m log P + log|V|].
    double criterion(const std::vector<double>& lambdas) const;
    /// Coordinate-wise golden-section search of the criterion over log10 of the
    /// scaled smoothing parameters lambda_d / scale(d).
    FitResult fit_reml(const std::vector<double>& init_lambdas, const RemlOptions& opts = {}) const;
    /// Reference magnitude of lambda_d: ||W'DW||_F / ||R_d||_F.
    double scale(std::size_t d) const { return scales_.at(d); }

    const NormalEquations& normal_equations() const noexcept { return ne_; }

private:
    struct Factor;
    Factor factorize(const std::vector<double>& lambdas) const;
    double log_pseudo_det(const std::vector<double>& lambdas) const;

    NormalEquations ne_;
    std::vector<Eigen::MatrixXd> penalties_;
    std::vector<double> scales_;
    Eigen::MatrixXd range_basis_;
};

FitResult solve_fixed_lambda(const PenalizedProblem& p, const std::vector<double>& lambdas);
FitResult fit_reml(const PenalizedProblem& p, const std::vector<double>& init_lambdas, const RemlOptions& opts = {});

/// Univariate penalised cubic smoother with REML smoothing, or linear
/// interpolation when fewer than four points are available.
class SmoothCurve {
public:
    SmoothCurve() = default;
    SmoothCurve(BSplineBasis basis, Eigen::VectorXd beta);
    SmoothCurve(std::vector<std::pair<double, double>> knots, double lower, double upper);

    double operator()(double t) const;
    bool is_linear_fallback() const noexcept { return fallback_; }
    const Eigen::VectorXd& coefficients() const noexcept { return beta_; }

private:
    bool fallback_ = false;
    BSplineBasis basis_;
    Eigen::VectorXd beta_;
    std::vector<std::pair<double, double>> points_;
    double lower_ = 0.0;
    double upper_ = 1.0;
};

SmoothCurve smoothing_spline_1d(std::span<const std::pair<double, double>> points, int basis_dim, double lower,
                                double upper);

}  // namespace sfm
