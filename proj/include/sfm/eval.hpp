#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/fda.hpp"
#include "sfm/splines.hpp"

namespace sfm {

/// Minimum-cost perfect matching of a square cost matrix: result[r] is the
/// column assigned to row r.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Empirical 2-Wasserstein distance between two equal-size curve ensembles
/// (rows) under the trapezoid L2 ground cost on the grid.
double wasserstein2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const RegularGrid& grid);

struct FpcaSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenfunctions;  ///< k x grid, trapezoid-orthonormal
    Eigen::VectorXd median;          ///< pointwise median; empty for irregular data
};

/// Smoothed mean and covariance of a dense m x grid ensemble (diagonal products included).
FpcaSummary fpca_summary(const Eigen::MatrixXd& curves, const RegularGrid& grid, int k, const FdaConfig& cfg = {});
/// Same for sparse data, leaving out the j1 = j2 products.
FpcaSummary fpca_summary(const IrregularDataset& ds, int k, const FdaConfig& cfg = {});

struct MseReport {
    double mf = 0.0;
    double ef1 = 0.0;
    double ef2 = 0.0;
    double mdf = 0.0;  ///< NaN when either side has no median
};

/// Trapezoid integral of squared differences; eigenfunction errors take the
/// smaller of the two sign choices.
double integrated_sq_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const RegularGrid& grid);
MseReport mse_against_truth(const FpcaSummary& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& eigenfunctions,
                            const Eigen::VectorXd& median, const RegularGrid& grid);

struct PredictionConfig {
    int L = 5;  ///< marginal dimension in x and t
    double x_margin = 0.05;
    int quad_points = 8;
};

/// One-step-ahead regression X(T_{j+1}) = f(X(T_j), T_j) on consecutive grid
/// observations, with separate REML smoothing in x and t.
class PredictionModel {
public:
    PredictionModel() = default;
    PredictionModel(TensorBasis tensor, Eigen::VectorXd beta);

    /// f(x, t); x is clamped into the fitted support.
    double operator()(double x, double t) const;
    const TensorBasis& tensor() const noexcept { return tensor_; }
    const Eigen::VectorXd& beta() const noexcept { return beta_; }

private:
    TensorBasis tensor_;
    Eigen::VectorXd beta_;
};

PredictionModel fit_prediction(const IrregularDataset& train, const PredictionConfig& cfg = {});

/// Error_g = sqrt(sum over validation pairs (j, j+g) of (X(T_{j+g}) - f^g(X(T_j)))^2),
/// with f^g the g-fold recursion through the grid times, for g = 1..max_horizon.
std::vector<double> prediction_errors(const PredictionModel& f, const IrregularDataset& validation, int max_horizon);

}  // namespace sfm
