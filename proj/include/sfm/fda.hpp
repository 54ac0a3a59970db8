#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/regress.hpp"

namespace sfm {

struct FdaConfig {
    int mean_dim = 10;
    int cov_dim = 10;
    int quad_points = 8;
};

/// Pooled penalised spline fit of all observations, evaluated on the grid.
Eigen::VectorXd smooth_mean(const IrregularDataset& ds, const FdaConfig& cfg = {});

/// Tensor spline smoothing of centred cross products (one tied smoothing
/// parameter), evaluated on grid x grid and symmetrised. With
/// exclude_diagonal the j1 = j2 products, which carry measurement noise, are left out.
Eigen::MatrixXd smooth_covariance(const IrregularDataset& ds, const Eigen::VectorXd& mean, bool exclude_diagonal,
                                  const FdaConfig& cfg = {});

/// Eigenpairs of the covariance operator discretised with trapezoid weights:
/// eigenfunctions have unit trapezoid norm and are sign-aligned so that their
/// integral is >= 0 (ties: first nonzero value positive). Negative
/// eigenvalues are clipped to 0. Returns the top k in decreasing order.
struct Eigenpairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd functions;  ///< k x grid
};
Eigenpairs covariance_eigen(const Eigen::MatrixXd& cov, const RegularGrid& grid, int k);

/// Turns m x grid curves into a dataset observed at every grid point.
IrregularDataset dense_dataset(const Eigen::MatrixXd& curves, const RegularGrid& grid);

/// Per-subject smoothing splines with min(max(J_i - 1, 4), basis_dim)
/// functions; subjects with fewer than four points are linearly interpolated.
std::vector<SmoothCurve> smooth_subjects(const IrregularDataset& ds, int basis_dim = 8);
/// Every observation replaced by its subject's smoothed value.
IrregularDataset denoise(const IrregularDataset& ds, int basis_dim = 8);

}  // namespace sfm
