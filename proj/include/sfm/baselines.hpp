#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/fda.hpp"
#include "sfm/generator.hpp"

namespace sfm {

/// Gaussian process with smoothed mean and PSD-projected smoothed covariance on the grid.
struct GaussianModel {
    RegularGrid grid;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd chol;  ///< lower factor of covariance (+ jitter)
};

GaussianModel fit_gp(const IrregularDataset& ds, const FdaConfig& cfg = {});
GaussianModel make_gaussian_model(RegularGrid grid, Eigen::VectorXd mean, Eigen::MatrixXd covariance);

GeneratedEnsemble sample_gp(const GaussianModel& model, std::size_t m, std::uint64_t seed);
/// Mean plus the top-k eigenfunctions with N(0, eigenvalue) scores.
GeneratedEnsemble sample_kl(const GaussianModel& model, int k, std::size_t m, std::uint64_t seed);

}  // namespace sfm
