#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/flow.hpp"
#include "sfm/splines.hpp"

namespace sfm {

/// Backward-flow scores psi_1(X_i(T_ij)), one vector per subject aligned with
/// its points. Points whose integration failed hold NaN and are skipped later.
struct LatentScores {
    std::vector<std::vector<double>> values;
    std::size_t excluded = 0;
};

LatentScores latent_scores(const IrregularDataset& ds, const TensorSplineField& field, int steps = 50);

/// Symmetrises a, clips its eigenvalues from below at floor * max eigenvalue.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a, double floor = 1e-10);
/// project_psd followed by D^{-1/2} A D^{-1/2} and an exact unit diagonal.
Eigen::MatrixXd project_correlation(const Eigen::MatrixXd& a);

struct SurfaceConfig {
    int dim = 10;  ///< marginal spline dimension of the surface
    int quad_points = 8;
    std::size_t chunks = 16;
};

struct CorrelationSurface {
    TensorBasis tensor;
    Eigen::VectorXd beta;
    double lambda = 0.0;
    Eigen::MatrixXd grid_matrix;  ///< projected correlation on grid x grid
};

/// Smooths the products score_ij1 * score_ij2 over all ordered pairs of each
/// subject (diagonal included) with weights 1/(n J_i^2), using one smoothing
/// parameter on R_t + R_s, then projects the grid evaluation to a correlation.
CorrelationSurface estimate_surface(const IrregularDataset& ds, const LatentScores& scores,
                                    const SurfaceConfig& cfg = {});

enum class BaseFamily { gaussian, student_t };

struct CopulaBaseModel {
    BaseFamily family = BaseFamily::gaussian;
    double nu = 0.0;  ///< degrees of freedom, > 2 for student_t
    Eigen::MatrixXd correlation;
    Eigen::MatrixXd chol;  ///< lower factor of correlation + jitter * I
    double jitter = 0.0;
};

/// Factorises the correlation with escalating jitter (1e-14 to 1e-8 of its norm).
CopulaBaseModel make_base_model(BaseFamily family, double nu, Eigen::MatrixXd correlation);

/// m x grid matrix of base curves with standard normal marginals.
Eigen::MatrixXd sample_base(const CopulaBaseModel& model, std::size_t m, std::uint64_t seed);

struct NuOptions {
    int min_pair_count = 10;  ///< pairwise-complete subjects needed for a column pair
    double upper = 200.0;
    double lower = 2.05;
};

struct NuEstimate {
    double nu = 0.0;
    std::size_t pairs = 0;
    double log_likelihood = 0.0;
    bool at_upper = false;  ///< optimum at the upper end: effectively Gaussian
};

/// Kendall's tau over the rows where both x and y are finite.
double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
inline double tau_to_rho(double tau) { return std::sin(1.5707963267948966 * tau); }

/// Pairwise composite likelihood estimate of the t-copula degrees of freedom
/// from an n x columns matrix (NaN where unobserved).
NuEstimate estimate_nu(const Eigen::MatrixXd& values, const NuOptions& opts = {});

/// Merges groups of `factor` adjacent grid columns, keeping each subject's
/// first observed value in a group.
Eigen::MatrixXd coarsen_columns(const Eigen::MatrixXd& values, int factor);

}  // namespace sfm
