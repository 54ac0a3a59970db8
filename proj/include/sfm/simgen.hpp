#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/splines.hpp"

namespace sfm {

/// psi_{2r-1}(t) = sqrt2 sin(2 pi r t), psi_{2r}(t) = sqrt2 cos(2 pi r t), k >= 1.
double fourier(int k, double t);

struct KlSpec {
    int K = 4;
    int mean_dim = 6;    ///< B-spline functions in the mean
    int mean_order = 5;  ///< degree 4
};

struct SamplingSpec {
    int n = 100;
    int j_lo = 2;
    int j_hi = 6;
    int grid_size = 50;
    double noise_level = 0.0;

    void validate() const;
};

enum class Marginal { gaussian, gamma };

/// Ground truth of one simulated replication.
class TruthOracle {
public:
    TruthOracle() = default;
    TruthOracle(Marginal marginal, RegularGrid grid, BSplineBasis mean_basis, Eigen::VectorXd mean_coeffs,
                std::vector<double> sigmas);

    Marginal marginal() const noexcept { return marginal_; }
    const RegularGrid& grid() const noexcept { return grid_; }
    const BSplineBasis& mean_basis() const noexcept { return basis_; }
    const Eigen::VectorXd& mean_coeffs() const noexcept { return coeffs_; }
    const std::vector<double>& sigmas() const noexcept { return sigmas_; }
    int K() const noexcept { return static_cast<int>(sigmas_.size()); }

    /// Latent KL mean mu(t).
    double latent_mean(double t) const;
    /// Latent marginal variance sum_k sigma_k^2 psi_k(t)^2.
    double latent_variance(double t) const;
    /// Maps a latent value at t to the observed scale (identity for gaussian).
    double transform(double t, double latent) const;

    /// Trapezoid L2 norm of the latent mean mu on the grid.
    double mean_norm() const;
    /// Mean, median, covariance and top-K eigenfunctions of the observed
    /// process on the grid. For the gamma marginal the mean is shape/rate and
    /// the covariance follows from the Hermite expansion of the marginal map.
    Eigen::VectorXd mean_on_grid() const;
    Eigen::VectorXd median_on_grid() const;
    Eigen::MatrixXd covariance_on_grid() const;
    Eigen::MatrixXd eigenfunctions_on_grid() const;  ///< K x grid
    Eigen::MatrixXd latent_covariance_on_grid() const;

    /// m fresh curves on the grid.
    Eigen::MatrixXd draw(std::size_t m, std::uint64_t seed) const;

private:
    Eigen::MatrixXd latent_eigenfunctions() const;

    Marginal marginal_ = Marginal::gaussian;
    RegularGrid grid_;
    BSplineBasis basis_;
    Eigen::VectorXd coeffs_;
    std::vector<double> sigmas_;
};

struct Simulation {
    IrregularDataset data;
    TruthOracle truth;
};

/// One replication: mean coefficients ~ N(0,1), sigma_k = ||mu|| exp((5-k)/5)/2,
/// J_i uniform on the range, times drawn without replacement from the grid;
/// noise added when sampling.noise_level > 0.
Simulation simulate(Marginal marginal, const KlSpec& spec, const SamplingSpec& sampling, std::uint64_t seed);
inline Simulation simulate_gaussian(const KlSpec& spec, const SamplingSpec& sampling, std::uint64_t seed) {
    return simulate(Marginal::gaussian, spec, sampling, seed);
}
inline Simulation simulate_gamma(const KlSpec& spec, const SamplingSpec& sampling, std::uint64_t seed) {
    return simulate(Marginal::gamma, spec, sampling, seed);
}

/// Adds N(0, level * mean_j X_ij^2) noise independently to every point of subject i.
IrregularDataset add_noise(const IrregularDataset& ds, double level, std::uint64_t seed);

}  // namespace sfm
