#include "sfm/baselines.hpp"

#include <cmath>

#include "sfm/copula.hpp"
#include "sfm/error.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"

namespace sfm {

GaussianModel make_gaussian_model(RegularGrid grid, Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
    const int G = grid.size();
    if (mean.size() != G || covariance.rows() != G || covariance.cols() != G) {
        fail_validation(Stage::sample, "gaussian model does not match the grid");
    }
    GaussianModel m;
    m.grid = std::move(grid);
    m.mean = std::move(mean);
    const Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const bool nonpositive = !(es.eigenvalues().maxCoeff() > 0.0);
    // The nearest PSD matrix to one without positive eigenvalues is zero.
    m.covariance = nonpositive ? Eigen::MatrixXd::Zero(G, G) : project_psd(sym);
    const double norm = m.covariance.norm();
    if (norm == 0.0) {
        m.chol = Eigen::MatrixXd::Zero(G, G);
        return m;
    }
    for (double jitter = 0.0; jitter <= 1e-8 * norm * (1 + 1e-9); jitter = jitter == 0.0 ? 1e-14 * norm : jitter * 10) {
        Eigen::LLT<Eigen::MatrixXd> llt(m.covariance + jitter * Eigen::MatrixXd::Identity(G, G));
        if (llt.info() == Eigen::Success) {
            m.chol = llt.matrixL();
            return m;
        }
    }
    fail_numerical(Stage::sample, "covariance factorization failed after jitter 1e-8 * norm");
}

GaussianModel fit_gp(const IrregularDataset& ds, const FdaConfig& cfg) {
    Eigen::VectorXd mean = smooth_mean(ds, cfg);
    Eigen::MatrixXd cov = smooth_covariance(ds, mean, true, cfg);
    return make_gaussian_model(ds.grid(), std::move(mean), std::move(cov));
}

GeneratedEnsemble sample_gp(const GaussianModel& model, std::size_t m, std::uint64_t seed) {
    const int G = model.grid.size();
    GeneratedEnsemble ens{Eigen::MatrixXd(static_cast<Eigen::Index>(m), G), model.grid, seed};
    parallel_for(m, [&](std::size_t l) {
        Rng rng = make_rng(seed, l);
        std::normal_distribution<double> nd;
        Eigen::VectorXd z(G);
        for (int g = 0; g < G; ++g) z[g] = nd(rng);
        ens.curves.row(static_cast<Eigen::Index>(l)) = (model.mean + model.chol.triangularView<Eigen::Lower>() * z).transpose();
    });
    return ens;
}

GeneratedEnsemble sample_kl(const GaussianModel& model, int k, std::size_t m, std::uint64_t seed) {
    const int G = model.grid.size();
    if (k < 0 || k > G) fail_validation(Stage::sample, "KL component count out of range");
    const Eigenpairs e = covariance_eigen(model.covariance, model.grid, k);
    if (k > 0 && !(e.values[0] > 0.0)) fail_numerical(Stage::sample, "leading eigenvalue is not positive");
    GeneratedEnsemble ens{Eigen::MatrixXd(static_cast<Eigen::Index>(m), G), model.grid, seed};
    parallel_for(m, [&](std::size_t l) {
        Rng rng = make_rng(seed, l);
        std::normal_distribution<double> nd;
        Eigen::VectorXd x = model.mean;
        for (int r = 0; r < k; ++r) x += std::sqrt(e.values[r]) * nd(rng) * e.functions.row(r).transpose();
        ens.curves.row(static_cast<Eigen::Index>(l)) = x.transpose();
    });
    return ens;
}

}  // namespace sfm
