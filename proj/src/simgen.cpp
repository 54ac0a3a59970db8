#include "sfm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfm/error.hpp"
#include "sfm/fda.hpp"
#include "sfm/random.hpp"
#include "sfm/special.hpp"

namespace sfm {

namespace {
constexpr double kGammaShape = 0.5;
constexpr double kGammaRate = 1.0;
}  // namespace

double fourier(int k, double t) {
    if (k < 1) fail_validation(Stage::config, "fourier index starts at 1");
    const int r = (k + 1) / 2;
    const double arg = 2.0 * std::numbers::pi * r * t;
    return std::numbers::sqrt2 * (k % 2 == 1 ? std::sin(arg) : std::cos(arg));
}

void SamplingSpec::validate() const {
    if (n < 1) fail_validation(Stage::config, "n must be positive");
    if (grid_size < 4) fail_validation(Stage::config, "grid size must be at least 4");
    if (j_lo < 2 || j_lo > j_hi || j_hi > grid_size) {
        fail_validation(Stage::config, "need 2 <= j_lo <= j_hi <= grid size");
    }
    if (!(noise_level >= 0.0)) fail_validation(Stage::config, "noise level must be nonnegative");
}

TruthOracle::TruthOracle(Marginal marginal, RegularGrid grid, BSplineBasis mean_basis, Eigen::VectorXd mean_coeffs,
                         std::vector<double> sigmas)
    : marginal_(marginal),
      grid_(std::move(grid)),
      basis_(std::move(mean_basis)),
      coeffs_(std::move(mean_coeffs)),
      sigmas_(std::move(sigmas)) {
    if (coeffs_.size() != basis_.dim()) fail_validation(Stage::config, "mean coefficient count mismatch");
    for (double s : sigmas_)
        if (!(s > 0.0)) fail_validation(Stage::config, "sigma_k must be positive");
}

double TruthOracle::latent_mean(double t) const { return basis_.eval(t).dot(coeffs_); }

double TruthOracle::latent_variance(double t) const {
    double v = 0.0;
    for (int k = 1; k <= K(); ++k) {
        const double p = fourier(k, t);
        v += sigmas_[k - 1] * sigmas_[k - 1] * p * p;
    }
    return v;
}

double TruthOracle::transform(double t, double latent) const {
    if (marginal_ == Marginal::gaussian) return latent;
    const double z = (latent - latent_mean(t)) / std::sqrt(latent_variance(t));
    // upper tail through the survival function keeps precision for large z
    if (z > 0.0) return special::gamma_quantile_upper(special::normal_sf(z), kGammaShape, kGammaRate);
    return special::gamma_quantile(special::normal_cdf(z), kGammaShape, kGammaRate);
}

double TruthOracle::mean_norm() const {
    Eigen::VectorXd m(grid_.size());
    for (int g = 0; g < grid_.size(); ++g) m[g] = latent_mean(grid_[g]);
    return std::sqrt(grid_.trapezoid_weights().dot(m.cwiseProduct(m)));
}

namespace {

// Normalised Hermite coefficients a_n = E[g(Z) He_n(Z)] / sqrt(n!) of
// g = Gamma quantile o Phi, n = 0..N, by trapezoid on [-12, 12].
const std::vector<double>& gamma_hermite_coefficients() {
    static const std::vector<double> a = [] {
        constexpr int N = 60;
        constexpr double lo = -12.0, hi = 12.0, h = 1e-3;
        std::vector<double> c(N + 1, 0.0);
        const int steps = static_cast<int>(std::lround((hi - lo) / h));
        std::vector<double> herm(N + 1);
        for (int i = 0; i <= steps; ++i) {
            const double z = lo + h * i;
            const double w = (i == 0 || i == steps ? 0.5 : 1.0) * h * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
            const double gz = z > 0.0 ? special::gamma_quantile_upper(special::normal_sf(z), kGammaShape, kGammaRate)
                                      : special::gamma_quantile(special::normal_cdf(z), kGammaShape, kGammaRate);
            herm[0] = 1.0;
            herm[1] = z;
            for (int n = 1; n < N; ++n) herm[n + 1] = (z * herm[n] - std::sqrt(static_cast<double>(n)) * herm[n - 1]) / std::sqrt(n + 1.0);
            for (int n = 0; n <= N; ++n) c[n] += w * gz * herm[n];
        }
        return c;
    }();
    return a;
}

}  // namespace

Eigen::MatrixXd TruthOracle::latent_covariance_on_grid() const {
    const Eigen::MatrixXd psi = latent_eigenfunctions();
    Eigen::VectorXd s2(K());
    for (int k = 0; k < K(); ++k) s2[k] = sigmas_[k] * sigmas_[k];
    return psi.transpose() * s2.asDiagonal() * psi;
}

Eigen::MatrixXd TruthOracle::covariance_on_grid() const {
    Eigen::MatrixXd c = latent_covariance_on_grid();
    if (marginal_ == Marginal::gaussian) return c;
    // Mehler expansion: Cov(g(Z_s), g(Z_t)) = sum_{n>=1} a_n^2 rho^n, with the
    // truncation remainder put on rho^(N+1) so the variance is exact.
    const auto& a = gamma_hermite_coefficients();
    const double variance = kGammaShape / (kGammaRate * kGammaRate);
    double captured = 0.0;
    for (std::size_t n = 1; n < a.size(); ++n) captured += a[n] * a[n];
    const double rest = std::max(variance - captured, 0.0);
    const Eigen::VectorXd sd = c.diagonal().cwiseSqrt();
    for (int s = 0; s < grid_.size(); ++s)
        for (int t = 0; t < grid_.size(); ++t) {
            const double rho = std::clamp(c(s, t) / (sd[s] * sd[t]), -1.0, 1.0);
            double sum = 0.0, power = 1.0;
            for (std::size_t n = 1; n < a.size(); ++n) {
                power *= rho;
                sum += a[n] * a[n] * power;
            }
            c(s, t) = sum + rest * power * rho;
        }
    return c;
}

Eigen::VectorXd TruthOracle::mean_on_grid() const {
    Eigen::VectorXd m(grid_.size());
    for (int g = 0; g < grid_.size(); ++g)
        m[g] = marginal_ == Marginal::gaussian ? latent_mean(grid_[g]) : kGammaShape / kGammaRate;
    return m;
}

Eigen::VectorXd TruthOracle::median_on_grid() const {
    if (marginal_ == Marginal::gaussian) return mean_on_grid();
    return Eigen::VectorXd::Constant(grid_.size(), special::gamma_quantile(0.5, kGammaShape, kGammaRate));
}

Eigen::MatrixXd TruthOracle::latent_eigenfunctions() const {
    Eigen::MatrixXd e(K(), grid_.size());
    for (int k = 0; k < K(); ++k)
        for (int g = 0; g < grid_.size(); ++g) e(k, g) = fourier(k + 1, grid_[g]);
    return e;
}

Eigen::MatrixXd TruthOracle::eigenfunctions_on_grid() const {
    if (marginal_ == Marginal::gaussian) return latent_eigenfunctions();
    return covariance_eigen(covariance_on_grid(), grid_, K()).functions;
}

Eigen::MatrixXd TruthOracle::draw(std::size_t m, std::uint64_t seed) const {
    Eigen::VectorXd mu(grid_.size());
    for (int g = 0; g < grid_.size(); ++g) mu[g] = latent_mean(grid_[g]);
    const Eigen::MatrixXd psi = latent_eigenfunctions();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m), grid_.size());
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> nd;
    for (std::size_t l = 0; l < m; ++l) {
        Eigen::VectorXd x = mu;
        for (int k = 0; k < K(); ++k) x += sigmas_[k] * nd(rng) * psi.row(k).transpose();
        for (int g = 0; g < grid_.size(); ++g) out(static_cast<Eigen::Index>(l), g) = transform(grid_[g], x[g]);
    }
    return out;
}

Simulation simulate(Marginal marginal, const KlSpec& spec, const SamplingSpec& sampling, std::uint64_t seed) {
    sampling.validate();
    if (spec.K < 1) fail_validation(Stage::config, "K must be positive");
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> nd;
    RegularGrid grid(0.0, 1.0, sampling.grid_size);
    BSplineBasis basis(spec.mean_dim, 0.0, 1.0, spec.mean_order);
    Eigen::VectorXd coeffs(spec.mean_dim);
    for (int r = 0; r < spec.mean_dim; ++r) coeffs[r] = nd(rng);
    // sigma_k depends on ||mu||, which needs a provisional oracle
    TruthOracle provisional(marginal, grid, basis, coeffs, std::vector<double>(spec.K, 1.0));
    const double norm = provisional.mean_norm();
    std::vector<double> sigmas(spec.K);
    for (int k = 1; k <= spec.K; ++k) sigmas[k - 1] = norm * std::exp((5.0 - k) / 5.0) / 2.0;
    TruthOracle truth(marginal, grid, basis, coeffs, sigmas);

    const Eigen::VectorXd mu = truth.mean_on_grid();
    const Eigen::MatrixXd psi = truth.eigenfunctions_on_grid();
    std::uniform_int_distribution<int> jdist(sampling.j_lo, sampling.j_hi);
    std::vector<int> slots(grid.size());
    std::vector<Subject> subjects;
    subjects.reserve(sampling.n);
    for (int i = 0; i < sampling.n; ++i) {
        Eigen::VectorXd x = mu;
        for (int k = 0; k < spec.K; ++k) x += sigmas[k] * nd(rng) * psi.row(k).transpose();
        const int J = jdist(rng);
        for (int g = 0; g < grid.size(); ++g) slots[g] = g;
        // partial Fisher-Yates: the first J entries are a uniform draw without replacement
        for (int j = 0; j < J; ++j) {
            std::uniform_int_distribution<int> pick(j, grid.size() - 1);
            std::swap(slots[j], slots[pick(rng)]);
        }
        std::vector<int> chosen(slots.begin(), slots.begin() + J);
        std::sort(chosen.begin(), chosen.end());
        Subject s{"s" + std::to_string(i + 1), {}};
        for (int g : chosen) s.points.push_back({grid[g], truth.transform(grid[g], x[g]), g});
        subjects.push_back(std::move(s));
    }
    IrregularDataset ds(grid, std::move(subjects));
    if (sampling.noise_level > 0.0) ds = add_noise(ds, sampling.noise_level, derive_seed(seed, 1));
    return {std::move(ds), std::move(truth)};
}

IrregularDataset add_noise(const IrregularDataset& ds, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) fail_validation(Stage::config, "noise level must be nonnegative");
    if (level == 0.0) return ds;
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> nd;
    std::vector<Subject> subjects = ds.subjects();
    for (auto& s : subjects) {
        double ms = 0.0;
        for (const auto& p : s.points) ms += p.x * p.x;
        ms /= static_cast<double>(s.points.size());
        const double sd = std::sqrt(ms * level);
        for (auto& p : s.points) p.x += sd * nd(rng);
    }
    return IrregularDataset(ds.grid(), std::move(subjects));
}

}  // namespace sfm
