#include "sfm/bench.hpp"

#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "sfm/baselines.hpp"
#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"

namespace sfm {

void BenchConfig::validate() const {
    sampling.validate();
    generator.validate();
    if (m < 2) fail_validation(Stage::config, "m: ensemble size must be at least 2");
    if (kl_components < 0 || kl_components > sampling.grid_size) {
        fail_validation(Stage::config, "kl_components: must lie in [0, grid_size]");
    }
    if (fpca_components < 2) fail_validation(Stage::config, "fpca_components: must be at least 2");
    if (roundtrip_probes < 2) fail_validation(Stage::config, "roundtrip_probes: must be at least 2");
}

namespace {

enum Counter : std::uint64_t { c_sim = 0, c_flow, c_sfm, c_gp, c_kl, c_truth };

MethodScore score(const std::string& name, const Eigen::MatrixXd& curves, const TruthOracle& truth,
                  const Eigen::MatrixXd& truth_draws, const BenchConfig& cfg) {
    const auto& grid = truth.grid();
    MethodScore s;
    s.method = name;
    const FpcaSummary summary = fpca_summary(curves, grid, cfg.fpca_components, cfg.fda);
    s.mse = mse_against_truth(summary, truth.mean_on_grid(), truth.eigenfunctions_on_grid(), truth.median_on_grid(),
                              grid);
    s.w2 = wasserstein2(curves, truth_draws, grid);
    s.positive_fraction = (curves.array() > 0.0).cast<double>().mean();
    return s;
}

}  // namespace

ReplicationResult run_replication(const BenchConfig& cfg, std::uint64_t master_seed, int replication) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    ReplicationResult out;
    out.replication = replication;
    out.seed = derive_seed(master_seed, static_cast<std::uint64_t>(replication));
    const std::uint64_t seed = out.seed;

    const Simulation sim = simulate(cfg.marginal, cfg.kl, cfg.sampling, derive_seed(seed, c_sim));
    const auto& grid = sim.data.grid();
    const Eigen::MatrixXd truth_draws = sim.truth.draw(cfg.m, derive_seed(seed, c_truth));

    GeneratorConfig gen = cfg.generator;
    gen.flow.seed = derive_seed(seed, c_flow);
    const SfmModel model = fit(sim.data, gen);
    const Eigen::MatrixXd& c = model.surface.grid_matrix;
    out.surface_min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c, Eigen::EigenvaluesOnly)
                                     .eigenvalues()
                                     .minCoeff();
    out.surface_diag_error = (c.diagonal().array() - 1.0).abs().maxCoeff();
    out.nu = model.nu;

    std::vector<double> probes(static_cast<std::size_t>(cfg.roundtrip_probes)), times(probes.size());
    const auto [x0, x1] = model.field.x_domain();
    for (int k = 0; k < cfg.roundtrip_probes; ++k) {
        const double s = static_cast<double>(k) / (cfg.roundtrip_probes - 1);
        probes[k] = x0 + s * (x1 - x0);
        times[k] = grid.t_min() + s * (grid.t_max() - grid.t_min());
    }
    out.roundtrip = roundtrip_error(model.field, times, probes, gen.steps);

    const auto sfm_curves = generate(model, cfg.m, derive_seed(seed, c_sfm)).curves;
    out.scores.push_back(score("SFM", sfm_curves, sim.truth, truth_draws, cfg));

    const GaussianModel gp = fit_gp(sim.data, cfg.fda);
    out.scores.push_back(score("GP", sample_gp(gp, cfg.m, derive_seed(seed, c_gp)).curves, sim.truth, truth_draws, cfg));
    out.scores.push_back(score("KL", sample_kl(gp, cfg.kl_components, cfg.m, derive_seed(seed, c_kl)).curves,
                               sim.truth, truth_draws, cfg));

    if (cfg.compare_denoised) {
        const IrregularDataset clean = denoise(sim.data, cfg.denoise_basis_dim);
        const SfmModel dm = fit(clean, gen);
        // same base draws as the noisy fit, so the pair differs only through the data
        out.scores.push_back(score("SFM-denoised", generate(dm, cfg.m, derive_seed(seed, c_sfm)).curves,
                                   sim.truth, truth_draws, cfg));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log().info("replication {} done in {:.1f}s", replication, out.seconds);
    return out;
}

std::vector<ReplicationResult> run_bench(const BenchConfig& cfg, std::uint64_t master_seed, int count,
                                         std::size_t threads) {
    cfg.validate();
    if (count < 1) fail_validation(Stage::config, "replications: must be at least 1");
    std::vector<ReplicationResult> results(static_cast<std::size_t>(count));
    threads = std::clamp<std::size_t>(threads, 1, static_cast<std::size_t>(count));
    if (threads == 1) {
        for (int r = 0; r < count; ++r) results[r] = run_replication(cfg, master_seed, r);
        return results;
    }
    // Whole replications per worker; inner loops run single-threaded.
    const std::size_t saved = worker_count();
    set_worker_count(1);
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t r = w; r < results.size(); r += threads) {
                try {
                    results[r] = run_replication(cfg, master_seed, static_cast<int>(r));
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    set_worker_count(saved);
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

}  // namespace sfm
