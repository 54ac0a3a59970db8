#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfm/eval.hpp"
#include "sfm/fda.hpp"
#include "sfm/generator.hpp"
#include "sfm/simgen.hpp"

namespace sfm {

/// One simulation-study cell: simulate, fit SFM and the GP/KL baselines,
/// generate m curves from each and score them against the truth.
struct BenchConfig {
    Marginal marginal = Marginal::gaussian;
    KlSpec kl;
    SamplingSpec sampling;
    GeneratorConfig generator;
    FdaConfig fda;
    std::size_t m = 100;
    int kl_components = 4;
    int fpca_components = 2;
    /// With noisy sampling, also fit SFM on per-subject denoised data.
    bool compare_denoised = false;
    int denoise_basis_dim = 8;
    /// Probe grid size for the roundtrip check (probes x probes).
    int roundtrip_probes = 20;

    void validate() const;
};

struct MethodScore {
    std::string method;  ///< SFM, GP, KL, or SFM-denoised
    MseReport mse;
    double w2 = 0.0;                 ///< against m fresh truth curves
    double positive_fraction = 0.0;  ///< generated values > 0
};

struct ReplicationResult {
    int replication = 0;
    std::uint64_t seed = 0;
    std::vector<MethodScore> scores;
    double surface_min_eigenvalue = 0.0;
    double surface_diag_error = 0.0;
    RoundtripStats roundtrip;
    std::optional<NuEstimate> nu;
    double seconds = 0.0;
};

/// Replication r uses seed derive_seed(master, r); sub-steps draw from fixed
/// counters of that seed, so results do not depend on threading.
ReplicationResult run_replication(const BenchConfig& cfg, std::uint64_t master_seed, int replication);

/// Runs replications 0..count-1, spreading them over `threads` workers.
std::vector<ReplicationResult> run_bench(const BenchConfig& cfg, std::uint64_t master_seed, int count,
                                         std::size_t threads);

}  // namespace sfm
