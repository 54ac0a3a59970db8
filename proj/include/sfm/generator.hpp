#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "sfm/copula.hpp"
#include "sfm/dataset.hpp"
#include "sfm/flow.hpp"

namespace sfm {

struct GeneratorConfig {
    FlowConfig flow;
    SurfaceConfig surface;
    NuOptions nu;
    BaseFamily family = BaseFamily::gaussian;
    int steps = 50;  ///< RK4 steps M

    void validate() const;
};

struct SfmModel {
    RegularGrid grid;
    TensorSplineField field;
    CorrelationSurface surface;
    CopulaBaseModel base;
    GeneratorConfig config;
    std::optional<NuEstimate> nu;
    FitResult field_fit;
    std::size_t excluded_scores = 0;
};

struct GeneratedEnsemble {
    Eigen::MatrixXd curves;  ///< m x grid
    RegularGrid grid;
    std::uint64_t seed = 0;
};

/// Field, latent scores, (nu), correlation surface and base model. Errors
/// carry the stage that failed.
SfmModel fit(const IrregularDataset& ds, const GeneratorConfig& cfg);

/// Estimates nu on the grid matrix, halving the column resolution until at
/// least one column pair has enough pairwise-complete subjects.
NuEstimate estimate_nu_adaptive(const IrregularDataset& ds, const NuOptions& opts);

/// Forward-integrates every coordinate of every base curve at its grid time.
Eigen::MatrixXd transport(const TensorSplineField& field, const RegularGrid& grid, const Eigen::MatrixXd& base,
                          int steps);

GeneratedEnsemble generate(const SfmModel& model, std::size_t m, std::uint64_t seed);

}  // namespace sfm
