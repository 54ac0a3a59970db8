#include "sfm/generator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/special.hpp"

namespace sfm {

void GeneratorConfig::validate() const {
    flow.validate();
    if (steps < 10) fail_validation(Stage::config, "RK4 steps must be at least 10");
    if (surface.dim < 4) fail_validation(Stage::config, "surface spline dimension must be at least 4");
}

NuEstimate estimate_nu_adaptive(const IrregularDataset& ds, const NuOptions& opts) {
    const Eigen::MatrixXd values = ds.to_grid_matrix();
    for (int factor = 1;; factor *= 2) {
        const Eigen::MatrixXd v = factor == 1 ? values : coarsen_columns(values, factor);
        try {
            NuEstimate est = estimate_nu(v, opts);
            if (factor > 1) log().info("nu estimated on a grid coarsened by {}", factor);
            return est;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::validation || v.cols() <= 2) throw;
        }
    }
}

namespace {

template <class Fn>
auto staged(Stage stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.stage() == stage || e.stage() == Stage::config) throw;
        throw e.relabel(stage);
    }
}

}  // namespace

SfmModel fit(const IrregularDataset& ds, const GeneratorConfig& cfg) {
    cfg.validate();
    SfmModel model;
    model.grid = ds.grid();
    model.config = cfg;
    FieldFit ff = fit_vector_field(ds, cfg.flow);
    model.field = std::move(ff.field);
    model.field_fit = std::move(ff.regression);

    LatentScores scores = staged(Stage::scores, [&] { return latent_scores(ds, model.field, cfg.steps); });
    model.excluded_scores = scores.excluded;

    double nu = 0.0;
    if (cfg.family == BaseFamily::student_t) {
        model.nu = staged(Stage::nu, [&] { return estimate_nu_adaptive(ds, cfg.nu); });
        nu = model.nu->nu;
        const double scale = std::sqrt((nu - 2.0) / nu);
        staged(Stage::scores, [&] {
            for (auto& v : scores.values)
                for (double& z : v)
                    if (std::isfinite(z)) z = special::t_quantile_of_normal(z, nu) * scale;
            return 0;
        });
    }
    model.surface = staged(Stage::surface, [&] { return estimate_surface(ds, scores, cfg.surface); });
    model.base = staged(Stage::sample, [&] { return make_base_model(cfg.family, nu, model.surface.grid_matrix); });
    return model;
}

Eigen::MatrixXd transport(const TensorSplineField& field, const RegularGrid& grid, const Eigen::MatrixXd& base,
                          int steps) {
    if (base.cols() != grid.size()) fail_validation(Stage::integrate, "base curves do not match the grid");
    std::vector<TensorSplineField::Slice> slices(grid.size());
    for (int g = 0; g < grid.size(); ++g) slices[g] = field.slice(grid[g]);
    Eigen::MatrixXd out(base.rows(), base.cols());
    parallel_for(static_cast<std::size_t>(base.rows()), [&](std::size_t l) {
        const auto r = static_cast<Eigen::Index>(l);
        for (int g = 0; g < grid.size(); ++g) {
            try {
                out(r, g) = integrate(slices[g], base(r, g), steps, Direction::forward);
            } catch (const Error& e) {
                throw Error(Stage::integrate, e.kind(), fmt::format("curve {}: {}", l, e.what()));
            }
        }
    });
    return out;
}

GeneratedEnsemble generate(const SfmModel& model, std::size_t m, std::uint64_t seed) {
    if (m < 1) fail_validation(Stage::sample, "ensemble size must be at least 1");
    GeneratedEnsemble ens;
    ens.grid = model.grid;
    ens.seed = seed;
    const Eigen::MatrixXd base = sample_base(model.base, m, seed);
    ens.curves = transport(model.field, model.grid, base, model.config.steps);
    return ens;
}

}  // namespace sfm
