#include "run_config.hpp"

#include <fmt/format.h>

#include "sfm/error.hpp"

namespace sfm::cli {

Marginal marginal_from(const std::string& s) {
    if (s == "gaussian") return Marginal::gaussian;
    if (s == "gamma") return Marginal::gamma;
    fail_validation(Stage::config, fmt::format("simulate.marginal: unknown value '{}' (gaussian | gamma)", s));
}

const char* marginal_name(Marginal m) { return m == Marginal::gaussian ? "gaussian" : "gamma"; }

json to_json(const RunConfig& cfg) {
    const auto& b = cfg.bench;
    return {
        {"simulate",
         {{"marginal", marginal_name(b.marginal)},
          {"n", b.sampling.n},
          {"j_lo", b.sampling.j_lo},
          {"j_hi", b.sampling.j_hi},
          {"grid_size", b.sampling.grid_size},
          {"noise_level", b.sampling.noise_level},
          {"K", b.kl.K},
          {"mean_dim", b.kl.mean_dim},
          {"mean_order", b.kl.mean_order}}},
        {"generator", sfm::to_json(b.generator)},
        {"fda", {{"mean_dim", b.fda.mean_dim}, {"cov_dim", b.fda.cov_dim}, {"quad_points", b.fda.quad_points}}},
        {"bench",
         {{"m", b.m},
          {"kl_components", b.kl_components},
          {"fpca_components", b.fpca_components},
          {"compare_denoised", b.compare_denoised},
          {"denoise_basis_dim", b.denoise_basis_dim},
          {"roundtrip_probes", b.roundtrip_probes}}},
        {"predict",
         {{"L", cfg.predict.model.L},
          {"x_margin", cfg.predict.model.x_margin},
          {"quad_points", cfg.predict.model.quad_points},
          {"max_horizon", cfg.predict.max_horizon},
          {"validation_fraction", cfg.predict.validation_fraction}}},
        {"evaluate", {{"components", cfg.evaluate_components}}},
    };
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    auto& b = cfg.bench;
    ConfigReader top(j, "");
    if (top.has("simulate")) {
        ConfigReader r(top.sub("simulate"), "simulate");
        std::string marginal = marginal_name(b.marginal);
        r.read("marginal", marginal);
        b.marginal = marginal_from(marginal);
        r.read("n", b.sampling.n);
        r.read("j_lo", b.sampling.j_lo);
        r.read("j_hi", b.sampling.j_hi);
        r.read("grid_size", b.sampling.grid_size);
        r.read("noise_level", b.sampling.noise_level);
        r.read("K", b.kl.K);
        r.read("mean_dim", b.kl.mean_dim);
        r.read("mean_order", b.kl.mean_order);
        r.reject_unknown();
        require(b.kl.K >= 2, r.field("K"), "must be at least 2");
        require(b.kl.mean_dim >= b.kl.mean_order && b.kl.mean_order >= 2, "simulate.mean_dim/mean_order",
                "need 2 <= mean_order <= mean_dim");
    }
    if (top.has("generator")) b.generator = generator_config_from_json(top.sub("generator"));
    if (top.has("fda")) {
        ConfigReader r(top.sub("fda"), "fda");
        r.read("mean_dim", b.fda.mean_dim);
        r.read("cov_dim", b.fda.cov_dim);
        r.read("quad_points", b.fda.quad_points);
        r.reject_unknown();
        require(b.fda.mean_dim >= 4, r.field("mean_dim"), "must be at least 4");
        require(b.fda.cov_dim >= 4, r.field("cov_dim"), "must be at least 4");
    }
    if (top.has("bench")) {
        ConfigReader r(top.sub("bench"), "bench");
        r.read("m", b.m);
        r.read("kl_components", b.kl_components);
        r.read("fpca_components", b.fpca_components);
        r.read("compare_denoised", b.compare_denoised);
        r.read("denoise_basis_dim", b.denoise_basis_dim);
        r.read("roundtrip_probes", b.roundtrip_probes);
        r.reject_unknown();
        require(b.denoise_basis_dim >= 4, r.field("denoise_basis_dim"), "must be at least 4");
    }
    if (top.has("predict")) {
        ConfigReader r(top.sub("predict"), "predict");
        r.read("L", cfg.predict.model.L);
        r.read("x_margin", cfg.predict.model.x_margin);
        r.read("quad_points", cfg.predict.model.quad_points);
        r.read("max_horizon", cfg.predict.max_horizon);
        r.read("validation_fraction", cfg.predict.validation_fraction);
        r.reject_unknown();
        require(cfg.predict.model.L >= 4, r.field("L"), "must be at least 4");
        require(cfg.predict.max_horizon >= 1, r.field("max_horizon"), "must be at least 1");
        require(cfg.predict.validation_fraction > 0.0 && cfg.predict.validation_fraction < 1.0,
                r.field("validation_fraction"), "must lie in (0, 1)");
    }
    if (top.has("evaluate")) {
        ConfigReader r(top.sub("evaluate"), "evaluate");
        r.read("components", cfg.evaluate_components);
        r.reject_unknown();
        require(cfg.evaluate_components >= 2, r.field("components"), "must be at least 2");
    }
    top.reject_unknown();
    return cfg;
}

}  // namespace sfm::cli
