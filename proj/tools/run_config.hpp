#pragma once

#include <string>

#include "sfm/bench.hpp"
#include "sfm/eval.hpp"
#include "sfm/io.hpp"

namespace sfm::cli {

struct PredictSettings {
    PredictionConfig model;
    int max_horizon = 5;
    double validation_fraction = 0.2;
};

/// Everything a subcommand may read. Loaded from --config, then overridden
/// by flags, validated, and written to the run manifest.
struct RunConfig {
    BenchConfig bench;  ///< marginal, KL spec, sampling, generator, fda, m, ...
    PredictSettings predict;
    int evaluate_components = 2;
};

json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j);

Marginal marginal_from(const std::string& s);
const char* marginal_name(Marginal m);

}  // namespace sfm::cli
