#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "sfm/error.hpp"
#include "sfm/io.hpp"

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("sfm_io_" + name)).string();
}

sfm::Simulation small_sim(std::uint64_t seed) {
    sfm::SamplingSpec sp;
    sp.n = 60;
    sp.j_lo = 4;
    sp.j_hi = 8;
    sp.grid_size = 20;
    return sfm::simulate_gaussian({}, sp, seed);
}

void expect_config_error(const char* text, const std::string& field) {
    try {
        sfm::generator_config_from_json(sfm::json::parse(text));
        FAIL() << text;
    } catch (const sfm::Error& e) {
        EXPECT_EQ(e.kind(), sfm::ErrorKind::validation);
        EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
}

}  // namespace

TEST(Io, DatasetRoundTrip) {
    const auto sim = small_sim(1);
    const auto path = temp_path("data.json");
    sfm::write_json(sfm::to_json(sim.data), path);
    EXPECT_EQ(sfm::load_dataset(path, 0), sim.data);
    std::remove(path.c_str());
}

TEST(Io, ModelRoundTripGeneratesIdentically) {
    const auto sim = small_sim(2);
    sfm::GeneratorConfig cfg;
    cfg.family = sfm::BaseFamily::student_t;
    const auto model = sfm::fit(sim.data, cfg);
    const auto path = temp_path("model.json");
    sfm::write_json(sfm::to_json(model), path);
    const auto back = sfm::model_from_json(sfm::read_json(path));
    EXPECT_EQ(back.field.beta(), model.field.beta());
    EXPECT_EQ(back.surface.grid_matrix, model.surface.grid_matrix);
    EXPECT_EQ(back.base.chol, model.base.chol);
    ASSERT_TRUE(back.nu.has_value());
    EXPECT_EQ(back.nu->nu, model.nu->nu);
    EXPECT_EQ(sfm::generate(back, 20, 3).curves, sfm::generate(model, 20, 3).curves);
    std::remove(path.c_str());
}

TEST(Io, TruthAndGaussianRoundTrip) {
    const auto sim = small_sim(3);
    const auto truth = sfm::truth_from_json(sfm::json::parse(sfm::to_json(sim.truth).dump()));
    EXPECT_EQ(truth.mean_on_grid(), sim.truth.mean_on_grid());
    EXPECT_EQ(truth.draw(5, 1), sim.truth.draw(5, 1));
    const auto gp = sfm::fit_gp(sim.data);
    const auto back = sfm::gaussian_model_from_json(sfm::json::parse(sfm::to_json(gp).dump()));
    EXPECT_EQ(sfm::sample_gp(back, 10, 2).curves, sfm::sample_gp(gp, 10, 2).curves);
}

TEST(Io, EnsembleCsvRoundTrip) {
    const sfm::RegularGrid grid(0.0, 2.0, 9);
    sfm::GeneratedEnsemble ens{Eigen::MatrixXd::Random(7, 9), grid, 0};
    ens.curves(0, 0) = 1.0 / 3.0;
    const auto path = temp_path("ens.csv");
    sfm::write_ensemble_csv(ens, path);
    EXPECT_EQ(sfm::read_ensemble_csv(path, grid), ens.curves);
    EXPECT_THROW(sfm::read_ensemble_csv(path, sfm::RegularGrid(0.0, 2.0, 5)), sfm::Error);
    std::remove(path.c_str());
}

TEST(Io, ConfigDefaultsAndOverrides) {
    const auto def = sfm::generator_config_from_json(sfm::json::object());
    EXPECT_EQ(def.flow.H, 10);
    EXPECT_EQ(def.flow.F, 15);
    EXPECT_EQ(def.steps, 50);
    const auto cfg = sfm::generator_config_from_json(
        sfm::json::parse(R"({"flow": {"H": 20}, "base": "student-t", "steps": 80})"));
    EXPECT_EQ(cfg.flow.H, 20);
    EXPECT_EQ(cfg.family, sfm::BaseFamily::student_t);
    EXPECT_EQ(sfm::to_json(sfm::generator_config_from_json(sfm::to_json(cfg))), sfm::to_json(cfg));
}

TEST(Io, ConfigErrorsNameTheField) {
    expect_config_error(R"({"flow": {"H": 0}})", "flow.H");
    expect_config_error(R"({"flow": {"H": "ten"}})", "flow.H");
    expect_config_error(R"({"flow": {"Hx": 3}})", "flow.Hx");
    expect_config_error(R"({"surface": {"dim": 2}})", "surface.dim");
    expect_config_error(R"({"steps": 3})", "steps");
    expect_config_error(R"({"base": "cauchy"})", "base");
}

TEST(Io, RejectsForeignDocuments) {
    EXPECT_THROW(sfm::dataset_from_json(sfm::json::parse(R"({"format": "sfm-field", "version": 1})")), sfm::Error);
    EXPECT_THROW(sfm::dataset_from_json(sfm::json::parse(R"({"format": "sfm-dataset", "version": 99})")), sfm::Error);
    EXPECT_THROW(sfm::read_json(temp_path("does_not_exist.json")), sfm::Error);
}
