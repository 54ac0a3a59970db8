#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "CLI11.hpp"
#include "run_config.hpp"
#include "sfm/baselines.hpp"
#include "sfm/bench.hpp"
#include "sfm/error.hpp"
#include "sfm/fda.hpp"
#include "sfm/io.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"

#ifndef SFM_VERSION
#define SFM_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using sfm::json;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    std::optional<int> replications;
    std::optional<std::string> base;
    std::optional<int> H, F, steps, grid_size;

    // command inputs
    std::string data, model, generated, reference, validation;
    std::optional<std::size_t> m;
    std::optional<std::string> marginal;
    std::optional<int> n;
    std::optional<double> noise;
};

std::uint64_t fnv1a(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) sfm::fail_validation(sfm::Stage::io, "cannot read " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

class Run {
public:
    Run(std::string command, const Options& opt, std::vector<std::string> argv)
        : command_(std::move(command)), opt_(opt), argv_(std::move(argv)) {
        fs::create_directories(opt_.out);
        cfg_ = opt_.config.empty() ? sfm::cli::RunConfig{}
                                   : sfm::cli::run_config_from_json(sfm::read_json(opt_.config));
        auto& b = cfg_.bench;
        if (opt_.base) {
            json g = sfm::to_json(b.generator);
            g["base"] = *opt_.base;
            b.generator = sfm::generator_config_from_json(g);
        }
        if (opt_.H) b.generator.flow.H = *opt_.H;
        if (opt_.F) b.generator.flow.F = *opt_.F;
        if (opt_.steps) b.generator.steps = *opt_.steps;
        if (opt_.grid_size) b.sampling.grid_size = *opt_.grid_size;
        if (opt_.m) b.m = *opt_.m;
        if (opt_.marginal) b.marginal = sfm::cli::marginal_from(*opt_.marginal);
        if (opt_.n) b.sampling.n = *opt_.n;
        if (opt_.noise) b.sampling.noise_level = *opt_.noise;
        // round-trip through the validating reader so flag values get the same checks
        cfg_ = sfm::cli::run_config_from_json(sfm::cli::to_json(cfg_));
        b.sampling.validate();
        b.generator.validate();
        sfm::set_worker_count(opt_.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt_.threads);
    }

    const sfm::cli::RunConfig& cfg() const { return cfg_; }
    std::string path(const std::string& name) const { return (fs::path(opt_.out) / name).string(); }

    void input(const std::string& role, const std::string& p) { inputs_[role] = {{"path", p}, {"fnv1a64", hex(fnv1a(p))}}; }
    void output(const std::string& name) { outputs_[name] = hex(fnv1a(path(name))); }

    void finish() const {
        json m = {{"format", "sfm-manifest"},
                  {"version", sfm::kFormatVersion},
                  {"command", command_},
                  {"argv", argv_},
                  {"seed", opt_.seed},
                  {"config", sfm::cli::to_json(cfg_)},
                  {"inputs", inputs_},
                  {"outputs", outputs_},
                  {"software",
                   {{"sfm", SFM_VERSION},
                    {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}}}};
        sfm::write_json(m, path("manifest.json"));
    }

private:
    std::string command_;
    Options opt_;
    std::vector<std::string> argv_;
    sfm::cli::RunConfig cfg_;
    json inputs_ = json::object();
    json outputs_ = json::object();
};

void write_simulation(const sfm::Simulation& sim, Run& run, const std::string& prefix) {
    if (!prefix.empty()) fs::create_directories(run.path(prefix));
    const auto name = [&](const char* f) { return prefix.empty() ? std::string(f) : prefix + "/" + f; };
    sfm::write_csv(sim.data, run.path(name("data.csv")));
    sfm::write_json(sfm::to_json(sim.data), run.path(name("data.json")));
    sfm::write_json(sfm::to_json(sim.truth), run.path(name("truth.json")));
    for (const char* f : {"data.csv", "data.json", "truth.json"}) run.output(name(f));
}

void cmd_simulate(Run& run, const Options& opt) {
    const auto& b = run.cfg().bench;
    const int reps = opt.replications.value_or(1);
    if (reps < 1) sfm::fail_validation(sfm::Stage::config, "replications: must be at least 1");
    if (reps == 1) {
        write_simulation(sfm::simulate(b.marginal, b.kl, b.sampling, opt.seed), run, "");
        return;
    }
    for (int r = 0; r < reps; ++r) {
        const auto sim = sfm::simulate(b.marginal, b.kl, b.sampling, sfm::derive_seed(opt.seed, r));
        write_simulation(sim, run, fmt::format("rep_{:03d}", r + 1));
    }
}

sfm::IrregularDataset load_input(Run& run, const std::string& role, const std::string& p) {
    if (p.empty()) sfm::fail_validation(sfm::Stage::config, "--" + role + " is required");
    run.input(role, p);
    return sfm::load_dataset(p, run.cfg().bench.sampling.grid_size);
}

void write_dataset(const sfm::IrregularDataset& ds, Run& run, const std::string& stem) {
    sfm::write_csv(ds, run.path(stem + ".csv"));
    sfm::write_json(sfm::to_json(ds), run.path(stem + ".json"));
    run.output(stem + ".csv");
    run.output(stem + ".json");
}

void cmd_denoise(Run& run, const Options& opt) {
    const auto ds = load_input(run, "data", opt.data);
    write_dataset(sfm::denoise(ds, run.cfg().bench.denoise_basis_dim), run, "denoised");
}

void cmd_fit(Run& run, const Options& opt) {
    const auto ds = load_input(run, "data", opt.data);
    sfm::GeneratorConfig gen = run.cfg().bench.generator;
    gen.flow.seed = opt.seed;
    const auto model = sfm::fit(ds, gen);
    sfm::write_json(sfm::to_json(model), run.path("model.json"));
    run.output("model.json");
    if (model.nu) sfm::log().info("nu = {} from {} column pairs", model.nu->nu, model.nu->pairs);
}

void cmd_generate(Run& run, const Options& opt) {
    if (opt.model.empty()) sfm::fail_validation(sfm::Stage::config, "--model is required");
    run.input("model", opt.model);
    const auto model = sfm::model_from_json(sfm::read_json(opt.model));
    const auto ens = sfm::generate(model, run.cfg().bench.m, opt.seed);
    sfm::write_ensemble_csv(ens, run.path("ensemble.csv"));
    run.output("ensemble.csv");
}

std::string num(double v) { return std::isnan(v) ? "nan" : fmt::format("{}", v); }

void write_metrics(Run& run, const std::vector<std::pair<std::string, sfm::MethodScore>>& rows) {
    std::ofstream csv(run.path("metrics.csv"));
    csv << "method,MF,EF1,EF2,MDF,W2\n";
    json j = json::array();
    for (const auto& [name, s] : rows) {
        csv << fmt::format("{},{},{},{},{},{}\n", name, num(s.mse.mf), num(s.mse.ef1), num(s.mse.ef2), num(s.mse.mdf),
                           num(s.w2));
        j.push_back({{"method", name},
                     {"MF", s.mse.mf},
                     {"EF1", s.mse.ef1},
                     {"EF2", s.mse.ef2},
                     {"MDF", std::isnan(s.mse.mdf) ? json(nullptr) : json(s.mse.mdf)},
                     {"W2", s.w2}});
    }
    csv.close();
    if (!csv) sfm::fail_validation(sfm::Stage::io, "write failed for metrics.csv");
    sfm::write_json({{"format", "sfm-metrics"}, {"version", sfm::kFormatVersion}, {"rows", j}}, run.path("metrics.json"));
    run.output("metrics.csv");
    run.output("metrics.json");
}

void cmd_evaluate(Run& run, const Options& opt) {
    if (opt.generated.empty() || opt.reference.empty()) {
        sfm::fail_validation(sfm::Stage::config, "--generated and --reference are required");
    }
    run.input("generated", opt.generated);
    run.input("reference", opt.reference);
    const auto gen = sfm::read_ensemble_csv(opt.generated);
    const int k = run.cfg().evaluate_components;
    const auto& fda = run.cfg().bench.fda;
    const auto summary = sfm::fpca_summary(gen.curves, gen.grid, k, fda);
    sfm::MethodScore s;
    s.method = "generated";
    const bool truth_ref = opt.reference.size() >= 5 &&
                           opt.reference.compare(opt.reference.size() - 5, 5, ".json") == 0;
    if (truth_ref) {
        const auto truth = sfm::truth_from_json(sfm::read_json(opt.reference));
        if (!(truth.grid() == gen.grid)) sfm::fail_validation(sfm::Stage::evaluate, "truth grid differs from the curves");
        s.mse = sfm::mse_against_truth(summary, truth.mean_on_grid(), truth.eigenfunctions_on_grid(),
                                       truth.median_on_grid(), gen.grid);
        s.w2 = sfm::wasserstein2(gen.curves, truth.draw(static_cast<std::size_t>(gen.curves.rows()), opt.seed), gen.grid);
    } else {
        const Eigen::MatrixXd ref = sfm::read_ensemble_csv(opt.reference, gen.grid);
        const auto rs = sfm::fpca_summary(ref, gen.grid, k, fda);
        s.mse = sfm::mse_against_truth(summary, rs.mean, rs.eigenfunctions, rs.median, gen.grid);
        s.w2 = sfm::wasserstein2(gen.curves, ref, gen.grid);
    }
    write_metrics(run, {{"generated", s}});
}

void cmd_predict(Run& run, const Options& opt) {
    const auto ds = load_input(run, "data", opt.data);
    const auto& p = run.cfg().predict;
    sfm::IrregularDataset train = ds, val;
    if (!opt.validation.empty()) {
        val = load_input(run, "validation", opt.validation);
    } else {
        std::vector<std::size_t> order(ds.size());
        std::iota(order.begin(), order.end(), 0);
        auto rng = sfm::make_rng(opt.seed, 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::ceil(p.validation_fraction * ds.size()));
        if (n_val == 0 || n_val >= ds.size()) sfm::fail_validation(sfm::Stage::config, "predict.validation_fraction: leaves an empty split");
        std::vector<sfm::Subject> a, b;
        for (std::size_t k = 0; k < order.size(); ++k) (k < n_val ? b : a).push_back(ds.subjects()[order[k]]);
        train = sfm::IrregularDataset(ds.grid(), std::move(a));
        val = sfm::IrregularDataset(ds.grid(), std::move(b));
    }
    const auto f = sfm::fit_prediction(train, p.model);
    const auto err = sfm::prediction_errors(f, val, p.max_horizon);
    std::ofstream csv(run.path("prediction.csv"));
    csv << "horizon,error\n";
    for (std::size_t g = 0; g < err.size(); ++g) csv << fmt::format("{},{}\n", g + 1, num(err[g]));
    csv.close();
    run.output("prediction.csv");
}

void cmd_bench(Run& run, const Options& opt) {
    const auto& b = run.cfg().bench;
    const int reps = opt.replications.value_or(20);
    const auto results = sfm::run_bench(b, opt.seed, reps, sfm::worker_count());
    std::ofstream rows(run.path("replications.csv")), diag(run.path("diagnostics.csv"));
    rows << "replication,method,metric,value\n";
    diag << "replication,seed,surface_min_eigenvalue,surface_diag_error,roundtrip_mean,roundtrip_max,nu,nu_at_upper\n";
    std::vector<std::string> methods;
    std::map<std::string, std::vector<std::array<double, 6>>> by_method;
    json timing = json::array();
    for (const auto& r : results) {
        for (const auto& s : r.scores) {
            const std::array<double, 6> v{s.mse.mf, s.mse.ef1, s.mse.ef2, s.mse.mdf, s.w2, s.positive_fraction};
            static const char* names[] = {"MF", "EF1", "EF2", "MDF", "W2", "positive_fraction"};
            for (int q = 0; q < 6; ++q) rows << fmt::format("{},{},{},{}\n", r.replication + 1, s.method, names[q], num(v[q]));
            if (!by_method.count(s.method)) methods.push_back(s.method);
            by_method[s.method].push_back(v);
        }
        diag << fmt::format("{},{},{},{},{},{},{},{}\n", r.replication + 1, r.seed, num(r.surface_min_eigenvalue),
                            num(r.surface_diag_error), num(r.roundtrip.mean), num(r.roundtrip.max),
                            r.nu ? num(r.nu->nu) : "", r.nu ? (r.nu->at_upper ? "1" : "0") : "");
        timing.push_back({{"replication", r.replication + 1}, {"seconds", r.seconds}});
    }
    rows.close();
    diag.close();
    std::ofstream summary(run.path("summary.csv"));
    summary << "method,MF_mean,MF_sd,EF1_mean,EF1_sd,EF2_mean,EF2_sd,MDF_mean,MDF_sd,W2_mean,W2_sd\n";
    for (const auto& name : methods) {
        const auto& v = by_method[name];
        summary << name;
        for (int q = 0; q < 5; ++q) {
            double mean = 0.0, sq = 0.0;
            for (const auto& row : v) mean += row[q] / v.size();
            for (const auto& row : v) sq += (row[q] - mean) * (row[q] - mean);
            const double sd = v.size() > 1 ? std::sqrt(sq / (v.size() - 1)) : 0.0;
            summary << "," << num(mean) << "," << num(sd);
        }
        summary << "\n";
    }
    summary.close();
    for (const char* f : {"replications.csv", "diagnostics.csv", "summary.csv"}) run.output(f);
    // wall-clock times vary run to run, so they stay out of the CSV outputs
    sfm::write_json({{"replications", timing}}, run.path("timing.json"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smooth flow matching for functional data"};
    app.require_subcommand(1);
    Options opt;
    const std::vector<std::string> args(argv + 1, argv + argc);

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
        sub->add_option("--grid-size", opt.grid_size, "grid points");
    };
    auto generator_flags = [&](CLI::App* sub) {
        sub->add_option("--base", opt.base, "base family")->check(CLI::IsMember({"gaussian", "student-t"}));
        sub->add_option("--H", opt.H, "base curves in the Monte Carlo pool");
        sub->add_option("--F", opt.F, "u grid size");
        sub->add_option("--steps", opt.steps, "RK4 steps");
    };
    auto sim_flags = [&](CLI::App* sub) {
        sub->add_option("--marginal", opt.marginal, "gaussian or gamma")->check(CLI::IsMember({"gaussian", "gamma"}));
        sub->add_option("--n", opt.n, "subjects");
        sub->add_option("--noise", opt.noise, "noise level");
        sub->add_option("--replications", opt.replications, "replications");
    };

    auto* simulate = app.add_subcommand("simulate", "simulate a dataset and its truth");
    common(simulate);
    sim_flags(simulate);
    auto* denoise = app.add_subcommand("denoise", "per-subject spline smoothing");
    common(denoise);
    denoise->add_option("--data", opt.data, "dataset (.csv or .json)")->required();
    auto* fit = app.add_subcommand("fit", "fit the flow field and copula");
    common(fit);
    generator_flags(fit);
    fit->add_option("--data", opt.data, "dataset (.csv or .json)")->required();
    auto* generate = app.add_subcommand("generate", "sample curves from a fitted model");
    common(generate);
    generate->add_option("--model", opt.model, "model.json")->required();
    generate->add_option("--m", opt.m, "curves to generate");
    auto* evaluate = app.add_subcommand("evaluate", "Wasserstein and FPCA errors");
    common(evaluate);
    evaluate->add_option("--generated", opt.generated, "ensemble CSV")->required();
    evaluate->add_option("--reference", opt.reference, "ensemble CSV or truth.json")->required();
    auto* predict = app.add_subcommand("predict", "multi-step prediction errors");
    common(predict);
    predict->add_option("--data", opt.data, "training dataset")->required();
    predict->add_option("--validation", opt.validation, "validation dataset (default: random split)");
    auto* bench = app.add_subcommand("bench", "simulation study with SFM, GP and KL");
    common(bench);
    generator_flags(bench);
    sim_flags(bench);
    bench->add_option("--m", opt.m, "curves per method and replication");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        Run run(command, opt, args);
        if (command == "simulate") cmd_simulate(run, opt);
        else if (command == "denoise") cmd_denoise(run, opt);
        else if (command == "fit") cmd_fit(run, opt);
        else if (command == "generate") cmd_generate(run, opt);
        else if (command == "evaluate") cmd_evaluate(run, opt);
        else if (command == "predict") cmd_predict(run, opt);
        else cmd_bench(run, opt);
        run.finish();
        return 0;
    } catch (const sfm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == sfm::ErrorKind::validation ? 2 : 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
