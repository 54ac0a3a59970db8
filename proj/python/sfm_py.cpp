#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sfm/baselines.hpp"
#include "sfm/error.hpp"
#include "sfm/eval.hpp"
#include "sfm/fda.hpp"
#include "sfm/generator.hpp"
#include "sfm/io.hpp"
#include "sfm/parallel.hpp"
#include "sfm/simgen.hpp"

namespace py = pybind11;

namespace {

sfm::Marginal marginal_from(const std::string& s) {
    if (s == "gaussian") return sfm::Marginal::gaussian;
    if (s == "gamma") return sfm::Marginal::gamma;
    throw py::value_error("marginal must be 'gaussian' or 'gamma'");
}

sfm::IrregularDataset dataset_from_rows(const std::vector<std::string>& ids, const std::vector<double>& t,
                                        const std::vector<double>& x, int grid_size) {
    if (ids.size() != t.size() || t.size() != x.size()) throw py::value_error("ids, t and x must have equal length");
    std::vector<sfm::RawObservation> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) rows[i] = {ids[i], t[i], x[i]};
    return sfm::build_dataset(rows, grid_size);
}

py::dict fpca_dict(const sfm::FpcaSummary& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["eigenvalues"] = s.eigenvalues;
    d["eigenfunctions"] = s.eigenfunctions;
    d["median"] = s.median;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Smooth flow matching for functional data";

    static py::exception<sfm::Error> error(m, "SfmError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const sfm::Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
            inst.attr("stage") = std::string(sfm::to_string(e.stage()));
            inst.attr("kind") = e.kind() == sfm::ErrorKind::validation ? "validation" : "numerical";
            PyErr_SetObject(error.ptr(), inst.ptr());
        }
    });

    m.def("set_threads", &sfm::set_worker_count, py::arg("threads"), "Worker threads for parallel loops (0 = all cores).");

    py::class_<sfm::RegularGrid>(m, "Grid")
        .def(py::init<double, double, int>(), py::arg("t_min"), py::arg("t_max"), py::arg("n_points"))
        .def_property_readonly("t_min", &sfm::RegularGrid::t_min)
        .def_property_readonly("t_max", &sfm::RegularGrid::t_max)
        .def_property_readonly("values", &sfm::RegularGrid::values)
        .def("trapezoid_weights", &sfm::RegularGrid::trapezoid_weights)
        .def("__len__", &sfm::RegularGrid::size)
        .def("__eq__", &sfm::RegularGrid::operator==);

    py::class_<sfm::IrregularDataset>(m, "Dataset")
        .def_static("from_rows", &dataset_from_rows, py::arg("ids"), py::arg("t"), py::arg("x"),
                    py::arg("grid_size") = 50, "Long-format rows snapped to a regular grid.")
        .def_static("load", &sfm::load_dataset, py::arg("path"), py::arg("grid_size") = 50,
                    "Reads a subject_id,t,value CSV or a dataset JSON document.")
        .def_static("from_json", [](const std::string& s) { return sfm::dataset_from_json(sfm::json::parse(s)); })
        .def("to_json", [](const sfm::IrregularDataset& d) { return sfm::to_json(d).dump(); })
        .def("write_csv", &sfm::write_csv, py::arg("path"))
        .def_property_readonly("grid", &sfm::IrregularDataset::grid)
        .def_property_readonly("total_points", &sfm::IrregularDataset::total_points)
        .def_property_readonly("subject_ids",
                               [](const sfm::IrregularDataset& d) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : d.subjects()) ids.push_back(s.id);
                                   return ids;
                               })
        .def("to_grid_matrix", &sfm::IrregularDataset::to_grid_matrix, "n x grid values, NaN where unobserved.")
        .def("__len__", &sfm::IrregularDataset::size)
        .def("__eq__", &sfm::IrregularDataset::operator==);

    py::class_<sfm::TruthOracle>(m, "Truth")
        .def_property_readonly("grid", &sfm::TruthOracle::grid)
        .def_property_readonly("sigmas", &sfm::TruthOracle::sigmas)
        .def_property_readonly("marginal",
                               [](const sfm::TruthOracle& t) {
                                   return t.marginal() == sfm::Marginal::gaussian ? "gaussian" : "gamma";
                               })
        .def("mean", &sfm::TruthOracle::mean_on_grid)
        .def("median", &sfm::TruthOracle::median_on_grid)
        .def("covariance", &sfm::TruthOracle::covariance_on_grid)
        .def("eigenfunctions", &sfm::TruthOracle::eigenfunctions_on_grid)
        .def("draw", &sfm::TruthOracle::draw, py::arg("m"), py::arg("seed"));

    m.def(
        "simulate",
        [](const std::string& marginal, int n, int j_lo, int j_hi, int grid_size, double noise_level, int K,
           std::uint64_t seed) {
            sfm::KlSpec spec;
            spec.K = K;
            sfm::SamplingSpec sp;
            sp.n = n;
            sp.j_lo = j_lo;
            sp.j_hi = j_hi;
            sp.grid_size = grid_size;
            sp.noise_level = noise_level;
            auto sim = sfm::simulate(marginal_from(marginal), spec, sp, seed);
            return py::make_tuple(std::move(sim.data), std::move(sim.truth));
        },
        py::arg("marginal") = "gaussian", py::arg("n") = 100, py::arg("j_lo") = 2, py::arg("j_hi") = 6,
        py::arg("grid_size") = 50, py::arg("noise_level") = 0.0, py::arg("K") = 4, py::arg("seed") = 1,
        "Simulated sparse dataset and its truth.");

    m.def("denoise", &sfm::denoise, py::arg("dataset"), py::arg("basis_dim") = 8);

    py::class_<sfm::SfmModel>(m, "Model")
        .def_property_readonly("grid", [](const sfm::SfmModel& s) { return s.grid; })
        .def_property_readonly("nu", [](const sfm::SfmModel& s) -> std::optional<double> {
            if (s.nu) return s.nu->nu;
            return std::nullopt;
        })
        .def_property_readonly("surface", [](const sfm::SfmModel& s) { return s.surface.grid_matrix; },
                               "Latent correlation on the grid.")
        .def("config", [](const sfm::SfmModel& s) { return sfm::to_json(s.config).dump(); })
        .def("generate", [](const sfm::SfmModel& s, std::size_t m, std::uint64_t seed) {
            return sfm::generate(s, m, seed).curves;
        }, py::arg("m"), py::arg("seed"), "m x grid generated curves.")
        .def("to_json", [](const sfm::SfmModel& s) { return sfm::to_json(s).dump(); })
        .def_static("from_json", [](const std::string& s) { return sfm::model_from_json(sfm::json::parse(s)); });

    m.def(
        "_fit",
        [](const sfm::IrregularDataset& ds, const std::string& config) {
            const auto cfg = sfm::generator_config_from_json(sfm::json::parse(config));
            py::gil_scoped_release release;
            return sfm::fit(ds, cfg);
        },
        py::arg("dataset"), py::arg("config"));

    py::class_<sfm::GaussianModel>(m, "GaussianModel")
        .def_readonly("mean", &sfm::GaussianModel::mean)
        .def_readonly("covariance", &sfm::GaussianModel::covariance)
        .def("sample", [](const sfm::GaussianModel& g, std::size_t m, std::uint64_t seed) {
            return sfm::sample_gp(g, m, seed).curves;
        }, py::arg("m"), py::arg("seed"))
        .def("sample_kl", [](const sfm::GaussianModel& g, int k, std::size_t m, std::uint64_t seed) {
            return sfm::sample_kl(g, k, m, seed).curves;
        }, py::arg("k"), py::arg("m"), py::arg("seed"));
    m.def("fit_gp", [](const sfm::IrregularDataset& ds) { return sfm::fit_gp(ds); }, py::arg("dataset"));

    m.def("wasserstein2", &sfm::wasserstein2, py::arg("a"), py::arg("b"), py::arg("grid"));
    m.def("hungarian", &sfm::hungarian, py::arg("cost"), "Row-to-column assignment minimising total cost.");
    m.def(
        "fpca",
        [](const Eigen::MatrixXd& curves, const sfm::RegularGrid& grid, int k) {
            return fpca_dict(sfm::fpca_summary(curves, grid, k));
        },
        py::arg("curves"), py::arg("grid"), py::arg("k") = 2);
    m.def(
        "mse_against_truth",
        [](const Eigen::MatrixXd& curves, const sfm::TruthOracle& truth) {
            const auto s = sfm::fpca_summary(curves, truth.grid(), 2);
            const auto r = sfm::mse_against_truth(s, truth.mean_on_grid(), truth.eigenfunctions_on_grid(),
                                                  truth.median_on_grid(), truth.grid());
            py::dict d;
            d["MF"] = r.mf;
            d["EF1"] = r.ef1;
            d["EF2"] = r.ef2;
            d["MDF"] = r.mdf;
            return d;
        },
        py::arg("curves"), py::arg("truth"));
    m.def(
        "prediction_errors",
        [](const sfm::IrregularDataset& train, const sfm::IrregularDataset& validation, int max_horizon) {
            return sfm::prediction_errors(sfm::fit_prediction(train), validation, max_horizon);
        },
        py::arg("train"), py::arg("validation"), py::arg("max_horizon") = 5, "Error_g for g = 1..max_horizon.");
}
