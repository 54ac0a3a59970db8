#include "sfm/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sfm/error.hpp"

namespace sfm {

namespace {

json header(const char* format) { return json{{"format", format}, {"version", kFormatVersion}}; }

void check_header(const json& j, const char* format) {
    if (!j.is_object() || !j.contains("format") || j["format"] != format) {
        fail_validation(Stage::io, fmt::format("expected a '{}' document", format));
    }
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() > kFormatVersion) {
        fail_validation(Stage::io, fmt::format("unsupported {} version", format));
    }
}

const json& at(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) fail_validation(Stage::io, fmt::format("missing key '{}'", key));
    return j[key];
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return at(j, key).get<T>();
    } catch (const json::exception&) {
        fail_validation(Stage::io, fmt::format("key '{}' has the wrong type", key));
    }
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j, const char* key) {
    const auto v = get<std::vector<double>>(j, key);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Eigen::VectorXd row = m.row(r).transpose();
        rows.push_back(vec_json(row));
    }
    return rows;
}

Eigen::MatrixXd mat_from(const json& j, const char* key) {
    const auto rows = get<std::vector<std::vector<double>>>(j, key);
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) fail_validation(Stage::io, fmt::format("ragged matrix '{}'", key));
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

json basis_json(const BSplineBasis& b) {
    return {{"dim", b.dim()}, {"lower", b.lower()}, {"upper", b.upper()}, {"order", b.order()}};
}

BSplineBasis basis_from(const json& j) {
    return BSplineBasis(get<int>(j, "dim"), get<double>(j, "lower"), get<double>(j, "upper"), get<int>(j, "order"));
}

json tensor_json(const TensorBasis& tb) {
    json a = json::array();
    for (const auto& m : tb.marginals()) a.push_back(basis_json(m));
    return a;
}

TensorBasis tensor_from(const json& j, const char* key, std::size_t arity) {
    const json& a = at(j, key);
    if (!a.is_array() || a.size() != arity) fail_validation(Stage::io, fmt::format("'{}' needs {} bases", key, arity));
    std::vector<BSplineBasis> m;
    for (const auto& b : a) m.push_back(basis_from(b));
    return TensorBasis(std::move(m));
}

const char* family_name(BaseFamily f) { return f == BaseFamily::gaussian ? "gaussian" : "student-t"; }

BaseFamily family_from(const std::string& s) {
    if (s == "gaussian") return BaseFamily::gaussian;
    if (s == "student-t") return BaseFamily::student_t;
    fail_validation(Stage::config, fmt::format("base: unknown family '{}' (gaussian | student-t)", s));
}

}  // namespace

ConfigReader::ConfigReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail_validation(Stage::config, fmt::format("{}: expected an object", name()));
}

bool ConfigReader::has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
}

std::string ConfigReader::field(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

void ConfigReader::reject_unknown() const {
    for (const auto& [k, v] : j_.items()) {
        if (!seen_.count(k)) fail_validation(Stage::config, fmt::format("{}: unknown field", field(k.c_str())));
    }
}

void ConfigReader::wrong_type(const char* key) const {
    fail_validation(Stage::config, fmt::format("{}: wrong type", field(key)));
}

void require(bool ok, const std::string& field, const char* what) {
    if (!ok) fail_validation(Stage::config, fmt::format("{}: {}", field, what));
}

json to_json(const RegularGrid& grid) {
    return {{"t_min", grid.t_min()}, {"t_max", grid.t_max()}, {"n_points", grid.size()}};
}

RegularGrid grid_from_json(const json& j) {
    return RegularGrid(get<double>(j, "t_min"), get<double>(j, "t_max"), get<int>(j, "n_points"));
}

json to_json(const IrregularDataset& ds) {
    json j = header("sfm-dataset");
    j["grid"] = to_json(ds.grid());
    json subjects = json::array();
    for (const auto& s : ds.subjects()) {
        std::vector<double> t, x;
        std::vector<int> slot;
        for (const auto& p : s.points) {
            t.push_back(p.t);
            x.push_back(p.x);
            slot.push_back(p.slot);
        }
        subjects.push_back({{"id", s.id}, {"t", t}, {"x", x}, {"slot", slot}});
    }
    j["subjects"] = std::move(subjects);
    return j;
}

IrregularDataset dataset_from_json(const json& j) {
    check_header(j, "sfm-dataset");
    RegularGrid grid = grid_from_json(at(j, "grid"));
    std::vector<Subject> subjects;
    for (const auto& s : at(j, "subjects")) {
        Subject sub{get<std::string>(s, "id"), {}};
        const auto t = get<std::vector<double>>(s, "t");
        const auto x = get<std::vector<double>>(s, "x");
        const auto slot = get<std::vector<int>>(s, "slot");
        if (t.size() != x.size() || t.size() != slot.size()) {
            fail_validation(Stage::io, "subject " + sub.id + ": t, x and slot lengths differ");
        }
        for (std::size_t k = 0; k < t.size(); ++k) sub.points.push_back({t[k], x[k], slot[k]});
        subjects.push_back(std::move(sub));
    }
    try {
        return IrregularDataset(std::move(grid), std::move(subjects));
    } catch (const Error& e) {
        throw e.relabel(Stage::io);
    }
}

json to_json(const TensorSplineField& field) {
    json j = header("sfm-field");
    j["bases"] = tensor_json(field.tensor());
    j["beta"] = vec_json(field.beta());
    return j;
}

TensorSplineField field_from_json(const json& j) {
    check_header(j, "sfm-field");
    TensorBasis tb = tensor_from(j, "bases", 3);
    Eigen::VectorXd beta = vec_from(j, "beta");
    if (beta.size() != tb.dim()) fail_validation(Stage::io, "field coefficient count does not match the bases");
    return TensorSplineField(std::move(tb), std::move(beta));
}

json to_json(const CorrelationSurface& surface) {
    json j = header("sfm-surface");
    j["bases"] = tensor_json(surface.tensor);
    j["beta"] = vec_json(surface.beta);
    j["lambda"] = surface.lambda;
    j["grid_matrix"] = mat_json(surface.grid_matrix);
    return j;
}

CorrelationSurface surface_from_json(const json& j) {
    check_header(j, "sfm-surface");
    CorrelationSurface s;
    s.tensor = tensor_from(j, "bases", 2);
    s.beta = vec_from(j, "beta");
    if (s.beta.size() != s.tensor.dim()) fail_validation(Stage::io, "surface coefficient count does not match the bases");
    s.lambda = get<double>(j, "lambda");
    s.grid_matrix = mat_from(j, "grid_matrix");
    return s;
}

json to_json(const GeneratorConfig& cfg) {
    const auto& f = cfg.flow;
    return {
        {"flow",
         {{"H", f.H}, {"F", f.F}, {"L_u", f.L_u}, {"L_t", f.L_t}, {"L_x", f.L_x}, {"x_margin", f.x_margin},
          {"quad_points", f.quad_points}, {"chunks", f.chunks}, {"seed", f.seed}}},
        {"surface", {{"dim", cfg.surface.dim}, {"quad_points", cfg.surface.quad_points}, {"chunks", cfg.surface.chunks}}},
        {"nu", {{"min_pair_count", cfg.nu.min_pair_count}, {"lower", cfg.nu.lower}, {"upper", cfg.nu.upper}}},
        {"base", family_name(cfg.family)},
        {"steps", cfg.steps},
    };
}

GeneratorConfig generator_config_from_json(const json& j) {
    GeneratorConfig cfg;
    ConfigReader top(j, "");
    if (top.has("flow")) {
        ConfigReader r(top.sub("flow"), "flow");
        auto& f = cfg.flow;
        r.read("H", f.H);
        r.read("F", f.F);
        r.read("L_u", f.L_u);
        r.read("L_t", f.L_t);
        r.read("L_x", f.L_x);
        r.read("x_margin", f.x_margin);
        r.read("quad_points", f.quad_points);
        r.read("chunks", f.chunks);
        r.read("seed", f.seed);
        r.reject_unknown();
        require(f.H >= 1, r.field("H"), "must be at least 1");
        require(f.F >= 2, r.field("F"), "must be at least 2");
        require(f.L_u >= 4 && f.L_t >= 4 && f.L_x >= 4, "flow.L_u/L_t/L_x", "must be at least 4");
        require(f.x_margin >= 0.0, r.field("x_margin"), "must be nonnegative");
        require(f.quad_points >= 2, r.field("quad_points"), "must be at least 2");
        require(f.chunks >= 1, r.field("chunks"), "must be at least 1");
    }
    if (top.has("surface")) {
        ConfigReader r(top.sub("surface"), "surface");
        r.read("dim", cfg.surface.dim);
        r.read("quad_points", cfg.surface.quad_points);
        r.read("chunks", cfg.surface.chunks);
        r.reject_unknown();
        require(cfg.surface.dim >= 4, r.field("dim"), "must be at least 4");
        require(cfg.surface.quad_points >= 2, r.field("quad_points"), "must be at least 2");
        require(cfg.surface.chunks >= 1, r.field("chunks"), "must be at least 1");
    }
    if (top.has("nu")) {
        ConfigReader r(top.sub("nu"), "nu");
        r.read("min_pair_count", cfg.nu.min_pair_count);
        r.read("lower", cfg.nu.lower);
        r.read("upper", cfg.nu.upper);
        r.reject_unknown();
        require(cfg.nu.min_pair_count >= 2, r.field("min_pair_count"), "must be at least 2");
        require(cfg.nu.lower > 2.0 && cfg.nu.upper > cfg.nu.lower, "nu.lower/upper", "need 2 < lower < upper");
    }
    std::string base = family_name(cfg.family);
    top.read("base", base);
    cfg.family = family_from(base);
    top.read("steps", cfg.steps);
    top.reject_unknown();
    require(cfg.steps >= 10, "steps", "must be at least 10");
    cfg.validate();
    return cfg;
}

json to_json(const SfmModel& model) {
    json j = header("sfm-model");
    j["grid"] = to_json(model.grid);
    j["field"] = to_json(model.field);
    j["surface"] = to_json(model.surface);
    j["config"] = to_json(model.config);
    j["base"] = {{"family", family_name(model.base.family)}, {"nu", model.base.nu}};
    if (model.nu) {
        j["nu_estimate"] = {{"nu", model.nu->nu},
                            {"pairs", model.nu->pairs},
                            {"log_likelihood", model.nu->log_likelihood},
                            {"at_upper", model.nu->at_upper}};
    }
    const auto& r = model.field_fit;
    j["field_fit"] = {{"lambdas", r.lambdas}, {"sigma2", r.sigma2}, {"edf", r.edf}, {"reml", r.reml},
                      {"jitter", r.jitter}, {"cycles", r.cycles}, {"converged", r.converged}};
    j["excluded_scores"] = model.excluded_scores;
    return j;
}

SfmModel model_from_json(const json& j) {
    check_header(j, "sfm-model");
    SfmModel m;
    m.grid = grid_from_json(at(j, "grid"));
    m.field = field_from_json(at(j, "field"));
    m.surface = surface_from_json(at(j, "surface"));
    m.config = generator_config_from_json(at(j, "config"));
    const json& base = at(j, "base");
    if (m.surface.grid_matrix.rows() != m.grid.size() || m.surface.grid_matrix.cols() != m.grid.size()) {
        fail_validation(Stage::io, "surface grid matrix does not match the grid");
    }
    m.base = make_base_model(family_from(get<std::string>(base, "family")), get<double>(base, "nu"),
                             m.surface.grid_matrix);
    if (j.contains("nu_estimate")) {
        const json& e = j["nu_estimate"];
        m.nu = NuEstimate{get<double>(e, "nu"), get<std::size_t>(e, "pairs"), get<double>(e, "log_likelihood"),
                          get<bool>(e, "at_upper")};
    }
    if (j.contains("field_fit")) {
        const json& r = j["field_fit"];
        m.field_fit.beta = m.field.beta();
        m.field_fit.lambdas = get<std::vector<double>>(r, "lambdas");
        m.field_fit.sigma2 = get<double>(r, "sigma2");
        m.field_fit.edf = get<double>(r, "edf");
        m.field_fit.reml = get<double>(r, "reml");
        m.field_fit.jitter = get<double>(r, "jitter");
        m.field_fit.cycles = get<int>(r, "cycles");
        m.field_fit.converged = get<bool>(r, "converged");
    }
    m.excluded_scores = j.value("excluded_scores", std::size_t{0});
    return m;
}

json to_json(const TruthOracle& truth) {
    json j = header("sfm-truth");
    j["marginal"] = truth.marginal() == Marginal::gaussian ? "gaussian" : "gamma";
    j["grid"] = to_json(truth.grid());
    const BSplineBasis& b = truth.mean_basis();
    j["mean_basis"] = basis_json(b);
    j["mean_coeffs"] = vec_json(truth.mean_coeffs());
    j["sigmas"] = truth.sigmas();
    j["mean"] = vec_json(truth.mean_on_grid());
    j["median"] = vec_json(truth.median_on_grid());
    j["eigenfunctions"] = mat_json(truth.eigenfunctions_on_grid());
    return j;
}

TruthOracle truth_from_json(const json& j) {
    check_header(j, "sfm-truth");
    const auto marginal = get<std::string>(j, "marginal");
    if (marginal != "gaussian" && marginal != "gamma") fail_validation(Stage::io, "unknown marginal " + marginal);
    return TruthOracle(marginal == "gaussian" ? Marginal::gaussian : Marginal::gamma, grid_from_json(at(j, "grid")),
                       basis_from(at(j, "mean_basis")), vec_from(j, "mean_coeffs"),
                       get<std::vector<double>>(j, "sigmas"));
}

json to_json(const GaussianModel& model) {
    json j = header("sfm-gaussian");
    j["grid"] = to_json(model.grid);
    j["mean"] = vec_json(model.mean);
    j["covariance"] = mat_json(model.covariance);
    j["chol"] = mat_json(model.chol);
    return j;
}

GaussianModel gaussian_model_from_json(const json& j) {
    check_header(j, "sfm-gaussian");
    // The stored covariance is already projected; reuse its factor as written.
    GaussianModel m;
    m.grid = grid_from_json(at(j, "grid"));
    m.mean = vec_from(j, "mean");
    m.covariance = mat_from(j, "covariance");
    m.chol = mat_from(j, "chol");
    const int G = m.grid.size();
    if (m.mean.size() != G || m.covariance.rows() != G || m.covariance.cols() != G || m.chol.rows() != G ||
        m.chol.cols() != G) {
        fail_validation(Stage::io, "gaussian model does not match the grid");
    }
    return m;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_validation(Stage::io, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail_validation(Stage::io, fmt::format("{}: {}", path, e.what()));
    }
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail_validation(Stage::io, "cannot write " + path);
    out << j.dump(1) << '\n';
    if (!out) fail_validation(Stage::io, "write failed for " + path);
}

void write_ensemble_csv(const GeneratedEnsemble& ens, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail_validation(Stage::io, "cannot write " + path);
    out << "curve_id,t,value\n";
    for (Eigen::Index l = 0; l < ens.curves.rows(); ++l)
        for (int g = 0; g < ens.grid.size(); ++g)
            out << fmt::format("c{},{},{}\n", l + 1, ens.grid[g], ens.curves(l, g));
    if (!out) fail_validation(Stage::io, "write failed for " + path);
}

Eigen::MatrixXd read_ensemble_csv(const std::string& path, const RegularGrid& grid) {
    std::ifstream in(path);
    if (!in) fail_validation(Stage::io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("curve_id,t,value", 0) != 0) {
        fail_validation(Stage::io, path + ": expected header curve_id,t,value");
    }
    std::map<std::string, std::size_t> index;
    std::vector<std::string> order;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string id, ts, vs;
        if (!std::getline(ss, id, ',') || !std::getline(ss, ts, ',') || !std::getline(ss, vs)) {
            fail_validation(Stage::io, fmt::format("{} line {}: expected 3 fields", path, line_no));
        }
        double t = 0.0, v = 0.0;
        try {
            t = std::stod(ts);
            v = std::stod(vs);
        } catch (const std::exception&) {
            fail_validation(Stage::io, fmt::format("{} line {}: not a number", path, line_no));
        }
        const int g = grid.nearest(t);
        if (std::abs(grid[g] - t) > 1e-9 * std::max(1.0, std::abs(t))) {
            fail_validation(Stage::io, fmt::format("{} line {}: t={} is not a grid point", path, line_no, t));
        }
        auto [it, fresh] = index.try_emplace(id, rows.size());
        if (fresh) rows.emplace_back(grid.size(), std::numeric_limits<double>::quiet_NaN());
        rows[it->second][g] = v;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), grid.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int g = 0; g < grid.size(); ++g) {
            if (std::isnan(rows[r][g])) fail_validation(Stage::io, fmt::format("{}: a curve misses grid point {}", path, g));
            m(r, g) = rows[r][g];
        }
    return m;
}

GeneratedEnsemble read_ensemble_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_validation(Stage::io, "cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::set<double> times;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        if (a == std::string::npos || b == std::string::npos) continue;
        try {
            times.insert(std::stod(line.substr(a + 1, b - a - 1)));
        } catch (const std::exception&) {
            fail_validation(Stage::io, path + ": t is not a number");
        }
    }
    if (times.size() < 2) fail_validation(Stage::io, path + ": needs at least 2 distinct times");
    GeneratedEnsemble ens;
    ens.grid = RegularGrid(*times.begin(), *times.rbegin(), static_cast<int>(times.size()));
    ens.curves = read_ensemble_csv(path, ens.grid);
    return ens;
}

IrregularDataset load_dataset(const std::string& path, int grid_size) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return dataset_from_json(read_json(path));
    return load_csv(path, grid_size);
}

}  // namespace sfm
