#pragma once

#include <set>
#include <string>

#include "json.hpp"

#include "sfm/baselines.hpp"
#include "sfm/dataset.hpp"
#include "sfm/eval.hpp"
#include "sfm/flow.hpp"
#include "sfm/generator.hpp"
#include "sfm/simgen.hpp"

namespace sfm {

using json = nlohmann::json;

/// Every document carries {"format": <name>, "version": 1}. Readers reject
/// other formats and newer versions.
inline constexpr int kFormatVersion = 1;

/// Reads one object of a config file, naming fields by their dotted path
/// ("flow.H") in validation errors.
class ConfigReader {
public:
    ConfigReader(const json& j, std::string prefix);

    /// Leaves `out` untouched when the key is absent.
    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_[key].template get<T>();
        } catch (const json::exception&) {
            wrong_type(key);
        }
    }
    bool has(const char* key);
    const json& sub(const char* key) const { return j_[key]; }
    std::string field(const char* key) const;
    /// Fails on any key that was never read or queried.
    void reject_unknown() const;

private:
    [[noreturn]] void wrong_type(const char* key) const;
    std::string name() const { return prefix_.empty() ? "config" : prefix_; }
    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

/// Validation error "<field>: <what>" unless ok.
void require(bool ok, const std::string& field, const char* what);

json to_json(const RegularGrid& grid);
RegularGrid grid_from_json(const json& j);

json to_json(const IrregularDataset& ds);
IrregularDataset dataset_from_json(const json& j);

json to_json(const TensorSplineField& field);
TensorSplineField field_from_json(const json& j);

json to_json(const CorrelationSurface& surface);
CorrelationSurface surface_from_json(const json& j);

json to_json(const GeneratorConfig& cfg);
/// Missing keys keep their defaults; unknown keys and wrong types are
/// validation errors naming the offending field.
GeneratorConfig generator_config_from_json(const json& j);

json to_json(const SfmModel& model);
SfmModel model_from_json(const json& j);

json to_json(const TruthOracle& truth);
TruthOracle truth_from_json(const json& j);

json to_json(const GaussianModel& model);
GaussianModel gaussian_model_from_json(const json& j);

json read_json(const std::string& path);
void write_json(const json& j, const std::string& path);

/// Long format `curve_id,t,value`, curve ids c1..cm.
void write_ensemble_csv(const GeneratedEnsemble& ens, const std::string& path);
/// Reads curves back onto `grid`; every curve must cover every grid point.
Eigen::MatrixXd read_ensemble_csv(const std::string& path, const RegularGrid& grid);
/// Same, with the grid taken from the distinct times in the file.
GeneratedEnsemble read_ensemble_csv(const std::string& path);

/// Loads a dataset from .json (exact) or a CSV, snapped to grid_size points.
IrregularDataset load_dataset(const std::string& path, int grid_size);

}  // namespace sfm
