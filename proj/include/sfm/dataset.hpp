#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sfm {

/// Equally spaced points t_min = values[0] < ... < values[n-1] = t_max.
/// Model fitting requires at least 4 points; ingestion accepts 2.
class RegularGrid {
public:
    RegularGrid() = default;
    RegularGrid(double t_min, double t_max, int n_points);

    double t_min() const noexcept { return t_min_; }
    double t_max() const noexcept { return t_max_; }
    int size() const noexcept { return static_cast<int>(values_.size()); }
    double spacing() const noexcept { return (t_max_ - t_min_) / (size() - 1); }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    /// Index of the grid point nearest to t (t clamped into the grid range).
    int nearest(double t) const noexcept;
    /// Trapezoid weights; sum equals t_max - t_min.
    Eigen::VectorXd trapezoid_weights() const;

    bool operator==(const RegularGrid& o) const noexcept { return values_ == o.values_; }

private:
    double t_min_ = 0.0;
    double t_max_ = 1.0;
    std::vector<double> values_;
};

struct ObservationPoint {
    double t = 0.0;
    double x = 0.0;
    int slot = 0;  ///< index of t in the grid

    bool operator==(const ObservationPoint&) const = default;
};

struct Subject {
    std::string id;
    std::vector<ObservationPoint> points;

    std::size_t size() const noexcept { return points.size(); }
    bool operator==(const Subject&) const = default;
};

struct RawObservation {
    std::string subject_id;
    double t = 0.0;
    double x = 0.0;
};

class IrregularDataset {
public:
    IrregularDataset() = default;
    /// Subjects whose times already lie on the grid; validated.
    IrregularDataset(RegularGrid grid, std::vector<Subject> subjects);

    const RegularGrid& grid() const noexcept { return grid_; }
    const std::vector<Subject>& subjects() const noexcept { return subjects_; }
    std::size_t size() const noexcept { return subjects_.size(); }
    std::size_t total_points() const noexcept;
    std::pair<double, double> domain() const noexcept { return {grid_.t_min(), grid_.t_max()}; }
    /// Smallest and largest observed value.
    std::pair<double, double> value_range() const;
    /// n x grid matrix of values with NaN where unobserved.
    Eigen::MatrixXd to_grid_matrix() const;

    bool operator==(const IrregularDataset& o) const noexcept {
        return grid_ == o.grid_ && subjects_ == o.subjects_;
    }

private:
    RegularGrid grid_;
    std::vector<Subject> subjects_;
};

/// Groups rows by subject (first-appearance order), snaps times to the nearest
/// point of a grid_size grid over [min t, max t] (or over `domain`, clamping
/// times outside it) and averages values that share a snapped time.
IrregularDataset build_dataset(const std::vector<RawObservation>& rows, int grid_size,
                               std::optional<std::pair<double, double>> domain = std::nullopt);

/// Reads a `subject_id,t,value` CSV (header required, columns in any order).
IrregularDataset load_csv(const std::string& path, int grid_size,
                          std::optional<std::pair<double, double>> domain = std::nullopt);
void write_csv(const IrregularDataset& ds, const std::string& path);

/// Drops subjects with fewer than k points; fails if none remain.
IrregularDataset filter_min_points(const IrregularDataset& ds, int k);

}  // namespace sfm
