#include "sfm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "sfm/error.hpp"
#include "sfm/log.hpp"

namespace sfm {

RegularGrid::RegularGrid(double t_min, double t_max, int n_points) : t_min_(t_min), t_max_(t_max) {
    if (n_points < 2) fail_validation(Stage::config, "grid needs at least 2 points");
    if (!(t_max > t_min) || !std::isfinite(t_min) || !std::isfinite(t_max)) {
        fail_validation(Stage::config, "grid domain must be a finite interval with t_max > t_min");
    }
    values_.resize(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) values_[i] = t_min + (t_max - t_min) * i / (n_points - 1);
    values_.back() = t_max;
}

int RegularGrid::nearest(double t) const noexcept {
    const double pos = (t - t_min_) / spacing();
    const long idx = std::lround(std::clamp(pos, 0.0, static_cast<double>(size() - 1)));
    return static_cast<int>(idx);
}

Eigen::VectorXd RegularGrid::trapezoid_weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(size(), spacing());
    w[0] *= 0.5;
    w[size() - 1] *= 0.5;
    return w;
}

IrregularDataset::IrregularDataset(RegularGrid grid, std::vector<Subject> subjects)
    : grid_(std::move(grid)), subjects_(std::move(subjects)) {
    for (const auto& s : subjects_) {
        if (s.points.empty()) fail_validation(Stage::ingest, "subject " + s.id + " has no points");
        for (std::size_t j = 0; j < s.points.size(); ++j) {
            const auto& p = s.points[j];
            if (!std::isfinite(p.x)) fail_validation(Stage::ingest, "subject " + s.id + " has a non-finite value");
            if (p.slot < 0 || p.slot >= grid_.size() || grid_[p.slot] != p.t) {
                fail_validation(Stage::ingest, "subject " + s.id + " has a time off the grid");
            }
            if (j > 0 && !(p.slot > s.points[j - 1].slot)) {
                fail_validation(Stage::ingest, "subject " + s.id + " times are not strictly increasing");
            }
        }
    }
}

std::size_t IrregularDataset::total_points() const noexcept {
    std::size_t n = 0;
    for (const auto& s : subjects_) n += s.points.size();
    return n;
}

std::pair<double, double> IrregularDataset::value_range() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : subjects_) {
        for (const auto& p : s.points) {
            lo = std::min(lo, p.x);
            hi = std::max(hi, p.x);
        }
    }
    return {lo, hi};
}

Eigen::MatrixXd IrregularDataset::to_grid_matrix() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(size()), grid_.size(),
                                                  std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        for (const auto& p : subjects_[i].points) m(static_cast<Eigen::Index>(i), p.slot) = p.x;
    }
    return m;
}

IrregularDataset build_dataset(const std::vector<RawObservation>& rows, int grid_size,
                               std::optional<std::pair<double, double>> domain) {
    if (rows.empty()) fail_validation(Stage::ingest, "dataset has no rows");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) {
        if (!std::isfinite(r.t) || !std::isfinite(r.x)) fail_validation(Stage::ingest, "non-finite observation");
        lo = std::min(lo, r.t);
        hi = std::max(hi, r.t);
    }
    if (domain) {
        if (lo < domain->first || hi > domain->second) {
            log().info("observation times outside [{}, {}] are clamped to the domain", domain->first, domain->second);
        }
        lo = domain->first;
        hi = domain->second;
    }
    RegularGrid grid(lo, hi, grid_size);

    std::unordered_map<std::string, std::size_t> order;
    std::vector<std::string> ids;
    std::vector<std::map<int, std::pair<double, int>>> sums;
    for (const auto& r : rows) {
        auto [it, inserted] = order.try_emplace(r.subject_id, ids.size());
        if (inserted) {
            ids.push_back(r.subject_id);
            sums.emplace_back();
        }
        auto& cell = sums[it->second][grid.nearest(std::clamp(r.t, lo, hi))];
        cell.first += r.x;
        cell.second += 1;
    }
    std::vector<Subject> subjects(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        subjects[i].id = ids[i];
        for (const auto& [slot, acc] : sums[i]) {
            subjects[i].points.push_back({grid[slot], acc.first / acc.second, slot});
        }
    }
    return IrregularDataset(std::move(grid), std::move(subjects));
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t line, const char* column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        fail_validation(Stage::ingest, fmt::format("line {}: column {} is not a number", line, column));
    }
    if (!std::isfinite(v)) fail_validation(Stage::ingest, fmt::format("line {}: column {} is not finite", line, column));
    return v;
}

}  // namespace

IrregularDataset load_csv(const std::string& path, int grid_size, std::optional<std::pair<double, double>> domain) {
    std::ifstream in(path);
    if (!in) fail_validation(Stage::io, "cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) fail_validation(Stage::ingest, path + " is empty");
    if (!header[0].empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);
    auto column = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) fail_validation(Stage::ingest, fmt::format("{}: missing column '{}'", path, name));
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_id = column("subject_id"), c_t = column("t"), c_v = column("value");
    std::vector<RawObservation> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) {
            fail_validation(Stage::ingest, fmt::format("line {}: expected {} fields, got {}", line_no, header.size(),
                                                       fields.size()));
        }
        rows.push_back({fields[c_id], parse_number(fields[c_t], line_no, "t"), parse_number(fields[c_v], line_no, "value")});
    }
    if (rows.empty()) fail_validation(Stage::ingest, path + " has no data rows");
    return build_dataset(rows, grid_size, domain);
}

void write_csv(const IrregularDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail_validation(Stage::io, "cannot write " + path);
    out << "subject_id,t,value\n";
    for (const auto& s : ds.subjects()) {
        for (const auto& p : s.points) out << fmt::format("{},{},{}\n", s.id, p.t, p.x);
    }
    if (!out) fail_validation(Stage::io, "write failed for " + path);
}

IrregularDataset filter_min_points(const IrregularDataset& ds, int k) {
    if (k < 1) fail_validation(Stage::config, "minimum point count must be at least 1");
    std::vector<Subject> kept;
    for (const auto& s : ds.subjects()) {
        if (static_cast<int>(s.points.size()) >= k) kept.push_back(s);
    }
    if (kept.empty()) fail_validation(Stage::ingest, fmt::format("no subject has at least {} points", k));
    return IrregularDataset(ds.grid(), std::move(kept));
}

}  // namespace sfm
