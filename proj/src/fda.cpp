#include "sfm/fda.hpp"

#include <algorithm>
#include <cmath>

#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/regress.hpp"
#include "sfm/splines.hpp"

namespace sfm {

Eigen::VectorXd smooth_mean(const IrregularDataset& ds, const FdaConfig& cfg) {
    const auto [t0, t1] = ds.domain();
    BSplineBasis basis(cfg.mean_dim, t0, t1);
    PenalizedProblem p;
    p.dim = basis.dim();
    p.penalties = {basis.roughness(cfg.quad_points)};
    p.chunks = 1;
    p.rows = [&](std::size_t, const RowSink& emit) {
        SparseRow row;
        double local[16];
        for (const auto& s : ds.subjects())
            for (const auto& pt : s.points) {
                const int first = basis.eval_local(pt.t, local);
                row.index.clear();
                row.value.clear();
                for (int j = 0; j < basis.order(); ++j) {
                    row.index.push_back(first + j);
                    row.value.push_back(local[j]);
                }
                emit(row, pt.x, 1.0);
            }
    };
    if (ds.total_points() <= static_cast<std::size_t>(p.dim)) {
        fail_validation(Stage::regress, "too few observations for the mean basis");
    }
    PenalizedSolver solver(accumulate(p), p.penalties);
    const FitResult fit = solver.fit_reml({solver.scale(0)});
    Eigen::VectorXd m(ds.grid().size());
    for (int g = 0; g < ds.grid().size(); ++g) m[g] = basis.eval(ds.grid()[g]).dot(fit.beta);
    return m;
}

Eigen::MatrixXd smooth_covariance(const IrregularDataset& ds, const Eigen::VectorXd& mean, bool exclude_diagonal,
                                  const FdaConfig& cfg) {
    if (mean.size() != ds.grid().size()) fail_validation(Stage::regress, "mean does not match the grid");
    const auto [t0, t1] = ds.domain();
    TensorBasis tb({BSplineBasis(cfg.cov_dim, t0, t1), BSplineBasis(cfg.cov_dim, t0, t1)});
    std::size_t pairs = 0;
    for (const auto& s : ds.subjects()) pairs += s.size() * (s.size() - (exclude_diagonal ? 1 : 0));
    if (pairs <= static_cast<std::size_t>(tb.dim())) {
        fail_validation(Stage::regress, "too few cross products for the covariance basis");
    }
    PenalizedProblem p;
    p.dim = tb.dim();
    const auto pens = tb.penalties(cfg.quad_points);
    p.penalties = {pens[0] + pens[1]};
    p.chunks = std::min<std::size_t>(16, ds.size());
    const std::size_t n = ds.size(), chunks = p.chunks;
    p.rows = [&, n, chunks](std::size_t c, const RowSink& emit) {
        SparseRow row;
        for (std::size_t i = n * c / chunks; i < n * (c + 1) / chunks; ++i) {
            const auto& pts = ds.subjects()[i].points;
            for (std::size_t a = 0; a < pts.size(); ++a)
                for (std::size_t b = 0; b < pts.size(); ++b) {
                    if (exclude_diagonal && a == b) continue;
                    const double pt[2] = {pts[a].t, pts[b].t};
                    tb.eval(pt, row);
                    emit(row, (pts[a].x - mean[pts[a].slot]) * (pts[b].x - mean[pts[b].slot]), 1.0);
                }
        }
    };
    PenalizedSolver solver(accumulate(p), p.penalties);
    const FitResult fit = solver.fit_reml({solver.scale(0)});
    const int G = ds.grid().size();
    Eigen::MatrixXd cov(G, G);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
            const double pt[2] = {ds.grid()[a], ds.grid()[b]};
            cov(a, b) = tb.value(pt, fit.beta);
        }
    return 0.5 * (cov + cov.transpose());
}

Eigenpairs covariance_eigen(const Eigen::MatrixXd& cov, const RegularGrid& grid, int k) {
    const int G = grid.size();
    if (cov.rows() != G || cov.cols() != G) fail_validation(Stage::evaluate, "covariance does not match the grid");
    if (k < 0 || k > G) fail_validation(Stage::evaluate, "eigen count out of range");
    const Eigen::VectorXd w = grid.trapezoid_weights();
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd a = sw.asDiagonal() * (0.5 * (cov + cov.transpose())) * sw.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) fail_numerical(Stage::evaluate, "eigen decomposition failed");
    Eigenpairs out;
    out.values.resize(k);
    out.functions.resize(k, G);
    for (int r = 0; r < k; ++r) {
        const int idx = G - 1 - r;
        out.values[r] = std::max(es.eigenvalues()[idx], 0.0);
        Eigen::VectorXd f = es.eigenvectors().col(idx).cwiseQuotient(sw);
        const double integral = w.dot(f);
        bool flip = integral < 0.0;
        if (std::abs(integral) < 1e-12) {
            for (int g = 0; g < G; ++g)
                if (std::abs(f[g]) > 1e-12) {
                    flip = f[g] < 0.0;
                    break;
                }
        }
        if (flip) f = -f;
        out.functions.row(r) = f.transpose();
    }
    return out;
}

IrregularDataset dense_dataset(const Eigen::MatrixXd& curves, const RegularGrid& grid) {
    if (curves.cols() != grid.size()) fail_validation(Stage::evaluate, "curves do not match the grid");
    std::vector<Subject> subjects(static_cast<std::size_t>(curves.rows()));
    for (Eigen::Index l = 0; l < curves.rows(); ++l) {
        auto& s = subjects[static_cast<std::size_t>(l)];
        s.id = "c" + std::to_string(l + 1);
        s.points.reserve(grid.size());
        for (int g = 0; g < grid.size(); ++g) s.points.push_back({grid[g], curves(l, g), g});
    }
    return IrregularDataset(grid, std::move(subjects));
}

std::vector<SmoothCurve> smooth_subjects(const IrregularDataset& ds, int basis_dim) {
    if (basis_dim < 4) fail_validation(Stage::config, "denoising basis needs at least 4 functions");
    const auto [t0, t1] = ds.domain();
    std::vector<SmoothCurve> out(ds.size());
    std::vector<char> linear(ds.size(), 0);
    parallel_for(ds.size(), [&](std::size_t i) {
        const auto& pts = ds.subjects()[i].points;
        std::vector<std::pair<double, double>> xy;
        for (const auto& p : pts) xy.emplace_back(p.t, p.x);
        if (xy.size() < 4) {
            out[i] = SmoothCurve(std::move(xy), t0, t1);
            linear[i] = 1;
            return;
        }
        const int dim = std::min(std::max(static_cast<int>(xy.size()) - 1, 4), basis_dim);
        out[i] = smoothing_spline_1d(xy, dim, t0, t1);
    });
    const auto fallback = std::count(linear.begin(), linear.end(), 1);
    if (fallback > 0) log().info("{} subjects with fewer than four points kept by linear interpolation", fallback);
    return out;
}

IrregularDataset denoise(const IrregularDataset& ds, int basis_dim) {
    const auto curves = smooth_subjects(ds, basis_dim);
    std::vector<Subject> subjects = ds.subjects();
    for (std::size_t i = 0; i < subjects.size(); ++i)
        for (auto& p : subjects[i].points) p.x = curves[i](p.t);
    return IrregularDataset(ds.grid(), std::move(subjects));
}

}  // namespace sfm
