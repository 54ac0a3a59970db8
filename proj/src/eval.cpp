#include "sfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfm/error.hpp"
#include "sfm/parallel.hpp"
#include "sfm/regress.hpp"

namespace sfm {

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) fail_validation(Stage::evaluate, "assignment needs a square cost matrix");
    if (!cost.allFinite()) fail_validation(Stage::evaluate, "assignment costs must be finite");
    const double inf = std::numeric_limits<double>::infinity();
    // shortest augmenting paths with row/column potentials, 1-based with a virtual column 0
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(n);
    for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

double wasserstein2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const RegularGrid& grid) {
    if (a.rows() != b.rows()) fail_validation(Stage::evaluate, "ensembles must have equal sizes");
    if (a.cols() != grid.size() || b.cols() != grid.size()) {
        fail_validation(Stage::evaluate, "ensembles do not match the grid");
    }
    if (a.rows() == 0) fail_validation(Stage::evaluate, "ensembles are empty");
    const Eigen::VectorXd w = grid.trapezoid_weights();
    const auto m = a.rows();
    Eigen::MatrixXd cost(m, m);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < m; ++j) cost(r, j) = w.dot((a.row(r) - b.row(j)).array().square().matrix().transpose());
    });
    const auto match = hungarian(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) total += cost(i, match[i]);
    return std::sqrt(std::max(total / static_cast<double>(m), 0.0));
}

namespace {

FpcaSummary summarize(const IrregularDataset& ds, int k, bool exclude_diagonal, const FdaConfig& cfg) {
    FpcaSummary s;
    try {
        s.mean = smooth_mean(ds, cfg);
        const Eigen::MatrixXd cov = smooth_covariance(ds, s.mean, exclude_diagonal, cfg);
        const Eigenpairs e = covariance_eigen(cov, ds.grid(), k);
        s.eigenvalues = e.values;
        s.eigenfunctions = e.functions;
    } catch (const Error& err) {
        throw err.relabel(Stage::evaluate);
    }
    return s;
}

}  // namespace

FpcaSummary fpca_summary(const Eigen::MatrixXd& curves, const RegularGrid& grid, int k, const FdaConfig& cfg) {
    FpcaSummary s = summarize(dense_dataset(curves, grid), k, false, cfg);
    s.median.resize(grid.size());
    std::vector<double> col(static_cast<std::size_t>(curves.rows()));
    for (int g = 0; g < grid.size(); ++g) {
        for (Eigen::Index l = 0; l < curves.rows(); ++l) col[static_cast<std::size_t>(l)] = curves(l, g);
        std::sort(col.begin(), col.end());
        const std::size_t m = col.size();
        s.median[g] = m % 2 == 1 ? col[m / 2] : 0.5 * (col[m / 2 - 1] + col[m / 2]);
    }
    return s;
}

FpcaSummary fpca_summary(const IrregularDataset& ds, int k, const FdaConfig& cfg) {
    return summarize(ds, k, true, cfg);
}

double integrated_sq_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const RegularGrid& grid) {
    if (a.size() != grid.size() || b.size() != grid.size()) fail_validation(Stage::evaluate, "curve/grid mismatch");
    return grid.trapezoid_weights().dot((a - b).array().square().matrix());
}

MseReport mse_against_truth(const FpcaSummary& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& eigenfunctions,
                            const Eigen::VectorXd& median, const RegularGrid& grid) {
    MseReport r;
    r.mf = integrated_sq_error(s.mean, mean, grid);
    auto ef = [&](int k) {
        if (s.eigenfunctions.rows() <= k || eigenfunctions.rows() <= k) return std::numeric_limits<double>::quiet_NaN();
        const Eigen::VectorXd est = s.eigenfunctions.row(k).transpose();
        const Eigen::VectorXd truth = eigenfunctions.row(k).transpose();
        return std::min(integrated_sq_error(est, truth, grid), integrated_sq_error(-est, truth, grid));
    };
    r.ef1 = ef(0);
    r.ef2 = ef(1);
    r.mdf = s.median.size() == 0 || median.size() == 0 ? std::numeric_limits<double>::quiet_NaN()
                                                       : integrated_sq_error(s.median, median, grid);
    return r;
}

PredictionModel::PredictionModel(TensorBasis tensor, Eigen::VectorXd beta)
    : tensor_(std::move(tensor)), beta_(std::move(beta)) {
    if (tensor_.arity() != 2 || beta_.size() != tensor_.dim()) {
        fail_validation(Stage::predict, "prediction model needs a bivariate basis and matching coefficients");
    }
}

double PredictionModel::operator()(double x, double t) const {
    const auto& bx = tensor_.marginal(0);
    const auto& bt = tensor_.marginal(1);
    const double p[2] = {std::clamp(x, bx.lower(), bx.upper()), std::clamp(t, bt.lower(), bt.upper())};
    return tensor_.value(p, beta_);
}

PredictionModel fit_prediction(const IrregularDataset& train, const PredictionConfig& cfg) {
    struct Pair {
        double x, t, y;
    };
    std::vector<Pair> pairs;
    for (const auto& s : train.subjects())
        for (std::size_t j = 0; j + 1 < s.points.size(); ++j)
            if (s.points[j + 1].slot == s.points[j].slot + 1) {
                pairs.push_back({s.points[j].x, s.points[j].t, s.points[j + 1].x});
            }
    if (pairs.empty()) fail_validation(Stage::predict, "no consecutive observation pairs in the training data");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : pairs) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    const double span = std::max(hi - lo, 1e-8);
    const auto [t0, t1] = train.domain();
    TensorBasis tb({BSplineBasis(cfg.L, lo - cfg.x_margin * span, hi + cfg.x_margin * span),
                    BSplineBasis(cfg.L, t0, t1)});
    if (pairs.size() <= static_cast<std::size_t>(tb.dim())) {
        fail_validation(Stage::predict, "too few consecutive pairs for the prediction basis");
    }
    PenalizedProblem p;
    p.dim = tb.dim();
    p.penalties = tb.penalties(cfg.quad_points);
    p.chunks = 1;
    p.rows = [&](std::size_t, const RowSink& emit) {
        SparseRow row;
        for (const auto& q : pairs) {
            const double pt[2] = {q.x, q.t};
            tb.eval(pt, row);
            emit(row, q.y, 1.0);
        }
    };
    try {
        PenalizedSolver solver(accumulate(p), p.penalties);
        const FitResult fit = solver.fit_reml({solver.scale(0), solver.scale(1)});
        return PredictionModel(std::move(tb), fit.beta);
    } catch (const Error& e) {
        throw e.relabel(Stage::predict);
    }
}

std::vector<double> prediction_errors(const PredictionModel& f, const IrregularDataset& validation, int max_horizon) {
    if (max_horizon < 1) fail_validation(Stage::predict, "horizon must be at least 1");
    const RegularGrid& grid = validation.grid();
    std::vector<double> sums(max_horizon, 0.0);
    std::vector<double> row(grid.size());
    for (const auto& s : validation.subjects()) {
        std::fill(row.begin(), row.end(), std::numeric_limits<double>::quiet_NaN());
        for (const auto& p : s.points) row[p.slot] = p.x;
        for (int j = 0; j < grid.size(); ++j) {
            if (!std::isfinite(row[j])) continue;
            double pred = row[j];
            for (int g = 1; g <= max_horizon && j + g < grid.size(); ++g) {
                pred = f(pred, grid[j + g - 1]);
                if (std::isfinite(row[j + g])) sums[g - 1] += (row[j + g] - pred) * (row[j + g] - pred);
            }
        }
    }
    for (double& v : sums) v = std::sqrt(v);
    return sums;
}

}  // namespace sfm
