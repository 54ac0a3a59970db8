#include "sfm/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"

namespace sfm {

NormalEquations::NormalEquations(int dim) : wdw(Eigen::MatrixXd::Zero(dim, dim)), wdy(Eigen::VectorXd::Zero(dim)) {}

void NormalEquations::add(const SparseRow& row, double y, double weight) {
    const std::size_t n = row.index.size();
    for (std::size_t a = 0; a < n; ++a) {
        const double wa = weight * row.value[a];
        if (wa == 0.0) continue;
        const int ia = row.index[a];
        wdy[ia] += wa * y;
        // indices within a row are increasing, so this fills the upper triangle
        for (std::size_t b = a; b < n; ++b) wdw(ia, row.index[b]) += wa * row.value[b];
    }
    ydy += weight * y * y;
    count += 1.0;
    sum_log_weight += std::log(weight);
}

void NormalEquations::merge(const NormalEquations& other) {
    wdw += other.wdw;
    wdy += other.wdy;
    ydy += other.ydy;
    count += other.count;
    sum_log_weight += other.sum_log_weight;
}

void NormalEquations::finalize() { wdw = wdw.selfadjointView<Eigen::Upper>(); }

NormalEquations accumulate(const PenalizedProblem& p) {
    if (p.dim <= 0) fail_validation(Stage::regress, "problem dimension must be positive");
    for (const auto& r : p.penalties) {
        if (r.rows() != p.dim || r.cols() != p.dim) fail_validation(Stage::regress, "penalty size mismatch");
    }
    const std::size_t chunks = std::max<std::size_t>(1, p.chunks);
    std::vector<NormalEquations> parts(chunks, NormalEquations(p.dim));
    parallel_chunks(chunks, chunks, [&](std::size_t c, std::size_t, std::size_t) {
        NormalEquations& ne = parts[c];
        p.rows(c, [&ne](const SparseRow& row, double y, double w) {
            if (!(w > 0.0) || !std::isfinite(w)) fail_validation(Stage::regress, "row weights must be positive");
            if (!std::isfinite(y)) fail_validation(Stage::regress, "row response is not finite");
            ne.add(row, y, w);
        });
    });
    NormalEquations total(p.dim);
    for (const auto& part : parts) total.merge(part);
    total.finalize();
    return total;
}

struct PenalizedSolver::Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    double log_det = 0.0;
};

PenalizedSolver::PenalizedSolver(NormalEquations ne, std::vector<Eigen::MatrixXd> penalties)
    : ne_(std::move(ne)), penalties_(std::move(penalties)) {
    const double a_norm = ne_.wdw.norm();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(dim(), dim());
    for (const auto& r : penalties_) {
        const double rn = r.norm();
        if (!(rn > 0.0)) fail_validation(Stage::regress, "penalty matrix is zero");
        scales_.push_back(a_norm > 0.0 ? a_norm / rn : 1.0);
        total += r / rn;
    }
    if (!penalties_.empty()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(total);
        const Eigen::VectorXd& ev = es.eigenvalues();
        const double cut = 1e-9 * ev.maxCoeff();
        int rank = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) rank += ev[i] > cut ? 1 : 0;
        range_basis_ = es.eigenvectors().rightCols(rank);
    }
}

PenalizedSolver::Factor PenalizedSolver::factorize(const std::vector<double>& lambdas) const {
    if (lambdas.size() != penalties_.size()) fail_validation(Stage::regress, "one smoothing parameter per penalty");
    Eigen::MatrixXd a = ne_.wdw;
    for (std::size_t d = 0; d < penalties_.size(); ++d) {
        if (!(lambdas[d] >= 0.0) || !std::isfinite(lambdas[d])) {
            fail_validation(Stage::regress, "smoothing parameters must be finite and nonnegative");
        }
        a.noalias() += lambdas[d] * penalties_[d];
    }
    Factor f;
    f.llt.compute(a);
    if (f.llt.info() != Eigen::Success) {
        const double base = std::max(a.trace() / dim(), std::numeric_limits<double>::min());
        for (double level = 1e-10; level <= 1e-6 * 1.0001; level *= 10.0) {
            Eigen::MatrixXd aj = a;
            aj.diagonal().array() += level * base;
            f.llt.compute(aj);
            if (f.llt.info() == Eigen::Success) {
                f.jitter = level * base;
                break;
            }
        }
        if (f.llt.info() != Eigen::Success) fail_numerical(Stage::regress, "singular design: factorization failed");
    }
    f.log_det = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
    return f;
}

double PenalizedSolver::log_pseudo_det(const std::vector<double>& lambdas) const {
    if (range_basis_.cols() == 0) return 0.0;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t d = 0; d < penalties_.size(); ++d) s.noalias() += lambdas[d] * penalties_[d];
    const Eigen::MatrixXd reduced = range_basis_.transpose() * s * range_basis_;
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() == Eigen::Success) return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced, Eigen::EigenvaluesOnly);
    double sum = 0.0;
    const double floor = es.eigenvalues().cwiseAbs().maxCoeff() * std::numeric_limits<double>::epsilon();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) sum += std::log(std::max(es.eigenvalues()[i], floor));
    return sum;
}

FitResult PenalizedSolver::solve(const std::vector<double>& lambdas) const {
    const Factor f = factorize(lambdas);
    FitResult r;
    r.beta = f.llt.solve(ne_.wdy);
    if (!r.beta.allFinite()) fail_numerical(Stage::regress, "non-finite coefficients");
    r.lambdas = lambdas;
    r.jitter = f.jitter;
    const double pen_rss = std::max(ne_.ydy - ne_.wdy.dot(r.beta), std::numeric_limits<double>::min());
    r.sigma2 = pen_rss / std::max(ne_.count, 1.0);
    r.edf = f.llt.solve(ne_.wdw).trace();
    const double log_det_v = -ne_.sum_log_weight + f.log_det - log_pseudo_det(lambdas);
    r.reml = -0.5 * (ne_.count * std::log(pen_rss) + log_det_v);
    return r;
}

double PenalizedSolver::criterion(const std::vector<double>& lambdas) const {
    const Factor f = factorize(lambdas);
    const Eigen::VectorXd beta = f.llt.solve(ne_.wdy);
    const double pen_rss = std::max(ne_.ydy - ne_.wdy.dot(beta), std::numeric_limits<double>::min());
    const double log_det_v = -ne_.sum_log_weight + f.log_det - log_pseudo_det(lambdas);
    return -0.5 * (ne_.count * std::log(pen_rss) + log_det_v);
}

FitResult PenalizedSolver::fit_reml(const std::vector<double>& init_lambdas, const RemlOptions& opts) const {
    const std::size_t nd = penalties_.size();
    if (init_lambdas.size() != nd) fail_validation(Stage::regress, "one initial smoothing parameter per penalty");
    if (nd == 0) return solve({});
    std::vector<double> s(nd);
    for (std::size_t d = 0; d < nd; ++d) {
        if (!(init_lambdas[d] > 0.0)) fail_validation(Stage::regress, "initial smoothing parameters must be positive");
        s[d] = std::clamp(std::log10(init_lambdas[d] / scales_[d]), opts.log10_lower, opts.log10_upper);
    }
    auto lambdas_of = [&](const std::vector<double>& pos) {
        std::vector<double> l(nd);
        for (std::size_t d = 0; d < nd; ++d) l[d] = scales_[d] * std::pow(10.0, pos[d]);
        return l;
    };
    auto value_at = [&](std::vector<double> pos, std::size_t d, double v) {
        pos[d] = v;
        try {
            return criterion(lambdas_of(pos));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::numerical) return -std::numeric_limits<double>::infinity();
            throw;
        }
    };

    double best = criterion(lambdas_of(s));
    const double init_value = best;
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    const double step = 2.0;
    const int grid = static_cast<int>(std::floor((opts.log10_upper - opts.log10_lower) / step + 1e-9)) + 1;
    int cycle = 0;
    bool converged = false;
    while (cycle < opts.max_cycles) {
        ++cycle;
        const double before = best;
        for (std::size_t d = 0; d < nd; ++d) {
            // coarse scan, then golden section in the winning bracket
            double grid_best = -std::numeric_limits<double>::infinity();
            double grid_pos = s[d];
            for (int k = 0; k < grid; ++k) {
                const double v = opts.log10_lower + k * step;
                const double f = value_at(s, d, v);
                if (f > grid_best) {
                    grid_best = f;
                    grid_pos = v;
                }
            }
            double lo = std::max(opts.log10_lower, grid_pos - step);
            double hi = std::min(opts.log10_upper, grid_pos + step);
            double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
            double f1 = value_at(s, d, x1), f2 = value_at(s, d, x2);
            while (hi - lo > 1e-3) {
                if (f1 >= f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - golden * (hi - lo);
                    f1 = value_at(s, d, x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + golden * (hi - lo);
                    f2 = value_at(s, d, x2);
                }
            }
            double cand_pos = f1 >= f2 ? x1 : x2;
            double cand = std::max(f1, f2);
            if (grid_best > cand) {
                cand = grid_best;
                cand_pos = grid_pos;
            }
            if (cand > best) {
                best = cand;
                s[d] = cand_pos;
            }
        }
        if (std::abs(best - before) < opts.tolerance) {
            converged = true;
            break;
        }
    }
    FitResult r = solve(lambdas_of(s));
    r.cycles = cycle;
    r.converged = converged;
    if (!converged) log().warn("smoothing parameter search stopped after {} cycles", cycle);
    if (r.reml < init_value) {
        // cannot happen unless the criterion is non-deterministic; keep the contract anyway
        r = solve(init_lambdas);
        r.cycles = cycle;
        r.converged = converged;
    }
    return r;
}

FitResult solve_fixed_lambda(const PenalizedProblem& p, const std::vector<double>& lambdas) {
    PenalizedSolver solver(accumulate(p), p.penalties);
    return solver.solve(lambdas);
}

FitResult fit_reml(const PenalizedProblem& p, const std::vector<double>& init_lambdas, const RemlOptions& opts) {
    PenalizedSolver solver(accumulate(p), p.penalties);
    return solver.fit_reml(init_lambdas, opts);
}

SmoothCurve::SmoothCurve(BSplineBasis basis, Eigen::VectorXd beta)
    : basis_(std::move(basis)), beta_(std::move(beta)), lower_(basis_.lower()), upper_(basis_.upper()) {}

SmoothCurve::SmoothCurve(std::vector<std::pair<double, double>> knots, double lower, double upper)
    : fallback_(true), points_(std::move(knots)), lower_(lower), upper_(upper) {
    std::sort(points_.begin(), points_.end());
}

double SmoothCurve::operator()(double t) const {
    t = std::clamp(t, lower_, upper_);
    if (!fallback_) return basis_.eval(t).dot(beta_);
    if (points_.empty()) return 0.0;
    if (t <= points_.front().first) return points_.front().second;
    if (t >= points_.back().first) return points_.back().second;
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto& [t1, y1] = *it;
    const auto& [t0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
}

SmoothCurve smoothing_spline_1d(std::span<const std::pair<double, double>> points, int basis_dim, double lower,
                                double upper) {
    if (points.size() < 4) {
        log().warn("smoothing spline needs four points, got {}; using linear interpolation", points.size());
        return SmoothCurve(std::vector<std::pair<double, double>>(points.begin(), points.end()), lower, upper);
    }
    BSplineBasis basis(basis_dim, lower, upper);
    NormalEquations ne(basis.dim());
    SparseRow row;
    double local[16];
    for (const auto& [t, y] : points) {
        const int first = basis.eval_local(t, local);
        row.index.resize(basis.order());
        row.value.assign(local, local + basis.order());
        for (int j = 0; j < basis.order(); ++j) row.index[j] = first + j;
        ne.add(row, y, 1.0);
    }
    ne.finalize();
    PenalizedSolver solver(std::move(ne), {basis.roughness()});
    const FitResult fit = solver.fit_reml({solver.scale(0)});
    return SmoothCurve(std::move(basis), fit.beta);
}

}  // namespace sfm
