#include "sfm/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"

namespace sfm {

void FlowConfig::validate() const {
    if (H < 1) fail_validation(Stage::config, "H must be at least 1");
    if (F < 2) fail_validation(Stage::config, "F must be at least 2");
    if (L_u < 4 || L_t < 4 || L_x < 4) fail_validation(Stage::config, "spline dimensions must be at least 4");
    if (!(x_margin >= 0.0)) fail_validation(Stage::config, "x margin must be nonnegative");
    if (chunks < 1) fail_validation(Stage::config, "chunk count must be positive");
}

TensorSplineField::TensorSplineField(TensorBasis tensor, Eigen::VectorXd beta)
    : tensor_(std::move(tensor)), beta_(std::move(beta)) {
    if (tensor_.arity() != 3) fail_validation(Stage::fit_field, "vector field needs a three-way tensor basis");
    if (beta_.size() != tensor_.dim()) fail_validation(Stage::fit_field, "coefficient count does not match basis");
    if (!beta_.allFinite()) fail_numerical(Stage::fit_field, "vector field coefficients are not finite");
}

double TensorSplineField::operator()(double u, double t, double x) const {
    const double p[3] = {
        std::clamp(u, 0.0, 1.0),
        std::clamp(t, tensor_.marginal(1).lower(), tensor_.marginal(1).upper()),
        std::clamp(x, tensor_.marginal(2).lower(), tensor_.marginal(2).upper()),
    };
    return tensor_.value(p, beta_);
}

TensorSplineField::Slice TensorSplineField::slice(double t) const {
    const auto& bu = tensor_.marginal(0);
    const auto& bt = tensor_.marginal(1);
    const auto& bx = tensor_.marginal(2);
    double local[16];
    const int first = bt.eval_local(std::clamp(t, bt.lower(), bt.upper()), local);
    Slice s;
    s.bu_ = &bu;
    s.bx_ = &bx;
    s.coef_ = Eigen::MatrixXd::Zero(bu.dim(), bx.dim());
    for (int a = 0; a < bu.dim(); ++a) {
        for (int j = 0; j < bt.order(); ++j) {
            const int b = first + j;
            for (int c = 0; c < bx.dim(); ++c) s.coef_(a, c) += local[j] * beta_[(a * bt.dim() + b) * bx.dim() + c];
        }
    }
    return s;
}

double TensorSplineField::Slice::operator()(double u, double x) const {
    double lu[16], lx[16];
    const int fu = bu_->eval_local(std::clamp(u, 0.0, 1.0), lu);
    const int fx = bx_->eval_local(std::clamp(x, bx_->lower(), bx_->upper()), lx);
    double s = 0.0;
    for (int a = 0; a < bu_->order(); ++a) {
        double inner = 0.0;
        for (int c = 0; c < bx_->order(); ++c) inner += lx[c] * coef_(fu + a, fx + c);
        s += lu[a] * inner;
    }
    return s;
}

TensorSplineField TensorSplineField::from_affine(const FlowConfig& cfg, std::pair<double, double> t_domain,
                                                 std::pair<double, double> x_domain,
                                                 double (*f)(double u, double t, double x)) {
    TensorBasis tb({BSplineBasis(cfg.L_u, 0.0, 1.0), BSplineBasis(cfg.L_t, t_domain.first, t_domain.second),
                    BSplineBasis(cfg.L_x, x_domain.first, x_domain.second)});
    const auto gu = tb.marginal(0).greville(), gt = tb.marginal(1).greville(), gx = tb.marginal(2).greville();
    Eigen::VectorXd beta(tb.dim());
    for (int a = 0; a < cfg.L_u; ++a)
        for (int b = 0; b < cfg.L_t; ++b)
            for (int c = 0; c < cfg.L_x; ++c) beta[(a * cfg.L_t + b) * cfg.L_x + c] = f(gu[a], gt[b], gx[c]);
    return TensorSplineField(std::move(tb), std::move(beta));
}

double integrate(const TensorSplineField::Slice& slice, double x0, int steps, Direction dir) {
    if (steps < 1) fail_validation(Stage::integrate, "step count must be positive");
    if (!std::isfinite(x0)) fail_numerical(Stage::integrate, "non-finite starting value");
    const double h = 1.0 / steps;
    auto rhs = [&](double u, double x) {
        return dir == Direction::forward ? slice(u, x) : -slice(1.0 - u, x);
    };
    double x = x0;
    for (int k = 0; k < steps; ++k) {
        const double u = k * h;
        const double k1 = rhs(u, x);
        const double k2 = rhs(u + 0.5 * h, x + 0.5 * h * k1);
        const double k3 = rhs(u + 0.5 * h, x + 0.5 * h * k2);
        const double k4 = rhs(u + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(x)) fail_numerical(Stage::integrate, fmt::format("non-finite state at step {}", k + 1));
    }
    return x;
}

double integrate(const TensorSplineField& field, double t, double x0, int steps, Direction dir) {
    return integrate(field.slice(t), x0, steps, dir);
}

Eigen::MatrixXd white_base_pool(int H, int grid_size, std::uint64_t seed) {
    Eigen::MatrixXd pool(H, grid_size);
    for (int h = 0; h < H; ++h) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(h));
        std::normal_distribution<double> nd;
        for (int g = 0; g < grid_size; ++g) pool(h, g) = nd(rng);
    }
    return pool;
}

FlowTraining assemble_training(const IrregularDataset& ds, const FlowConfig& cfg, const Eigen::MatrixXd& base_pool) {
    cfg.validate();
    if (ds.size() == 0) fail_validation(Stage::fit_field, "dataset is empty");
    if (ds.grid().size() < 4) fail_validation(Stage::fit_field, "grid needs at least 4 points for fitting");
    if (base_pool.rows() != cfg.H || base_pool.cols() != ds.grid().size()) {
        fail_validation(Stage::fit_field, "base pool must be H x grid size");
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ds.subjects()) {
        for (const auto& p : s.points) {
            lo = std::min(lo, p.x);
            hi = std::max(hi, p.x);
            for (int h = 0; h < cfg.H; ++h) {
                lo = std::min(lo, base_pool(h, p.slot));
                hi = std::max(hi, base_pool(h, p.slot));
            }
        }
    }
    const double span = std::max(hi - lo, 1e-8);
    const double x_lo = lo - cfg.x_margin * span, x_hi = hi + cfg.x_margin * span;

    FlowTraining tr;
    tr.tensor = TensorBasis({BSplineBasis(cfg.L_u, 0.0, 1.0), BSplineBasis(cfg.L_t, ds.grid().t_min(), ds.grid().t_max()),
                             BSplineBasis(cfg.L_x, x_lo, x_hi)});
    tr.base_pool = base_pool;
    tr.u_grid.resize(cfg.F);
    for (int f = 0; f < cfg.F; ++f) tr.u_grid[f] = static_cast<double>(f) / (cfg.F - 1);
    tr.u_grid.back() = 1.0;

    const std::size_t n = ds.size();
    const std::size_t chunks = std::min(cfg.chunks, n);
    PenalizedProblem& p = tr.problem;
    p.dim = tr.tensor.dim();
    p.penalties = tr.tensor.penalties(cfg.quad_points);
    p.chunks = chunks;
    const double nHF = static_cast<double>(n) * cfg.H * cfg.F;
    // captured by value: the problem must stay valid after this function returns
    p.rows = [&ds, tensor = tr.tensor, pool = tr.base_pool, u_grid = tr.u_grid, n, chunks, nHF](
                 std::size_t c, const RowSink& emit) {
        SparseRow row;
        for (std::size_t i = n * c / chunks; i < n * (c + 1) / chunks; ++i) {
            const auto& s = ds.subjects()[i];
            const double w = 1.0 / (nHF * static_cast<double>(s.points.size()));
            for (const auto& pt : s.points) {
                for (Eigen::Index h = 0; h < pool.rows(); ++h) {
                    const double z0 = pool(h, pt.slot);
                    const double y = pt.x - z0;
                    for (double u : u_grid) {
                        const double z = u == 1.0 ? pt.x : (1.0 - u) * z0 + u * pt.x;
                        const double point[3] = {u, pt.t, z};
                        tensor.eval(point, row);
                        emit(row, y, w);
                    }
                }
            }
        }
    };
    return tr;
}

FieldFit fit_vector_field(const IrregularDataset& ds, const FlowConfig& cfg) {
    try {
        const Eigen::MatrixXd pool = white_base_pool(cfg.H, ds.grid().size(), cfg.seed);
        FlowTraining tr = assemble_training(ds, cfg, pool);
        PenalizedSolver solver(accumulate(tr.problem), tr.problem.penalties);
        std::vector<double> init(solver.penalty_count());
        for (std::size_t d = 0; d < init.size(); ++d) init[d] = solver.scale(d);
        FitResult fit = solver.fit_reml(init);
        log().debug("field fit: edf {:.2f}, lambdas [{:.3g}, {:.3g}, {:.3g}], {} cycles", fit.edf, fit.lambdas[0],
                    fit.lambdas[1], fit.lambdas[2], fit.cycles);
        TensorSplineField field(std::move(tr.tensor), fit.beta);
        return {std::move(field), std::move(fit)};
    } catch (const Error& e) {
        if (e.stage() == Stage::fit_field || e.stage() == Stage::config) throw;
        throw e.relabel(Stage::fit_field);
    }
}

RoundtripStats roundtrip_error(const TensorSplineField& field, const std::vector<double>& times,
                               const std::vector<double>& probes, int steps) {
    RoundtripStats st;
    std::size_t count = 0;
    for (double t : times) {
        const auto slice = field.slice(t);
        for (double x : probes) {
            const double y = integrate(slice, x, steps, Direction::forward);
            const double back = integrate(slice, y, steps, Direction::backward);
            const double err = std::abs(back - x);
            st.mean += err;
            st.max = std::max(st.max, err);
            ++count;
        }
    }
    if (count > 0) st.mean /= static_cast<double>(count);
    return st;
}

int monotonicity_violations(const TensorSplineField& field, const std::vector<double>& times,
                            const std::vector<double>& probes, int steps, double tol) {
    std::vector<double> sorted = probes;
    std::sort(sorted.begin(), sorted.end());
    int violations = 0;
    for (double t : times) {
        const auto slice = field.slice(t);
        double prev = -std::numeric_limits<double>::infinity();
        for (double x : sorted) {
            const double y = integrate(slice, x, steps, Direction::forward);
            if (prev > y + tol) ++violations;
            prev = y;
        }
    }
    if (violations > 0) log().warn("learned transport is not monotone at {} probe pairs", violations);
    return violations;
}

}  // namespace sfm
