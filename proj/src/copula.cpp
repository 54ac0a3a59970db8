#include "sfm/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "sfm/error.hpp"
#include "sfm/log.hpp"
#include "sfm/parallel.hpp"
#include "sfm/random.hpp"
#include "sfm/regress.hpp"
#include "sfm/special.hpp"

namespace sfm {

LatentScores latent_scores(const IrregularDataset& ds, const TensorSplineField& field, int steps) {
    const int G = ds.grid().size();
    std::vector<TensorSplineField::Slice> slices(G);
    for (int g = 0; g < G; ++g) slices[g] = field.slice(ds.grid()[g]);
    LatentScores out;
    out.values.resize(ds.size());
    std::vector<std::size_t> bad(ds.size(), 0);
    parallel_for(ds.size(), [&](std::size_t i) {
        const auto& pts = ds.subjects()[i].points;
        auto& v = out.values[i];
        v.resize(pts.size());
        for (std::size_t j = 0; j < pts.size(); ++j) {
            try {
                v[j] = integrate(slices[pts[j].slot], pts[j].x, steps, Direction::backward);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::numerical) throw;
                v[j] = std::numeric_limits<double>::quiet_NaN();
                ++bad[i];
            }
        }
    });
    out.excluded = std::accumulate(bad.begin(), bad.end(), std::size_t{0});
    if (out.excluded > 0) log().warn("{} observations excluded: backward integration failed", out.excluded);
    return out;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& a, double floor) {
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) fail_numerical(Stage::surface, "eigen decomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0)) fail_numerical(Stage::surface, "matrix has no positive eigenvalue");
    const std::size_t clipped = (ev.array() < floor * top).count();
    ev = ev.cwiseMax(floor * top);
    if (clipped > 0) log().debug("psd projection clipped {} of {} eigenvalues", clipped, ev.size());
    const Eigen::MatrixXd& v = es.eigenvectors();
    Eigen::MatrixXd out = v * ev.asDiagonal() * v.transpose();
    return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd project_correlation(const Eigen::MatrixXd& a) {
    Eigen::MatrixXd p = project_psd(a);
    const Eigen::VectorXd s = p.diagonal().cwiseSqrt().cwiseInverse();
    p = s.asDiagonal() * p * s.asDiagonal();
    p = 0.5 * (p + p.transpose());
    p = p.cwiseMin(1.0).cwiseMax(-1.0);
    p.diagonal().setOnes();
    return p;
}

CorrelationSurface estimate_surface(const IrregularDataset& ds, const LatentScores& scores, const SurfaceConfig& cfg) {
    if (scores.values.size() != ds.size()) fail_validation(Stage::surface, "scores do not match the dataset");
    const auto [t0, t1] = ds.domain();
    CorrelationSurface out;
    out.tensor = TensorBasis({BSplineBasis(cfg.dim, t0, t1), BSplineBasis(cfg.dim, t0, t1)});

    // valid (t, score) per subject
    std::vector<std::vector<std::pair<double, double>>> obs(ds.size());
    std::size_t pair_count = 0, contributing = 0;
    double sum = 0.0, sum2 = 0.0, count = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& pts = ds.subjects()[i].points;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const double z = scores.values[i].at(j);
            if (!std::isfinite(z)) continue;
            obs[i].emplace_back(pts[j].t, z);
            sum += z;
            sum2 += z * z;
            count += 1.0;
        }
        pair_count += obs[i].size() * obs[i].size();
        if (!obs[i].empty()) ++contributing;
    }
    if (contributing < 2) fail_validation(Stage::surface, "surface estimation needs at least two subjects");
    if (pair_count < static_cast<std::size_t>(out.tensor.dim())) {
        fail_validation(Stage::surface, fmt::format("{} score pairs for a {}-dimensional surface basis", pair_count,
                                                    out.tensor.dim()));
    }
    const double var = sum2 / count - (sum / count) * (sum / count);
    if (!(var > 1e-12 * std::max(1.0, sum2 / count))) fail_validation(Stage::surface, "scores are constant");

    PenalizedProblem p;
    p.dim = out.tensor.dim();
    const auto pens = out.tensor.penalties(cfg.quad_points);
    p.penalties = {pens[0] + pens[1]};
    p.chunks = std::min(cfg.chunks, ds.size());
    const double n = static_cast<double>(contributing);
    const std::size_t ns = ds.size(), chunks = p.chunks;
    p.rows = [&obs, &out, n, ns, chunks](std::size_t c, const RowSink& emit) {
        SparseRow row;
        for (std::size_t i = ns * c / chunks; i < ns * (c + 1) / chunks; ++i) {
            const auto& o = obs[i];
            if (o.empty()) continue;
            const double J = static_cast<double>(o.size());
            const double w = 1.0 / (n * J * J);
            for (const auto& [ta, za] : o)
                for (const auto& [tb, zb] : o) {
                    const double pt[2] = {ta, tb};
                    out.tensor.eval(pt, row);
                    emit(row, za * zb, w);
                }
        }
    };
    try {
        PenalizedSolver solver(accumulate(p), p.penalties);
        const FitResult fit = solver.fit_reml({solver.scale(0)});
        out.beta = fit.beta;
        out.lambda = fit.lambdas[0];
    } catch (const Error& e) {
        throw e.relabel(Stage::surface);
    }

    const int G = ds.grid().size();
    Eigen::MatrixXd raw(G, G);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
            const double pt[2] = {ds.grid()[a], ds.grid()[b]};
            raw(a, b) = out.tensor.value(pt, out.beta);
        }
    try {
        out.grid_matrix = project_correlation(raw);
    } catch (const Error& e) {
        throw e.relabel(Stage::surface);
    }
    return out;
}

CopulaBaseModel make_base_model(BaseFamily family, double nu, Eigen::MatrixXd correlation) {
    if (correlation.rows() != correlation.cols() || correlation.rows() == 0) {
        fail_validation(Stage::sample, "correlation must be a nonempty square matrix");
    }
    if (family == BaseFamily::student_t && !(nu > 2.0)) fail_validation(Stage::sample, "student-t base needs nu > 2");
    CopulaBaseModel m;
    m.family = family;
    m.nu = family == BaseFamily::student_t ? nu : 0.0;
    m.correlation = std::move(correlation);
    const double norm = m.correlation.norm();
    const auto n = m.correlation.rows();
    for (double jitter = 0.0; jitter <= 1e-8 * norm * (1 + 1e-9); jitter = jitter == 0.0 ? 1e-14 * norm : jitter * 10) {
        Eigen::LLT<Eigen::MatrixXd> llt(m.correlation + jitter * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            m.chol = llt.matrixL();
            m.jitter = jitter;
            return m;
        }
    }
    fail_numerical(Stage::sample, "correlation factorization failed after jitter 1e-8 * norm");
}

Eigen::MatrixXd sample_base(const CopulaBaseModel& model, std::size_t m, std::uint64_t seed) {
    const auto G = model.chol.rows();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m), G);
    parallel_for(m, [&](std::size_t l) {
        Rng rng = make_rng(seed, l);
        std::normal_distribution<double> nd;
        Eigen::VectorXd z(G);
        for (Eigen::Index g = 0; g < G; ++g) z[g] = nd(rng);
        Eigen::VectorXd w = model.chol.triangularView<Eigen::Lower>() * z;
        if (model.family == BaseFamily::student_t) {
            std::chi_squared_distribution<double> chi(model.nu);
            const double scale = 1.0 / std::sqrt(chi(rng) / model.nu);
            for (Eigen::Index g = 0; g < G; ++g) w[g] = special::normal_score_of_t(w[g] * scale, model.nu);
        }
        out.row(static_cast<Eigen::Index>(l)) = w.transpose();
    });
    if (!out.allFinite()) fail_numerical(Stage::sample, "non-finite base sample");
    return out;
}

double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) fail_validation(Stage::nu, "kendall tau needs equal lengths");
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (std::isfinite(x[i]) && std::isfinite(y[i])) idx.push_back(i);
    if (idx.size() < 2) fail_validation(Stage::nu, "kendall tau needs two complete pairs");
    double s = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const double dx = x[idx[a]] - x[idx[b]], dy = y[idx[a]] - y[idx[b]];
            s += static_cast<double>(((dx > 0) - (dx < 0)) * ((dy > 0) - (dy < 0)));
        }
    const double pairs = 0.5 * static_cast<double>(idx.size()) * static_cast<double>(idx.size() - 1);
    return s / pairs;
}

namespace {

// Per-column pseudo-observations rank / (n_j + 1), ties given their mean rank.
Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& v) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Constant(v.rows(), v.cols(), std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            if (std::isfinite(v(r, c))) idx.push_back(r);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v(a, c) < v(b, c); });
        const double denom = static_cast<double>(idx.size()) + 1.0;
        for (std::size_t k = 0; k < idx.size();) {
            std::size_t e = k;
            while (e + 1 < idx.size() && v(idx[e + 1], c) == v(idx[k], c)) ++e;
            const double rank = 0.5 * static_cast<double>(k + e) + 1.0;
            for (std::size_t q = k; q <= e; ++q) u(idx[q], c) = rank / denom;
            k = e + 1;
        }
    }
    return u;
}

struct ColumnPair {
    Eigen::Index a, b;
    double rho;
    std::vector<Eigen::Index> rows;
};

}  // namespace

NuEstimate estimate_nu(const Eigen::MatrixXd& values, const NuOptions& opts) {
    if (!(opts.lower > 2.0) || !(opts.upper > opts.lower)) fail_validation(Stage::nu, "invalid nu search range");
    const Eigen::MatrixXd u = pseudo_observations(values);
    std::vector<ColumnPair> pairs;
    for (Eigen::Index a = 0; a < values.cols(); ++a)
        for (Eigen::Index b = a + 1; b < values.cols(); ++b) {
            ColumnPair cp{a, b, 0.0, {}};
            for (Eigen::Index r = 0; r < values.rows(); ++r)
                if (std::isfinite(u(r, a)) && std::isfinite(u(r, b))) cp.rows.push_back(r);
            if (static_cast<int>(cp.rows.size()) < opts.min_pair_count) continue;
            cp.rho = std::clamp(tau_to_rho(kendall_tau(values.col(a), values.col(b))), -0.999, 0.999);
            pairs.push_back(std::move(cp));
        }
    if (pairs.empty()) {
        fail_validation(Stage::nu, fmt::format("usable column pairs: 0 (each needs {} pairwise-complete subjects)",
                                               opts.min_pair_count));
    }
    std::vector<bool> used(values.cols(), false);
    for (const auto& cp : pairs) used[cp.a] = used[cp.b] = true;

    auto loglik = [&](double nu) {
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(values.rows(), values.cols());
        Eigen::MatrixXd lq = q;
        parallel_for(static_cast<std::size_t>(values.cols()), [&](std::size_t c) {
            if (!used[c]) return;
            for (Eigen::Index r = 0; r < values.rows(); ++r) {
                if (!std::isfinite(u(r, c))) continue;
                q(r, c) = special::student_t_quantile(u(r, c), nu);
                lq(r, c) = special::student_t_logpdf(q(r, c), nu);
            }
        });
        double s = 0.0;
        for (const auto& cp : pairs)
            for (Eigen::Index r : cp.rows) {
                s += special::bivariate_t_logpdf(q(r, cp.a), q(r, cp.b), cp.rho, nu) - lq(r, cp.a) - lq(r, cp.b);
            }
        return s;
    };
    auto at = [&](double s) { return loglik(2.0 + std::exp(s)); };

    const double lo = std::log(opts.lower - 2.0), hi = std::log(opts.upper - 2.0);
    const int scan = 16;
    std::vector<double> grid(scan + 1), val(scan + 1);
    int best = 0;
    for (int k = 0; k <= scan; ++k) {
        grid[k] = lo + (hi - lo) * k / scan;
        val[k] = at(grid[k]);
        if (val[k] > val[best]) best = k;
    }
    double a = grid[std::max(best - 1, 0)], b = grid[std::min(best + 1, scan)];
    double best_s = grid[best], best_v = val[best];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = at(c), fd = at(d);
    while (b - a > 1e-4) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = at(d);
        }
    }
    for (auto [s, v] : {std::pair{c, fc}, std::pair{d, fd}})
        if (v > best_v) {
            best_v = v;
            best_s = s;
        }
    NuEstimate est;
    est.nu = 2.0 + std::exp(best_s);
    est.pairs = pairs.size();
    est.log_likelihood = best_v;
    est.at_upper = hi - best_s < 1e-3;
    if (est.at_upper) log().info("nu estimate at the upper bound {}: effectively Gaussian", opts.upper);
    return est;
}

Eigen::MatrixXd coarsen_columns(const Eigen::MatrixXd& values, int factor) {
    if (factor < 1) fail_validation(Stage::nu, "coarsening factor must be positive");
    const Eigen::Index cols = (values.cols() + factor - 1) / factor;
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(values.rows(), cols, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            double& slot = out(r, c / factor);
            if (!std::isfinite(slot) && std::isfinite(values(r, c))) slot = values(r, c);
        }
    return out;
}

}  // namespace sfm
