#include "sfm/splines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfm/error.hpp"

namespace sfm {

Quadrature gauss_legendre(int n) {
    if (n < 1) fail_validation(Stage::config, "quadrature needs at least one node");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = 0.0;
    return q;
}

BSplineBasis::BSplineBasis(int dim, double lower, double upper, int order)
    : dim_(dim), order_(order), lower_(lower), upper_(upper) {
    if (order < 1) fail_validation(Stage::config, "spline order must be positive");
    if (dim < order) fail_validation(Stage::config, "spline dimension must be at least the order");
    if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper)) {
        fail_validation(Stage::config, "spline domain must be a finite nonempty interval");
    }
    width_ = (upper - lower) / cells();
    knots_.reserve(dim + order);
    for (int i = 0; i < order; ++i) knots_.push_back(lower);
    for (int i = 1; i < cells(); ++i) knots_.push_back(lower + i * width_);
    for (int i = 0; i < order; ++i) knots_.push_back(upper);
}

int BSplineBasis::first_index(double t) const {
    const double slack = 1e-12 * (upper_ - lower_);
    if (!(t >= lower_ - slack && t <= upper_ + slack)) {
        fail_validation(Stage::regress, "spline argument " + std::to_string(t) + " outside [" +
                                            std::to_string(lower_) + ", " + std::to_string(upper_) + "]");
    }
    const int cell = static_cast<int>(std::floor((t - lower_) / width_));
    return std::clamp(cell, 0, cells() - 1);
}

int BSplineBasis::eval_local(double t, double* out) const {
    const int first = first_index(t);
    t = std::clamp(t, lower_, upper_);
    const int p = order_ - 1;
    const int span = first + p;
    // Cox-de Boor triangle, left/right differences as in the standard algorithm
    double left[16], right[16];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    return first;
}

int BSplineBasis::eval_derivs(double t, int nderiv, Eigen::MatrixXd& out) const {
    const int first = first_index(t);
    t = std::clamp(t, lower_, upper_);
    const int p = order_ - 1;
    const int span = first + p;
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    out.setZero(nderiv + 1, p + 1);
    for (int j = 0; j <= p; ++j) out(0, j) = ndu(j, p);
    const int n = std::min(nderiv, p);
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a.setZero();
        a(0, 0) = 1.0;
        for (int k = 1; k <= n; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= n; ++k) {
        out.row(k) *= factor;
        factor *= (p - k);
    }
    return first;
}

std::vector<double> BSplineBasis::greville() const {
    std::vector<double> g(dim_);
    for (int i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (int k = 1; k < order_; ++k) s += knots_[i + k];
        g[i] = s / (order_ - 1);
    }
    return g;
}

Eigen::VectorXd BSplineBasis::eval(double t) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    double local[16];
    const int first = eval_local(t, local);
    for (int j = 0; j < order_; ++j) v[first + j] = local[j];
    return v;
}

Eigen::MatrixXd BSplineBasis::integrate_products(int deriv, int quad_points) const {
    if (quad_points < 2 * order_) {
        fail_validation(Stage::config, "penalty quadrature needs at least 2 * order points per cell");
    }
    const Quadrature q = gauss_legendre(quad_points);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    Eigen::MatrixXd d;
    for (int c = 0; c < cells(); ++c) {
        const double a = lower_ + c * width_;
        const double half = 0.5 * width_;
        for (int k = 0; k < quad_points; ++k) {
            const double t = a + half * (q.nodes[k] + 1.0);
            const double w = half * q.weights[k];
            eval_derivs(t, deriv, d);
            // the node is interior to cell c, so first index is c
            for (int i = 0; i < order_; ++i) {
                for (int j = 0; j < order_; ++j) m(c + i, c + j) += w * d(deriv, i) * d(deriv, j);
            }
        }
    }
    return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd BSplineBasis::gram(int quad_points) const { return integrate_products(0, quad_points); }

Eigen::MatrixXd BSplineBasis::roughness(int quad_points) const { return integrate_products(2, quad_points); }

double SparseRow::dot(const Eigen::VectorXd& beta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * beta[index[k]];
    return s;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

TensorBasis::TensorBasis(std::vector<BSplineBasis> marginals) : marginals_(std::move(marginals)) {
    if (marginals_.size() < 1 || marginals_.size() > 3) {
        fail_validation(Stage::config, "tensor basis supports one to three marginals");
    }
    dim_ = 1;
    for (const auto& m : marginals_) dim_ *= m.dim();
}

void TensorBasis::eval(std::span<const double> point, SparseRow& row) const {
    if (point.size() != marginals_.size()) fail_validation(Stage::regress, "tensor point has wrong arity");
    double local[3][16];
    int first[3] = {0, 0, 0};
    int order[3] = {1, 1, 1};
    int dims[3] = {1, 1, 1};
    for (std::size_t d = 0; d < marginals_.size(); ++d) {
        first[d] = marginals_[d].eval_local(point[d], local[d]);
        order[d] = marginals_[d].order();
        dims[d] = marginals_[d].dim();
    }
    for (std::size_t d = marginals_.size(); d < 3; ++d) local[d][0] = 1.0;
    row.index.clear();
    row.value.clear();
    row.index.reserve(order[0] * order[1] * order[2]);
    row.value.reserve(order[0] * order[1] * order[2]);
    for (int i = 0; i < order[0]; ++i) {
        for (int j = 0; j < order[1]; ++j) {
            const double vij = local[0][i] * local[1][j];
            const int base = ((first[0] + i) * dims[1] + first[1] + j) * dims[2] + first[2];
            for (int k = 0; k < order[2]; ++k) {
                row.index.push_back(base + k);
                row.value.push_back(vij * local[2][k]);
            }
        }
    }
}

Eigen::VectorXd TensorBasis::eval_dense(std::span<const double> point) const {
    SparseRow row;
    eval(point, row);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    for (std::size_t k = 0; k < row.index.size(); ++k) v[row.index[k]] += row.value[k];
    return v;
}

double TensorBasis::value(std::span<const double> point, const Eigen::VectorXd& beta) const {
    thread_local SparseRow row;
    eval(point, row);
    return row.dot(beta);
}

std::vector<Eigen::MatrixXd> TensorBasis::penalties(int quad_points) const {
    const std::size_t n = marginals_.size();
    std::vector<Eigen::MatrixXd> grams, rough;
    for (const auto& m : marginals_) {
        grams.push_back(m.gram(quad_points));
        rough.push_back(m.roughness(quad_points));
    }
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t d = 0; d < n; ++d) {
        Eigen::MatrixXd r = d == 0 ? rough[0] : grams[0];
        for (std::size_t e = 1; e < n; ++e) r = kron(r, e == d ? rough[e] : grams[e]);
        out.push_back(0.5 * (r + r.transpose()));
    }
    return out;
}

}  // namespace sfm
