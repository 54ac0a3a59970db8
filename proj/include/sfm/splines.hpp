#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sfm {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
Quadrature gauss_legendre(int n);

/// Clamped B-spline basis with equally spaced interior knots.
class BSplineBasis {
public:
    BSplineBasis() = default;
    BSplineBasis(int dim, double lower, double upper, int order = 4);

    int dim() const noexcept { return dim_; }
    int order() const noexcept { return order_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    int cells() const noexcept { return dim_ - order_ + 1; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    /// Knot averages; coefficients equal to these reproduce f(t) = t.
    std::vector<double> greville() const;

    /// Index of the first nonzero basis function at t.
    int first_index(double t) const;
    /// Writes the `order` possibly nonzero values at t into out; returns first_index(t).
    int eval_local(double t, double* out) const;
    /// Derivatives 0..nderiv of the nonzero functions: out(k, j) = d^k B_{first+j}(t).
    int eval_derivs(double t, int nderiv, Eigen::MatrixXd& out) const;
    /// Dense vector of all dim values at t.
    Eigen::VectorXd eval(double t) const;

    /// Integral of B_k B_l over the domain.
    Eigen::MatrixXd gram(int quad_points = 8) const;
    /// Integral of B_k'' B_l'' over the domain.
    Eigen::MatrixXd roughness(int quad_points = 8) const;

private:
    Eigen::MatrixXd integrate_products(int deriv, int quad_points) const;

    int dim_ = 0;
    int order_ = 4;
    double lower_ = 0.0;
    double upper_ = 1.0;
    double width_ = 1.0;
    std::vector<double> knots_;
};

/// Nonzero entries of one tensor-basis evaluation.
struct SparseRow {
    std::vector<int> index;
    std::vector<double> value;

    double dot(const Eigen::VectorXd& beta) const;
};

/// Tensor product of 2 or 3 marginal bases. Coefficient index is row-major
/// over the marginals, e.g. (a * L1 + b) * L2 + c for three.
class TensorBasis {
public:
    TensorBasis() = default;
    explicit TensorBasis(std::vector<BSplineBasis> marginals);

    std::size_t arity() const noexcept { return marginals_.size(); }
    const BSplineBasis& marginal(std::size_t d) const { return marginals_.at(d); }
    const std::vector<BSplineBasis>& marginals() const noexcept { return marginals_; }
    int dim() const noexcept { return dim_; }

    /// Evaluates at a point (one coordinate per marginal) into row.
    void eval(std::span<const double> point, SparseRow& row) const;
    /// Dense basis vector.
    Eigen::VectorXd eval_dense(std::span<const double> point) const;
    /// Function value sum_k beta_k psi_k(point).
    double value(std::span<const double> point, const Eigen::VectorXd& beta) const;

    /// Roughness penalties, one per marginal direction: the second derivative
    /// along d squared and integrated over the whole box.
    std::vector<Eigen::MatrixXd> penalties(int quad_points = 8) const;

private:
    std::vector<BSplineBasis> marginals_;
    int dim_ = 0;
};

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace sfm
