#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfm/dataset.hpp"
#include "sfm/regress.hpp"
#include "sfm/splines.hpp"

namespace sfm {

struct FlowConfig {
    int H = 10;  ///< base curves in the Monte Carlo pool
    int F = 15;  ///< u grid size, endpoints included
    int L_u = 6;
    int L_t = 6;
    int L_x = 6;
    double x_margin = 0.05;
    int quad_points = 8;
    std::size_t chunks = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

/// V(u, t, x) on a cubic tensor basis over [0,1] x T x X. Arguments outside
/// the box are clamped, so the field is constant beyond X.
class TensorSplineField {
public:
    TensorSplineField() = default;
    TensorSplineField(TensorBasis tensor, Eigen::VectorXd beta);

    const TensorBasis& tensor() const noexcept { return tensor_; }
    const Eigen::VectorXd& beta() const noexcept { return beta_; }
    std::pair<double, double> x_domain() const noexcept {
        return {tensor_.marginal(2).lower(), tensor_.marginal(2).upper()};
    }
    std::pair<double, double> t_domain() const noexcept {
        return {tensor_.marginal(1).lower(), tensor_.marginal(1).upper()};
    }

    double operator()(double u, double t, double x) const;

    /// The field restricted to one time: (L_u x L_x) coefficients.
    class Slice {
    public:
        double operator()(double u, double x) const;

    private:
        friend class TensorSplineField;
        const BSplineBasis* bu_ = nullptr;
        const BSplineBasis* bx_ = nullptr;
        Eigen::MatrixXd coef_;
    };
    Slice slice(double t) const;

    /// Field whose coefficients come from c(a, b, c) evaluated at the marginal
    /// Greville abscissae, i.e. reproducing any function affine in each variable.
    static TensorSplineField from_affine(const FlowConfig& cfg, std::pair<double, double> t_domain,
                                         std::pair<double, double> x_domain, double (*f)(double u, double t, double x));

private:
    TensorBasis tensor_;
    Eigen::VectorXd beta_;
};

enum class Direction { forward, backward };

/// RK4 over u in [0, 1] with `steps` equal steps. Forward solves dx/du = V(u,t,x);
/// backward solves dy/du = -V(1-u,t,y), inverting the forward map.
double integrate(const TensorSplineField& field, double t, double x0, int steps, Direction dir);
double integrate(const TensorSplineField::Slice& slice, double x0, int steps, Direction dir);

/// H white standard-normal base curves on the grid (H x grid size).
Eigen::MatrixXd white_base_pool(int H, int grid_size, std::uint64_t seed);

struct FlowTraining {
    PenalizedProblem problem;
    TensorBasis tensor;
    Eigen::MatrixXd base_pool;
    std::vector<double> u_grid;
};

/// Flow matching regression: rows at (u_f, T_ij, (1-u_f) Z0_h(T_ij) + u_f X_ij)
/// with response X_ij - Z0_h(T_ij) and weight 1/(n H F J_i). The pool must be
/// H x grid size; X covers the range of every path value plus the margin.
FlowTraining assemble_training(const IrregularDataset& ds, const FlowConfig& cfg, const Eigen::MatrixXd& base_pool);

struct FieldFit {
    TensorSplineField field;
    FitResult regression;
};

FieldFit fit_vector_field(const IrregularDataset& ds, const FlowConfig& cfg);

struct RoundtripStats {
    double mean = 0.0;
    double max = 0.0;
};

/// |backward(forward(x)) - x| over all (t, x) probe pairs.
RoundtripStats roundtrip_error(const TensorSplineField& field, const std::vector<double>& times,
                               const std::vector<double>& probes, int steps);

/// Number of adjacent probe pairs x1 < x2 with forward(x1) > forward(x2) + tol.
int monotonicity_violations(const TensorSplineField& field, const std::vector<double>& times,
                            const std::vector<double>& probes, int steps, double tol = 1e-6);

}  // namespace sfm
