#include "sfm/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sfm/error.hpp"

namespace sfm::special {

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// log Gamma(a + b) - log Gamma(a); Stirling differences for large a avoid cancellation.
double lgamma_ratio(double a, double b) {
    if (a < 1e3) return std::lgamma(a + b) - std::lgamma(a);
    auto tail = [](double z) {
        const double iz = 1.0 / z, iz2 = iz * iz;
        return iz * (1.0 / 12.0 - iz2 * (1.0 / 360.0 - iz2 / 1260.0));
    };
    return (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b + tail(a + b) - tail(a);
}

double log_beta(double a, double b) {
    return a >= b ? std::lgamma(b) - lgamma_ratio(a, b) : std::lgamma(a) - lgamma_ratio(b, a);
}

double gamma_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), x >= a + 1.
double gamma_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

// Solves F(x) = p on [lo, hi] where F - p changes sign, F increasing.
template <class Cdf, class Pdf>
double solve_increasing(Cdf&& cdf, Pdf&& pdf, double p, double lo, double hi, double x) {
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        const double fx = cdf(x) - p;
        if (fx == 0.0) return x;
        if (fx < 0.0) lo = x; else hi = x;
        const double dens = pdf(x);
        double next = (dens > 0.0 && std::isfinite(dens)) ? x - fx / dens : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-13 * (1.0 + std::abs(x)) || hi - lo <= 1e-14 * (1.0 + std::abs(x))) return next;
        x = next;
    }
    return x;
}

void check_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) fail_validation(Stage::evaluate, std::string(what) + ": probability must lie in (0, 1)");
}

// First-order Edgeworth correction; absolute error O(1/nu^2).
constexpr double kLargeNu = 1e7;

double t_lower_tail(double x, double nu) {
    // P(T <= x) for x <= 0
    if (nu > kLargeNu) return normal_cdf(x) - normal_pdf(x) * (x * x * x + x) / (4.0 * nu);
    const double x2 = x * x;
    if (x2 < nu) return 0.5 - 0.5 * ibeta(0.5, 0.5 * nu, x2 / (nu + x2));
    return 0.5 * ibeta(0.5 * nu, 0.5, nu / (nu + x2));
}

double t_quantile_lower(double p, double nu) {
    // p <= 0.5, returns x <= 0
    if (p == 0.5) return 0.0;
    double lo = std::min(normal_quantile(p), -1.0);
    while (t_lower_tail(lo, nu) > p) lo *= 2.0;
    auto cdf = [nu](double x) { return t_lower_tail(std::min(x, 0.0), nu); };
    auto pdf = [nu](double x) { return student_t_pdf(x, nu); };
    return solve_increasing(cdf, pdf, p, lo, 0.0, normal_quantile(p));
}

}  // namespace

double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    check_probability(p, "normal_quantile");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                    4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                    2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                 1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -z : z;
}

double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_series(a, x);
    return 1.0 - gamma_fraction(a, x);
}

double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_series(a, x);
    return gamma_fraction(a, x);
}

double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double gamma_cdf(double x, double shape, double rate) { return gamma_p(shape, rate * x); }

double gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - std::lgamma(shape));
}

double gamma_quantile(double p, double shape, double rate) {
    check_probability(p, "gamma_quantile");
    if (p > 0.5) return gamma_quantile_upper(1.0 - p, shape, rate);
    double hi = std::max(shape, 1.0) / rate;
    while (gamma_cdf(hi, shape, rate) < p) hi *= 2.0;
    auto cdf = [=](double x) { return gamma_cdf(x, shape, rate); };
    auto pdf = [=](double x) { return gamma_pdf(x, shape, rate); };
    // Small-p start from P(a, x) ~ x^a / Gamma(a + 1).
    double start = std::exp((std::log(p) + std::lgamma(shape + 1.0)) / shape) / rate;
    return solve_increasing(cdf, pdf, p, 0.0, hi, std::min(start, 0.5 * hi));
}

double gamma_quantile_upper(double q, double shape, double rate) {
    check_probability(q, "gamma_quantile_upper");
    double hi = std::max(shape, 1.0) / rate;
    while (gamma_q(shape, rate * hi) > q) hi *= 2.0;
    // Solve the decreasing survival function as an increasing one: -Q(x) = -q.
    auto neg_sf = [=](double x) { return -gamma_q(shape, rate * x); };
    auto pdf = [=](double x) { return gamma_pdf(x, shape, rate); };
    return solve_increasing(neg_sf, pdf, -q, 0.0, hi, 0.5 * hi);
}

double student_t_logpdf(double x, double nu) noexcept {
    return lgamma_ratio(0.5 * nu, 0.5) - 0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_pdf(double x, double nu) noexcept { return std::exp(student_t_logpdf(x, nu)); }

double student_t_cdf(double x, double nu) {
    if (x <= 0.0) return t_lower_tail(x, nu);
    return 1.0 - t_lower_tail(-x, nu);
}

double student_t_quantile(double p, double nu) {
    check_probability(p, "student_t_quantile");
    if (p <= 0.5) return t_quantile_lower(p, nu);
    return -t_quantile_lower(1.0 - p, nu);
}

double t_quantile_of_normal(double z, double nu) {
    if (z <= 0.0) {
        const double p = normal_cdf(z);
        if (p <= 0.0) fail_numerical(Stage::scores, "normal score underflows the t quantile");
        return t_quantile_lower(p, nu);
    }
    const double q = normal_sf(z);
    if (q <= 0.0) fail_numerical(Stage::scores, "normal score overflows the t quantile");
    return -t_quantile_lower(q, nu);
}

double normal_score_of_t(double x, double nu) {
    if (x <= 0.0) {
        const double p = t_lower_tail(x, nu);
        if (p <= 0.0) fail_numerical(Stage::sample, "t value underflows the normal score");
        return normal_quantile(p);
    }
    const double q = t_lower_tail(-x, nu);
    if (q <= 0.0) fail_numerical(Stage::sample, "t value overflows the normal score");
    return -normal_quantile(q);
}

double bivariate_t_logpdf(double x, double y, double rho, double nu) noexcept {
    const double one_minus = 1.0 - rho * rho;
    const double quad = (x * x - 2.0 * rho * x * y + y * y) / (nu * one_minus);
    // Gamma((nu + 2) / 2) / Gamma(nu / 2) = nu / 2 cancels the nu in the normaliser.
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(one_minus) - 0.5 * (nu + 2.0) * std::log1p(quad);
}

double t_copula_logpdf(double u, double v, double rho, double nu) {
    const double x = student_t_quantile(u, nu);
    const double y = student_t_quantile(v, nu);
    return bivariate_t_logpdf(x, y, rho, nu) - student_t_logpdf(x, nu) - student_t_logpdf(y, nu);
}

}  // namespace sfm::special
