#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

namespace sptree {

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

namespace num {

using cplx = std::complex<double>;

// Adaptive Gauss-Kronrod on [a,b]; b may be +inf.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10, unsigned depth = 18) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, depth, tol, &err);
    if (!std::isfinite(v)) throw NumericError("quadrature returned a non-finite value");
    return v;
}

// Same, but split at interior breakpoints (kinks, jumps of the integrand).
template <class F>
double integrate_split(F&& f, std::vector<double> pts, double tol = 1e-10) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] > pts[i]) s += integrate(f, pts[i], pts[i + 1], tol);
    }
    return s;
}

// integral over (a,b) of a function with an integrable power singularity at a:
// substitute x = a + (b-a) s^p.
template <class F>
double integrate_singular_left(F&& f, double a, double b, double p = 4.0, double tol = 1e-10) {
    if (!(b > a)) return 0.0;
    double L = b - a;
    auto g = [&](double s) {
        if (s <= 0.0) return 0.0;
        double x = a + L * std::pow(s, p);
        return f(x) * L * p * std::pow(s, p - 1.0);
    };
    return integrate(g, 0.0, 1.0, tol);
}

// Fixed Talbot contour (Abate-Valko). Fs must be analytic right of all its singularities,
// which must lie in Re s <= 0.
template <class Fs>
double talbot(Fs&& F, double t, int M = 32) {
    if (!(t > 0.0)) throw DomainError("talbot: t must be positive");
    const double r = 2.0 * M / (5.0 * t);
    cplx sum = 0.5 * F(cplx(r, 0.0)) * std::exp(r * t);
    for (int k = 1; k < M; ++k) {
        double th = k * kPi / M;
        double cot = std::cos(th) / std::sin(th);
        cplx delta(r * th * cot, r * th);
        double sigma = th + (th * cot - 1.0) * cot;
        sum += std::exp(t * delta) * F(delta) * cplx(1.0, sigma);
    }
    return (r / M) * sum.real();
}

// Euler algorithm on the Bromwich line (Abate-Whitt). Only evaluates F for Re s > 0.
template <class Fs>
double euler_inversion(Fs&& F, double t, int n = 38, int m = 11, double A = 18.4) {
    if (!(t > 0.0)) throw DomainError("euler_inversion: t must be positive");
    const double a = A / (2.0 * t);
    const double h = kPi / t;
    std::vector<double> partial(n + m + 1);
    double s = 0.5 * F(cplx(a, 0.0)).real();
    partial[0] = s;
    for (int k = 1; k <= n + m; ++k) {
        double term = F(cplx(a, k * h)).real();
        s += (k % 2 ? -term : term);
        partial[k] = s;
    }
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) acc += boost::math::binomial_coefficient<double>(m, k) * partial[n + k];
    acc /= std::ldexp(1.0, m);
    return std::exp(A / 2.0) / t * acc;
}

template <class F>
double solve_bracketed(F&& f, double lo, double hi, double rel_tol = 1e-13) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw NumericError("solve_bracketed: root not bracketed");
    std::uintmax_t it = 200;
    auto tol = [rel_tol](double x, double y) { return std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y)); };
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
    return 0.5 * (r.first + r.second);
}

template <class F>
std::pair<double, double> minimize(F&& f, double lo, double hi) {
    auto r = boost::math::tools::brent_find_minima(f, lo, hi, 52);
    return {r.first, r.second};
}

// Upper incomplete gamma for s in (-2,0) via two downward recurrences.
inline double upper_gamma_neg(double s, double x) {
    // Gamma(s,x) = (Gamma(s+1,x) - x^s e^{-x}) / s
    double s2 = s + 2.0;
    double g2 = boost::math::tgamma(s2, x);
    double g1 = (g2 - std::pow(x, s + 1.0) * std::exp(-x)) / (s + 1.0);
    return (g1 - std::pow(x, s) * std::exp(-x)) / s;
}

inline double log_poisson_pmf(int k, double mean) {
    if (mean <= 0.0) return k == 0 ? 0.0 : -kInf;
    return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}
inline double poisson_pmf(int k, double mean) { return std::exp(log_poisson_pmf(k, mean)); }

// Piecewise-linear tabulated CDF over a grid, used to sample from evaluated densities.
struct TabulatedCdf {
    std::vector<double> x, cdf;
    double total = 0.0;

    template <class F>
    static TabulatedCdf build(F&& dens, std::vector<double> grid) {
        TabulatedCdf t;
        t.x = std::move(grid);
        t.cdf.assign(t.x.size(), 0.0);
        double prev = dens(t.x[0]);
        for (std::size_t i = 1; i < t.x.size(); ++i) {
            double cur = dens(t.x[i]);
            t.cdf[i] = t.cdf[i - 1] + 0.5 * (prev + cur) * (t.x[i] - t.x[i - 1]);
            prev = cur;
        }
        t.total = t.cdf.back();
        return t;
    }
    double invert(double u) const {
        double target = u * total;
        auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
        std::size_t i = static_cast<std::size_t>(it - cdf.begin());
        if (i == 0) return x.front();
        if (i >= cdf.size()) return x.back();
        double w = cdf[i] - cdf[i - 1];
        double f = w > 0 ? (target - cdf[i - 1]) / w : 0.5;
        return x[i - 1] + f * (x[i] - x[i - 1]);
    }
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}
inline std::vector<double> geomspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    double la = std::log(a), lb = std::log(b);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1));
    v.front() = a;
    v.back() = b;
    return v;
}

}  // namespace num
}  // namespace sptree
