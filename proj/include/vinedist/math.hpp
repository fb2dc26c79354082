#ifndef VINEDIST_MATH_HPP
#define VINEDIST_MATH_HPP

/** @file
 * Numerical helpers: Gauss-Legendre rules, normal and Student-t special
 * functions, Kendall's tau, and small optimizers.
 */

#include "core.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace vinedist {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

inline QuadratureRule gauss_legendre(int n)
{
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return rule;
}

/// Rule mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a, double b)
{
    QuadratureRule r = gauss_legendre(n);
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.nodes[i] = c + h * r.nodes[i];
        r.weights[i] *= h;
    }
    return r;
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

inline double norm_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_quantile(double p)
{
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/**
 * Quadrature on (0,1) in normal scores: u = Phi(z), z on a symmetric
 * interval cut at probability `tail`, Gauss-Legendre in z.  Weights include
 * the Jacobian phi(z), so sum_i w_i f(u_i) approximates int_0^1 f(u) du.
 * Integrands with copula-type boundary behavior converge far faster than
 * with Gauss-Legendre directly in u.
 */
inline QuadratureRule normal_score_rule(int n, double tail = 1e-10)
{
    const double zmax = -norm_quantile(tail);
    QuadratureRule r = gauss_legendre(n, -zmax, zmax);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.weights[i] *= norm_pdf(r.nodes[i]);
        r.nodes[i] = norm_cdf(r.nodes[i]);
    }
    return r;
}

/// Student-t distribution with real degrees of freedom nu > 0.
class StudentT {
public:
    StudentT() : StudentT(4.0) {}
    explicit StudentT(double nu) : nu_(nu)
    {
        const double a = 0.5 * nu;
        log_beta_ = std::lgamma(a) + std::lgamma(0.5) - std::lgamma(a + 0.5);
        log_norm_ = std::lgamma(a + 0.5) - std::lgamma(a) - 0.5 * std::log(nu * std::numbers::pi);
    }

    double nu() const { return nu_; }

    double log_pdf(double x) const
    {
        return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_);
    }
    double pdf(double x) const { return std::exp(log_pdf(x)); }

    double cdf(double x) const
    {
        if (x == 0.0) return 0.5;
        const double x2 = x * x;
        const double z = nu_ / (nu_ + x2);
        const double zc = x2 / (nu_ + x2);
        const double tail = 0.5 * ibeta(0.5 * nu_, 0.5, z, zc);  // P(T > |x|)
        return x > 0.0 ? 1.0 - tail : tail;
    }

    double quantile(double p) const
    {
        if (p == 0.5) return 0.0;
        if (p > 0.5) return -lower_quantile(1.0 - p);
        return lower_quantile(p);
    }

private:
    // Regularized incomplete beta I_z(a, b) with zc = 1 - z given separately.
    double ibeta(double a, double b, double z, double zc) const
    {
        if (z <= 0.0) return 0.0;
        if (zc <= 0.0) return 1.0;
        const double front = std::exp(a * std::log(z) + b * std::log(zc) - log_beta_);
        if (z < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, z) / a;
        return 1.0 - front * betacf(b, a, zc) / b;
    }

    static double betacf(double a, double b, double x)
    {
        constexpr double tiny = 1e-300, eps = 1e-16;
        const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
        double c = 1.0, d = 1.0 - qab * x / qap;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 500; ++m) {
            const int m2 = 2 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < eps) break;
        }
        return h;
    }

    // p < 0.5: Hill's (1970) approximation refined by Newton steps.
    double lower_quantile(double p) const
    {
        const double n = nu_;
        const double P = 2.0 * p;
        double q;
        if (std::abs(n - 2.0) < 1e-12) {
            q = std::sqrt(2.0 / (P * (2.0 - P)) - 2.0);
        } else {
            const double a = 1.0 / (n - 0.5);
            const double b = 48.0 / (a * a);
            double c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
            const double d = ((94.5 / (b + c) - 3.0) / b + 1.0) * std::sqrt(a * std::numbers::pi / 2.0) * n;
            double y = std::pow(d * P, 2.0 / n);
            if (y > 0.05 + a) {
                const double x = norm_quantile(0.5 * P);
                y = x * x;
                if (n < 5.0) c += 0.3 * (n - 4.5) * (x + 0.6);
                c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
                y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
                y = a * y * y;
                y = y > 0.002 ? std::expm1(y) : 0.5 * y * y + y;
            } else {
                y = ((1.0 / (((n + 6.0) / (n * y) - 0.089 * d - 0.822) * (n + 2.0) * 3.0) +
                      0.5 / (n + 4.0)) * y - 1.0) * (n + 1.0) / (n + 2.0) + 1.0 / y;
            }
            q = std::sqrt(n * y);
        }
        double x = -q;
        for (int it = 0; it < 20; ++it) {
            const double f = cdf(x) - p;
            const double step = f / pdf(x);
            double xn = x - step;
            if (xn >= 0.0) xn = 0.5 * x;
            const double dx = xn - x;
            x = xn;
            if (std::abs(dx) <= 1e-14 * std::abs(x)) break;
        }
        return x;
    }

    double nu_;
    double log_beta_;
    double log_norm_;
};

/**
 * Kendall's tau-b in O(N log N) (Knight's merge-sort algorithm).
 * Throws DataError if either input is constant.
 */
inline double kendall_tau(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    if (n != y.size()) throw DataError("kendall_tau: length mismatch");
    if (n < 2) throw DataError("kendall_tau: need at least two observations");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];

    using u64 = std::uint64_t;
    u64 tied_x = 0, tied_xy = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        const u64 t = j - i;
        tied_x += t * (t - 1) / 2;
        for (std::size_t k = i; k < j;) {
            std::size_t l = k + 1;
            while (l < j && ys[l] == ys[k]) ++l;
            const u64 s = l - k;
            tied_xy += s * (s - 1) / 2;
            k = l;
        }
        i = j;
    }

    u64 swaps = 0;
    std::vector<double> buf(n);
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (ys[j] < ys[i]) {
                    swaps += mid - i;
                    buf[k++] = ys[j++];
                } else {
                    buf[k++] = ys[i++];
                }
            }
            while (i < mid) buf[k++] = ys[i++];
            while (j < hi) buf[k++] = ys[j++];
        }
        std::swap(ys, buf);
    }

    u64 tied_y = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && ys[j] == ys[i]) ++j;
        const u64 t = j - i;
        tied_y += t * (t - 1) / 2;
        i = j;
    }

    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double dx = n0 - static_cast<double>(tied_x), dy = n0 - static_cast<double>(tied_y);
    if (dx <= 0.0 || dy <= 0.0) throw DataError("kendall_tau: constant column");
    const double s = n0 - static_cast<double>(tied_x) - static_cast<double>(tied_y) +
                     static_cast<double>(tied_xy) - 2.0 * static_cast<double>(swaps);
    return std::clamp(s / std::sqrt(dx * dy), -1.0, 1.0);
}

/// Brent minimization on [lo, hi]; returns (argmin, min).
template <class F>
std::pair<double, double> minimize_scalar(F&& f, double lo, double hi, int bits = 26,
                                          std::uintmax_t max_iter = 200)
{
    return boost::math::tools::brent_find_minima(f, lo, hi, bits, max_iter);
}

struct NelderMeadResult {
    std::vector<double> x;
    double value;
    int evaluations;
};

namespace detail {
inline NelderMeadResult nelder_mead_once(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x0, const std::vector<double>& lower,
                                         const std::vector<double>& upper, double step, double ftol,
                                         int max_eval)
{
    const std::size_t n = x0.size();
    auto project = [&](std::vector<double>& p) {
        for (std::size_t i = 0; i < n; ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
    };
    project(x0);
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    int evals = 0;
    auto eval = [&](const std::vector<double>& p) {
        ++evals;
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };
    fv[0] = eval(simplex[0]);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = simplex[i + 1];
        p[i] += (p[i] + step <= upper[i]) ? step : -step;
        project(p);
        fv[i + 1] = eval(p);
    }
    std::vector<std::size_t> order(n + 1);
    while (evals < max_eval) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return fv[a] < fv[b] || (fv[a] == fv[b] && a < b);
        });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= ftol * (std::abs(fv[best]) + 1e-12)) {
            double spread = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                spread = std::max(spread, std::abs(simplex[worst][i] - simplex[best][i]));
            if (spread < 1e-7) break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k <= n; ++k)
            if (k != worst)
                for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / n;
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (simplex[worst][i] - centroid[i]);
            project(p);
            return p;
        };
        auto xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            auto xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = xr;
            fv[worst] = fr;
        } else {
            auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, fv[worst])) {
                simplex[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (std::size_t i = 0; i < n; ++i)
                        simplex[k][i] = simplex[best][i] + 0.5 * (simplex[k][i] - simplex[best][i]);
                    fv[k] = eval(simplex[k]);
                }
            }
        }
    }
    const std::size_t best =
        static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    return {simplex[best], fv[best], evals};
}
}  // namespace detail

/**
 * Nelder-Mead minimization with trial points projected onto the box
 * [lower, upper].  Restarts from the best point (projection can flatten the
 * simplex against a bound) until a restart no longer improves.
 */
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const std::vector<double>& lower,
                                    const std::vector<double>& upper, double step = 0.1,
                                    double ftol = 1e-10, int max_eval = 1000)
{
    auto res = detail::nelder_mead_once(f, std::move(x0), lower, upper, step, ftol, max_eval);
    int total = res.evaluations;
    for (int restart = 0; restart < 4 && total < max_eval; ++restart) {
        auto next = detail::nelder_mead_once(f, res.x, lower, upper, step * 0.5, ftol, max_eval - total);
        total += next.evaluations;
        const bool improved = next.value < res.value - ftol * (std::abs(res.value) + 1e-12);
        if (next.value < res.value) res = next;
        if (!improved) break;
    }
    res.evaluations = total;
    return res;
}

}  // namespace vinedist

#endif
