#ifndef VINEDIST_BICOP_HPP
#define VINEDIST_BICOP_HPP

/** @file
 * Parametric bivariate copulas: densities, h-functions and their inverses,
 * Kendall's tau maps, sampling and maximum-likelihood fitting.
 *
 * Conventions.  hfunc1(u, v) = C(v | u) = dC/du and hfunc2(u, v) = C(u | v).
 * Rotations turn the unrotated density c0 counter-clockwise:
 *   90: c(u,v) = c0(v, 1-u),  180: c0(1-u, 1-v),  270: c0(1-v, u).
 */

#include "core.hpp"
#include "math.hpp"
#include "rng.hpp"

#include <boost/math/tools/roots.hpp>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace vinedist {

enum class Family : std::uint8_t { Independence, Gaussian, StudentT, Clayton, Gumbel, Frank, Joe };

inline constexpr std::array<Family, 7> all_families{Family::Independence, Family::Gaussian,
                                                    Family::StudentT,     Family::Clayton,
                                                    Family::Gumbel,       Family::Frank,
                                                    Family::Joe};

inline std::string_view family_name(Family f)
{
    switch (f) {
    case Family::Independence: return "indep";
    case Family::Gaussian: return "gaussian";
    case Family::StudentT: return "t";
    case Family::Clayton: return "clayton";
    case Family::Gumbel: return "gumbel";
    case Family::Frank: return "frank";
    case Family::Joe: return "joe";
    }
    return "?";
}

inline Family family_from_name(std::string_view s)
{
    for (Family f : all_families)
        if (family_name(f) == s) return f;
    if (s == "independence") return Family::Independence;
    if (s == "student" || s == "studentt") return Family::StudentT;
    throw ParameterDomainError("unknown family '" + std::string(s) + "'");
}

/// Families whose rotations are distinct models.
inline constexpr bool is_rotatable(Family f)
{
    return f == Family::Clayton || f == Family::Gumbel || f == Family::Joe;
}

inline constexpr int family_parameter_count(Family f)
{
    return f == Family::Independence ? 0 : f == Family::StudentT ? 2 : 1;
}

enum class Which { First, Second };

namespace detail {

inline const QuadratureRule& gl64_unit()
{
    static const QuadratureRule r = gauss_legendre(64, 0.0, 1.0);
    return r;
}

// Frank: tau(theta) = 1 - 4/theta (1 - D1(theta)), D1 the first Debye function.
inline double frank_tau(double theta)
{
    const double t = std::abs(theta);
    if (t < 1e-8) return theta / 9.0;
    const auto& r = gl64_unit();
    double integral = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double s = t * r.nodes[i];
        integral += r.weights[i] * s / std::expm1(s);
    }
    const double d1 = integral;  // (1/t) int_0^t s/(e^s-1) ds, with ds = t dx
    const double tau = 1.0 - 4.0 / t * (1.0 - d1);
    return theta < 0 ? -tau : tau;
}

// Joe: tau = 1 + 4/theta int_0^1 (1-s^theta) log(1-s^theta) s^(1-theta) ds,
// integrated in x with s = 1 - (1-x)^2 to smooth the endpoint at s = 1.
inline double joe_tau(double theta)
{
    if (theta == 1.0) return 0.0;
    const auto& r = gl64_unit();
    double integral = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = r.nodes[i];
        const double s = 1.0 - (1.0 - x) * (1.0 - x);
        const double jac = 2.0 * (1.0 - x);
        const double p = std::pow(s, theta);
        double g;
        if (p == 0.0) g = -s;
        else if (p < 1e-8) g = -s * (1.0 - p) * (1.0 + 0.5 * p);
        else g = (1.0 - p) * std::log1p(-p) * s / p;
        integral += r.weights[i] * jac * g;
    }
    return 1.0 + 4.0 / theta * integral;
}

template <class F>
double invert_monotone(F&& tau_of, double target, double lo, double hi)
{
    if (target <= tau_of(lo)) return lo;
    if (target >= tau_of(hi)) return hi;
    std::uintmax_t iters = 200;
    auto g = [&](double th) { return tau_of(th) - target; };
    auto res = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(48), iters);
    return 0.5 * (res.first + res.second);
}

/// Inverse of a smooth increasing tau(theta) on [lo, hi]: cubic Hermite
/// interpolation on a dense table, then one Newton step on the exact tau.
class TauInverse {
public:
    TauInverse(double (*tau_of)(double), double lo, double hi, int n = 2048) : tau_of_(tau_of), lo_(lo), hi_(hi)
    {
        theta_.resize(n + 1);
        tau_.resize(n + 1);
        slope_.resize(n + 1);
        for (int i = 0; i <= n; ++i) {
            theta_[i] = lo + (hi - lo) * i / n;
            tau_[i] = tau_of(theta_[i]);
        }
        const double h = (hi - lo) / n;
        for (int i = 0; i <= n; ++i) {
            const double a = std::max(lo, theta_[i] - 1e-5 * h), b = std::min(hi, theta_[i] + 1e-5 * h);
            slope_[i] = (tau_of(b) - tau_of(a)) / (b - a);
        }
    }

    double operator()(double t) const
    {
        if (t <= tau_.front()) return lo_;
        if (t >= tau_.back()) return hi_;
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(tau_.begin(), tau_.end(), t) - tau_.begin()) - 1;
        const double t0 = tau_[i], t1 = tau_[i + 1], dt = t1 - t0;
        const double s = (t - t0) / dt;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        double th = h00 * theta_[i] + h10 * dt / slope_[i] + h01 * theta_[i + 1] + h11 * dt / slope_[i + 1];
        th = std::clamp(th, theta_[i], theta_[i + 1]);
        const double slope = slope_[i] + s * (slope_[i + 1] - slope_[i]);
        th -= (tau_of_(th) - t) / slope;
        return std::clamp(th, lo_, hi_);
    }

private:
    double (*tau_of_)(double);
    double lo_, hi_;
    std::vector<double> theta_, tau_, slope_;
};

inline const TauInverse& frank_inverse()
{
    static const TauInverse inv(&frank_tau, 1e-10, 35.0);
    return inv;
}

inline const TauInverse& joe_inverse()
{
    static const TauInverse inv(&joe_tau, 1.0, 30.0);
    return inv;
}

}  // namespace detail

/// Admissible parameter box of each family (rotation-free parameterization).
struct ParameterBounds {
    double lower, upper;
};

inline ParameterBounds parameter_bounds(Family f)
{
    switch (f) {
    case Family::Gaussian:
    case Family::StudentT: return {-1.0, 1.0};
    case Family::Clayton: return {0.0, 28.0};
    case Family::Gumbel: return {1.0, 17.0};
    case Family::Frank: return {-35.0, 35.0};
    case Family::Joe: return {1.0, 30.0};
    default: return {0.0, 0.0};
    }
}

/// Degrees-of-freedom range used when fitting.
inline constexpr double kNuMin = 2.0, kNuMax = 30.0;
/// Largest df accepted at construction (t copulas decomposed into vines use nu + tree - 1).
inline constexpr double kNuConstructMax = 100.0;

class BivariateCopula {
public:
    BivariateCopula() = default;

    BivariateCopula(Family family, int rotation, std::span<const double> parameters)
        : family_(family), rotation_(rotation)
    {
        if (rotation != 0 && rotation != 90 && rotation != 180 && rotation != 270)
            throw ParameterDomainError("rotation must be 0, 90, 180 or 270");
        if (rotation != 0 && !is_rotatable(family))
            throw ParameterDomainError(std::string(family_name(family)) + " copula takes no rotation");
        if (static_cast<int>(parameters.size()) != family_parameter_count(family))
            throw ParameterDomainError(std::string(family_name(family)) + " copula needs " +
                                       std::to_string(family_parameter_count(family)) + " parameter(s)");
        for (std::size_t i = 0; i < parameters.size(); ++i) par_[i] = parameters[i];
        validate();
        prepare();
    }

    BivariateCopula(Family family, int rotation, std::initializer_list<double> parameters)
        : BivariateCopula(family, rotation, std::span<const double>(parameters.begin(), parameters.size()))
    {
    }

    Family family() const { return family_; }
    int rotation() const { return rotation_; }
    std::vector<double> parameters() const
    {
        return {par_.begin(), par_.begin() + family_parameter_count(family_)};
    }
    double parameter(int i) const { return par_[i]; }
    int num_parameters() const { return family_parameter_count(family_); }
    bool is_independence() const { return family_ == Family::Independence; }

    double log_pdf(double u, double v) const
    {
        if (family_ == Family::Independence) return 0.0;
        u = clamp_unit(u);
        v = clamp_unit(v);
        switch (rotation_) {
        case 90: return base_log_pdf(v, 1.0 - u);
        case 180: return base_log_pdf(1.0 - u, 1.0 - v);
        case 270: return base_log_pdf(1.0 - v, u);
        default: return base_log_pdf(u, v);
        }
    }

    double pdf(double u, double v) const
    {
        return family_ == Family::Independence ? 1.0 : std::exp(log_pdf(u, v));
    }

    double cdf(double u, double v) const
    {
        u = clamp_unit(u);
        v = clamp_unit(v);
        switch (rotation_) {
        case 90: return v - base_cdf(v, 1.0 - u);
        case 180: return u + v - 1.0 + base_cdf(1.0 - u, 1.0 - v);
        case 270: return u - base_cdf(1.0 - v, u);
        default: return base_cdf(u, v);
        }
    }

    /// C(v | u).
    double hfunc1(double u, double v) const
    {
        if (family_ == Family::Independence) return clamp_unit(v);
        u = clamp_unit(u);
        v = clamp_unit(v);
        double h;
        switch (rotation_) {
        case 90: h = base_h(1.0 - u, v); break;
        case 180: h = 1.0 - base_h(1.0 - u, 1.0 - v); break;
        case 270: h = 1.0 - base_h(u, 1.0 - v); break;
        default: h = base_h(u, v);
        }
        return clamp_unit(h);
    }

    /// C(u | v).
    double hfunc2(double u, double v) const
    {
        if (family_ == Family::Independence) return clamp_unit(u);
        u = clamp_unit(u);
        v = clamp_unit(v);
        double h;
        switch (rotation_) {
        case 90: h = 1.0 - base_h(v, 1.0 - u); break;
        case 180: h = 1.0 - base_h(1.0 - v, 1.0 - u); break;
        case 270: h = base_h(1.0 - v, u); break;
        default: h = base_h(v, u);
        }
        return clamp_unit(h);
    }

    /// v with hfunc1(u, v) = w.
    double hinv1(double w, double u) const
    {
        if (family_ == Family::Independence) return clamp_unit(w);
        w = clamp_unit(w);
        u = clamp_unit(u);
        double v;
        switch (rotation_) {
        case 90: v = base_hinv(w, 1.0 - u); break;
        case 180: v = 1.0 - base_hinv(1.0 - w, 1.0 - u); break;
        case 270: v = 1.0 - base_hinv(1.0 - w, u); break;
        default: v = base_hinv(w, u);
        }
        return clamp_unit(v);
    }

    /// u with hfunc2(u, v) = w.
    double hinv2(double w, double v) const
    {
        if (family_ == Family::Independence) return clamp_unit(w);
        w = clamp_unit(w);
        v = clamp_unit(v);
        double u;
        switch (rotation_) {
        case 90: u = 1.0 - base_hinv(1.0 - w, v); break;
        case 180: u = 1.0 - base_hinv(1.0 - w, 1.0 - v); break;
        case 270: u = base_hinv(w, 1.0 - v); break;
        default: u = base_hinv(w, v);
        }
        return clamp_unit(u);
    }

    /// log density together with both h-functions, sharing quantile work.
    struct Evaluation {
        double log_pdf, h1, h2;
    };

    Evaluation evaluate(double u, double v) const
    {
        if (family_ == Family::Independence) return {0.0, clamp_unit(v), clamp_unit(u)};
        u = clamp_unit(u);
        v = clamp_unit(v);
        if (family_ == Family::Gaussian) {
            const double x = norm_quantile(u), y = norm_quantile(v);
            const double rho = par_[0];
            return {gauss_log_pdf(x, y), clamp_unit(norm_cdf((y - rho * x) / c_[0])),
                    clamp_unit(norm_cdf((x - rho * y) / c_[0]))};
        }
        if (family_ == Family::StudentT) {
            const double x = t_nu_.quantile(u), y = t_nu_.quantile(v);
            return {t_log_pdf(x, y), clamp_unit(t_h(x, y)), clamp_unit(t_h(y, x))};
        }
        return {log_pdf(u, v), hfunc1(u, v), hfunc2(u, v)};
    }

    double tau() const
    {
        double t = 0.0;
        switch (family_) {
        case Family::Independence: return 0.0;
        case Family::Gaussian:
        case Family::StudentT: return 2.0 / std::numbers::pi * std::asin(par_[0]);
        case Family::Clayton: t = par_[0] / (par_[0] + 2.0); break;
        case Family::Gumbel: t = 1.0 - 1.0 / par_[0]; break;
        case Family::Frank: return detail::frank_tau(par_[0]);
        case Family::Joe: t = detail::joe_tau(par_[0]); break;
        }
        return (rotation_ == 90 || rotation_ == 270) ? -t : t;
    }

    /// Same copula with the two arguments exchanged.
    BivariateCopula swapped() const
    {
        BivariateCopula c = *this;
        if (rotation_ == 90) c.rotation_ = 270;
        else if (rotation_ == 270) c.rotation_ = 90;
        return c;
    }

    /// StudentT only: log density at the t scores x = T_nu^-1(u), y = T_nu^-1(v).
    double t_log_pdf_scores(double x, double y) const { return t_log_pdf(x, y); }

    double loglik(std::span<const double> u, std::span<const double> v) const
    {
        if (family_ == Family::Independence) return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += log_pdf(u[i], v[i]);
        return s;
    }

    double loglik(const Matrix& data) const
    {
        if (family_ == Family::Independence) return 0.0;
        double s = 0.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) s += log_pdf(data(i, 0), data(i, 1));
        return s;
    }

    Matrix simulate(int n, Rng& rng) const
    {
        Matrix out(n, 2);
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform();
            const double w = rng.uniform();
            out(i, 0) = u;
            out(i, 1) = hinv1(w, u);
        }
        return out;
    }

    std::string str() const
    {
        std::ostringstream os;
        os << family_name(family_);
        if (rotation_) os << rotation_;
        if (num_parameters()) {
            os << '(';
            for (int i = 0; i < num_parameters(); ++i) os << (i ? ", " : "") << par_[i];
            os << ')';
        }
        return os.str();
    }

    friend bool operator==(const BivariateCopula& a, const BivariateCopula& b)
    {
        if (a.family_ != b.family_ || a.rotation_ != b.rotation_) return false;
        for (int i = 0; i < a.num_parameters(); ++i)
            if (a.par_[i] != b.par_[i]) return false;
        return true;
    }

private:
    void validate() const
    {
        const double p = par_[0];
        auto bad = [&](const char* what) {
            throw ParameterDomainError(std::string(family_name(family_)) + ": " + what);
        };
        switch (family_) {
        case Family::Independence: break;
        case Family::Gaussian:
            if (!(p > -1.0 && p < 1.0)) bad("rho must lie in (-1, 1)");
            break;
        case Family::StudentT:
            if (!(p > -1.0 && p < 1.0)) bad("rho must lie in (-1, 1)");
            if (!(par_[1] >= kNuMin && par_[1] <= kNuConstructMax)) bad("nu out of range");
            break;
        case Family::Clayton:
            if (!(p > 0.0 && p <= 28.0)) bad("theta must lie in (0, 28]");
            break;
        case Family::Gumbel:
            if (!(p >= 1.0 && p <= 17.0)) bad("theta must lie in [1, 17]");
            break;
        case Family::Frank:
            if (!(p >= -35.0 && p <= 35.0) || p == 0.0) bad("theta must lie in [-35, 35] \\ {0}");
            break;
        case Family::Joe:
            if (!(p >= 1.0 && p <= 30.0)) bad("theta must lie in [1, 30]");
            break;
        }
    }

    void prepare()
    {
        switch (family_) {
        case Family::Gaussian:
            c_[0] = std::sqrt(1.0 - par_[0] * par_[0]);
            c_[1] = -std::log(c_[0]);
            break;
        case Family::StudentT: {
            const double nu = par_[1], rho = par_[0];
            t_nu_ = StudentT(nu);
            t_nu1_ = StudentT(nu + 1.0);
            c_[0] = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
                    2.0 * std::lgamma(0.5 * (nu + 1.0)) - 0.5 * std::log1p(-rho * rho);
            c_[1] = 1.0 - rho * rho;
            break;
        }
        case Family::Frank: c_[0] = std::expm1(-par_[0]); break;
        default: break;
        }
    }

    // ---- unrotated family functions; u, v already clamped ----

    double gauss_log_pdf(double x, double y) const
    {
        const double r = par_[0];
        return c_[1] - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * c_[0] * c_[0]);
    }

    double t_log_pdf(double x, double y) const
    {
        const double nu = par_[1], r = par_[0];
        return c_[0] - 0.5 * (nu + 2.0) * std::log1p((x * x + y * y - 2.0 * r * x * y) / (nu * c_[1])) +
               0.5 * (nu + 1.0) * (std::log1p(x * x / nu) + std::log1p(y * y / nu));
    }

    // C(other | cond) on the t quantile scale.
    double t_h(double xc, double yo) const
    {
        const double nu = par_[1], r = par_[0];
        return t_nu1_.cdf((yo - r * xc) / std::sqrt((nu + xc * xc) * c_[1] / (nu + 1.0)));
    }

    static double log_sum_clayton(double a, double b)
    {
        // log(e^a + e^b - 1) for a, b >= 0
        const double m = std::max(a, b);
        if (m > 30.0) return m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
        return std::log1p(std::expm1(a) + std::expm1(b));
    }

    double gumbel_log_a(double lx, double ly) const
    {
        const double th = par_[0];
        const double lm = std::max(lx, ly), ln = std::min(lx, ly);
        return lm + std::log1p(std::exp(th * (ln - lm))) / th;
    }

    double joe_log_s(double lbu, double lbv) const
    {
        // log(a + b - ab), a = ubar^theta, b = vbar^theta given log(ubar), log(vbar)
        const double th = par_[0];
        const double la = th * lbu, lb = th * lbv;
        const double m = std::max(la, lb);
        return m + std::log(std::exp(la - m) + std::exp(lb - m) - std::exp(la + lb - m));
    }

    double base_log_pdf(double u, double v) const
    {
        const double th = par_[0];
        switch (family_) {
        case Family::Gaussian: return gauss_log_pdf(norm_quantile(u), norm_quantile(v));
        case Family::StudentT: return t_log_pdf(t_nu_.quantile(u), t_nu_.quantile(v));
        case Family::Clayton: {
            const double lu = std::log(u), lv = std::log(v);
            const double L = log_sum_clayton(-th * lu, -th * lv);
            return std::log1p(th) - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * L;
        }
        case Family::Gumbel: {
            const double x = -std::log(u), y = -std::log(v);
            const double lx = std::log(x), ly = std::log(y);
            const double la = gumbel_log_a(lx, ly), A = std::exp(la);
            return -A + x + y + (th - 1.0) * (lx + ly) + (1.0 - 2.0 * th) * la + std::log(A + th - 1.0);
        }
        case Family::Frank: {
            const double E = c_[0], A = std::expm1(-th * u), B = std::expm1(-th * v);
            return std::log(-th * E) - th * (u + v) - 2.0 * std::log(std::abs(E + A * B));
        }
        case Family::Joe: {
            const double lbu = std::log1p(-u), lbv = std::log1p(-v);
            const double lS = joe_log_s(lbu, lbv);
            return (1.0 / th - 2.0) * lS + (th - 1.0) * (lbu + lbv) + std::log(th - 1.0 + std::exp(lS));
        }
        default: return 0.0;
        }
    }

    // dC0(c, o)/dc = C0(o | c)
    double base_h(double c, double o) const
    {
        const double th = par_[0];
        switch (family_) {
        case Family::Gaussian: {
            const double x = norm_quantile(c), y = norm_quantile(o);
            return norm_cdf((y - th * x) / c_[0]);
        }
        case Family::StudentT: return t_h(t_nu_.quantile(c), t_nu_.quantile(o));
        case Family::Clayton: {
            const double lc = std::log(c);
            const double L = log_sum_clayton(-th * lc, -th * std::log(o));
            return std::exp((-th - 1.0) * lc - (1.0 + 1.0 / th) * L);
        }
        case Family::Gumbel: {
            const double x = -std::log(c), y = -std::log(o);
            const double lx = std::log(x);
            const double la = gumbel_log_a(lx, std::log(y));
            return std::exp(-std::exp(la) + (1.0 - th) * la + (th - 1.0) * lx + x);
        }
        case Family::Frank: {
            const double E = c_[0], A = std::expm1(-th * c), B = std::expm1(-th * o);
            return (A + 1.0) * B / (E + A * B);
        }
        case Family::Joe: {
            const double lbc = std::log1p(-c), lbo = std::log1p(-o);
            const double lS = joe_log_s(lbc, lbo);
            return std::exp((1.0 / th - 1.0) * lS + (th - 1.0) * lbc) * (-std::expm1(th * lbo));
        }
        default: return o;
        }
    }

    double base_hinv(double w, double c) const
    {
        const double th = par_[0];
        switch (family_) {
        case Family::Gaussian: {
            const double x = norm_quantile(c);
            return norm_cdf(th * x + c_[0] * norm_quantile(w));
        }
        case Family::StudentT: {
            const double nu = par_[1];
            const double x = t_nu_.quantile(c);
            const double s = std::sqrt((nu + x * x) * c_[1] / (nu + 1.0));
            return t_nu_.cdf(t_nu1_.quantile(w) * s + th * x);
        }
        case Family::Clayton: {
            const double a = -th * std::log(c);
            const double em = std::expm1(-th / (th + 1.0) * std::log(w));
            const double lem = std::log(em);
            const double T = (a + lem > 30.0) ? a + lem + std::log1p(std::exp(-a - lem))
                                              : std::log1p(std::exp(a) * em);
            return std::exp(-T / th);
        }
        case Family::Frank: {
            const double E = c_[0];
            return -std::log1p(w * E / (w + (1.0 - w) * std::exp(-th * c))) / th;
        }
        case Family::Gumbel:
        case Family::Joe: return solve_hinv(w, c);
        default: return w;
        }
    }

    // Safeguarded Newton on v -> base_h(c, v) - w; the derivative is the density.
    double solve_hinv(double w, double c) const
    {
        double lo = 0.0, hi = 1.0, v = w;
        for (int it = 0; it < 100; ++it) {
            if (hi < kClamp) return kClamp;
            if (lo > 1.0 - kClamp) return 1.0 - kClamp;
            const double f = base_h(c, v) - w;
            if (std::abs(f) < 1e-14) return v;
            if (f > 0.0) hi = v;
            else lo = v;
            const double d = std::exp(base_log_pdf(c, v));
            double vn = v - f / d;
            if (!(vn > lo && vn < hi)) vn = 0.5 * (lo + hi);
            if (std::abs(vn - v) < 1e-16) return vn;
            v = vn;
        }
        if (hi - lo < 1e-12) return 0.5 * (lo + hi);
        throw NumericalError("hinv did not converge for " + str());
    }

    double base_cdf(double u, double v) const
    {
        const double th = par_[0];
        switch (family_) {
        case Family::Independence: return u * v;
        case Family::Clayton:
            return std::exp(-log_sum_clayton(-th * std::log(u), -th * std::log(v)) / th);
        case Family::Gumbel:
            return std::exp(-std::exp(gumbel_log_a(std::log(-std::log(u)), std::log(-std::log(v)))));
        case Family::Frank: return -std::log1p(std::expm1(-th * u) * std::expm1(-th * v) / c_[0]) / th;
        case Family::Joe: return -std::expm1(joe_log_s(std::log1p(-u), std::log1p(-v)) / th);
        default: {
            // C(u, v) = int_0^u C(v | s) ds
            const auto& r = detail::gl64_unit();
            double s = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * base_h(u * r.nodes[i], v);
            return u * s;
        }
        }
    }

    Family family_{Family::Independence};
    int rotation_{0};
    std::array<double, 2> par_{0.0, 0.0};
    std::array<double, 2> c_{0.0, 0.0};
    StudentT t_nu_, t_nu1_;
};

// ---- free-function interface ----

inline double pdf(const BivariateCopula& c, double u, double v) { return c.pdf(u, v); }

inline double hfunc(const BivariateCopula& c, Which which, double u, double v)
{
    return which == Which::First ? c.hfunc1(u, v) : c.hfunc2(u, v);
}

/// Inverse of hfunc in its conditioned argument: which=First returns v with C(v|u)=w.
inline double hinv(const BivariateCopula& c, Which which, double w, double u)
{
    return which == Which::First ? c.hinv1(w, u) : c.hinv2(w, u);
}

inline double param_to_tau(const BivariateCopula& c) { return c.tau(); }

/// Largest |tau| representable by the family within its parameter bounds.
inline double max_abs_tau(Family f)
{
    switch (f) {
    case Family::Gaussian:
    case Family::StudentT: return 0.9999;
    case Family::Clayton: return 28.0 / 30.0;
    case Family::Gumbel: return 1.0 - 1.0 / 17.0;
    case Family::Frank: {
        static const double t = detail::frank_tau(35.0);
        return t;
    }
    case Family::Joe: {
        static const double t = detail::joe_tau(30.0);
        return t;
    }
    default: return 0.0;
    }
}

/**
 * Association parameter with Kendall's tau equal to `tau` (rho for the
 * elliptical families, theta otherwise).  |tau| beyond the family's range is
 * clamped to the bound.
 */
inline double tau_to_param(Family family, int rotation, double tau)
{
    if (!(tau > -1.0 && tau < 1.0)) throw ParameterDomainError("tau must lie in (-1, 1)");
    const bool negative_rot = rotation == 90 || rotation == 270;
    switch (family) {
    case Family::Independence:
        if (tau != 0.0) throw ParameterDomainError("independence copula has tau = 0");
        return 0.0;
    case Family::Gaussian:
    case Family::StudentT: {
        const double t = std::clamp(tau, -max_abs_tau(family), max_abs_tau(family));
        return std::sin(std::numbers::pi / 2.0 * t);
    }
    case Family::Frank: {
        if (tau == 0.0) throw ParameterDomainError("frank: tau = 0 needs theta = 0, which is excluded");
        const double t = std::min(std::abs(tau), max_abs_tau(family));
        const double th = detail::frank_inverse()(t);
        return tau < 0 ? -th : th;
    }
    default: break;
    }
    const double t = negative_rot ? -tau : tau;
    if (family == Family::Clayton ? !(t > 0.0) : !(t >= 0.0))
        throw ParameterDomainError(std::string(family_name(family)) + " rotation " +
                                   std::to_string(rotation) + " cannot reach tau = " + std::to_string(tau));
    const double tt = std::min(t, max_abs_tau(family));
    switch (family) {
    case Family::Clayton: return std::min(2.0 * tt / (1.0 - tt), 28.0);
    case Family::Gumbel: return std::min(1.0 / (1.0 - tt), 17.0);
    case Family::Joe: return detail::joe_inverse()(tt);
    default: return 0.0;
    }
}

/// Copula of the given family and rotation with Kendall's tau `tau`.
inline BivariateCopula copula_from_tau(Family family, int rotation, double tau, double nu = 4.0)
{
    if (family == Family::Independence) return {};
    const double p = tau_to_param(family, rotation, tau);
    if (family == Family::StudentT) return BivariateCopula(family, 0, {p, nu});
    return BivariateCopula(family, rotation, {p});
}

/// Fit result with diagnostics.
struct PairFit {
    BivariateCopula copula;
    double loglik = 0.0;
    bool at_boundary = false;
};

namespace detail {

inline double pair_tau(std::span<const double> u, std::span<const double> v) { return kendall_tau(u, v); }

inline double loglik_of(Family f, int rot, double th, double nu, std::span<const double> u,
                        std::span<const double> v)
{
    try {
        BivariateCopula c = f == Family::StudentT ? BivariateCopula(f, 0, {th, nu}) : BivariateCopula(f, rot, {th});
        const double ll = c.loglik(u, v);
        return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    } catch (const ParameterDomainError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

/// t_nu quantiles as a function of the normal score z = Phi^-1(u): cubic
/// Hermite interpolation for |z| < 3.5, exact quantiles beyond.
class TQuantileTable {
public:
    explicit TQuantileTable(double nu) : t_(nu)
    {
        for (int k = 0; k <= kNodes; ++k) {
            const double z = k * kStep;
            x_[k] = k == 0 ? 0.0 : -t_.quantile(norm_cdf(-z));
            dx_[k] = norm_pdf(z) / t_.pdf(x_[k]);
        }
    }

    double operator()(double z, double u) const
    {
        const double a = std::abs(z);
        if (a >= kZmax) return t_.quantile(u);
        const int k = std::min(static_cast<int>(a / kStep), kNodes - 1);
        const double s = (a - k * kStep) / kStep, s2 = s * s, s3 = s2 * s;
        const double x = (2 * s3 - 3 * s2 + 1) * x_[k] + (s3 - 2 * s2 + s) * kStep * dx_[k] +
                         (-2 * s3 + 3 * s2) * x_[k + 1] + (s3 - s2) * kStep * dx_[k + 1];
        return z < 0.0 ? -x : x;
    }

private:
    static constexpr int kNodes = 160;
    static constexpr double kZmax = 3.5, kStep = kZmax / kNodes;
    StudentT t_;
    std::array<double, kNodes + 1> x_, dx_;
};

/// Clamped pair data with normal scores, reused across the nu profile.
struct TScores {
    std::vector<double> u, v, zu, zv;
    TScores(std::span<const double> a, std::span<const double> b) : u(a.size()), v(a.size()), zu(a.size()), zv(a.size())
    {
        for (std::size_t i = 0; i < a.size(); ++i) {
            u[i] = clamp_unit(a[i]);
            v[i] = clamp_unit(b[i]);
            zu[i] = norm_quantile(u[i]);
            zv[i] = norm_quantile(v[i]);
        }
    }
};

inline double t_profile_loglik(double rho, double nu, const TScores& sc)
{
    const BivariateCopula c(Family::StudentT, 0, {rho, nu});
    const TQuantileTable q(nu);
    double s = 0.0;
    for (std::size_t i = 0; i < sc.u.size(); ++i) s += c.t_log_pdf_scores(q(sc.zu[i], sc.u[i]), q(sc.zv[i], sc.v[i]));
    return std::isfinite(s) ? s : -std::numeric_limits<double>::infinity();
}

// parameter range used by the optimizer (rotation-free parameterization)
inline ParameterBounds fit_bounds(Family f)
{
    switch (f) {
    case Family::Gaussian:
    case Family::StudentT: return {-0.9999, 0.9999};
    case Family::Clayton: return {1e-6, 28.0};
    default: return parameter_bounds(f);
    }
}

}  // namespace detail

/**
 * Maximum-likelihood fit of one family/rotation.  One-parameter families use
 * Brent's method on a window around the tau-inversion seed (widened to the
 * full range if the optimum sits on the window edge); StudentT fixes rho by
 * tau inversion and profiles nu on [2, 30].  `tau_hat` may pass a
 * precomputed empirical tau.
 */
inline PairFit fit_pair(std::span<const double> u, std::span<const double> v, Family family, int rotation = 0,
                        std::optional<double> tau_hat = std::nullopt)
{
    if (u.size() < 20) throw DataError("pair-copula fit needs at least 20 observations");
    if (family == Family::Independence) return {BivariateCopula(), 0.0, false};
    if (rotation != 0 && !is_rotatable(family))
        throw ParameterDomainError(std::string(family_name(family)) + " copula takes no rotation");
    const double tau = tau_hat ? *tau_hat : kendall_tau(u, v);
    const auto b = detail::fit_bounds(family);

    if (family == Family::StudentT) {
        const double rho = std::clamp(std::sin(std::numbers::pi / 2.0 * tau), b.lower, b.upper);
        const detail::TScores sc(u, v);
        auto nll = [&](double nu) { return -detail::t_profile_loglik(rho, nu, sc); };
        auto [nu, f] = minimize_scalar(nll, kNuMin, kNuMax, 20);
        const bool edge = nu - kNuMin < 1e-3 || kNuMax - nu < 1e-3;
        return {BivariateCopula(family, 0, {rho, nu}), -f, edge};
    }

    const bool negative_rot = rotation == 90 || rotation == 270;
    const double sgn = negative_rot ? -1.0 : 1.0;
    // seed in the unrotated parameterization
    double seed_tau = sgn * tau;
    const double tmax = max_abs_tau(family);
    const bool symmetric = family == Family::Gaussian || family == Family::Frank;
    if (symmetric) seed_tau = std::clamp(seed_tau, -tmax, tmax);
    else seed_tau = std::clamp(seed_tau, 1e-4, tmax);
    if (family == Family::Frank && std::abs(seed_tau) < 1e-4) seed_tau = seed_tau < 0 ? -1e-4 : 1e-4;
    const double seed = std::clamp(tau_to_param(family, 0, seed_tau), b.lower, b.upper);

    auto nll = [&](double th) {
        if (family == Family::Frank && std::abs(th) < 1e-12) return 0.0;
        return -detail::loglik_of(family, rotation, th, 0.0, u, v);
    };
    auto param_at = [&](double t) {
        t = symmetric ? std::clamp(t, -tmax, tmax) : std::clamp(t, 1e-4, tmax);
        if (family == Family::Frank && std::abs(t) < 1e-6) t = t < 0 ? -1e-6 : 1e-6;
        return std::clamp(tau_to_param(family, 0, t), b.lower, b.upper);
    };
    double lo = param_at(seed_tau - 0.15), hi = param_at(seed_tau + 0.15);
    if (!symmetric && seed_tau - 0.15 <= 1e-4) lo = b.lower;
    if (seed_tau + 0.15 >= tmax) hi = b.upper;
    auto [th, f] = minimize_scalar(nll, lo, hi);
    const double span = hi - lo;
    if ((th - lo < 1e-4 * span && lo > b.lower) || (hi - th < 1e-4 * span && hi < b.upper)) {
        auto full = minimize_scalar(nll, b.lower, b.upper);
        if (full.second < f) std::tie(th, f) = full;
    }
    const double f_seed = nll(seed);
    if (f_seed < f) {
        th = seed;
        f = f_seed;
    }
    if (family == Family::Frank && std::abs(th) < 1e-12) th = 1e-12;
    const double range = b.upper - b.lower;
    const bool edge = th - b.lower < 1e-5 * range || b.upper - th < 1e-5 * range;
    return {BivariateCopula(family, rotation, {th}), -f, edge};
}

inline PairFit fit_pair(const Matrix& data, Family family, int rotation = 0)
{
    if (data.cols() != 2) throw DimensionError("pair-copula data must have two columns");
    check_copula_data(data, 20);
    const Vector a = data.col(0), b = data.col(1);
    return fit_pair(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()),
                    family, rotation);
}

inline BivariateCopula fit_mle(const Matrix& data, Family family, int rotation = 0)
{
    return fit_pair(data, family, rotation).copula;
}

/// Admissible rotations of a family for the sign of tau.
inline std::vector<int> admissible_rotations(Family f, double tau)
{
    if (!is_rotatable(f)) return {0};
    return tau >= 0.0 ? std::vector<int>{0, 180} : std::vector<int>{90, 270};
}

inline double aic(double loglik, int k) { return -2.0 * loglik + 2.0 * k; }

/// AIC-minimal family over `familyset` plus Independence.
inline PairFit select_pair(std::span<const double> u, std::span<const double> v, std::span<const Family> familyset,
                           std::optional<double> tau_hat = std::nullopt)
{
    const double tau = tau_hat ? *tau_hat : kendall_tau(u, v);
    PairFit best{BivariateCopula(), 0.0, false};
    double best_aic = 0.0;
    for (Family f : familyset) {
        if (f == Family::Independence) continue;
        for (int rot : admissible_rotations(f, tau)) {
            PairFit fit = fit_pair(u, v, f, rot, tau);
            const double a = aic(fit.loglik, fit.copula.num_parameters());
            if (a < best_aic) {
                best_aic = a;
                best = fit;
            }
        }
    }
    return best;
}

inline BivariateCopula select_family(const Matrix& data, std::span<const Family> familyset)
{
    if (data.cols() != 2) throw DimensionError("pair-copula data must have two columns");
    check_copula_data(data, 20);
    const Vector a = data.col(0), b = data.col(1);
    return select_pair(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()),
                       familyset)
        .copula;
}

inline Matrix sample(const BivariateCopula& c, int n, Rng& rng) { return c.simulate(n, rng); }

}  // namespace vinedist

#endif
