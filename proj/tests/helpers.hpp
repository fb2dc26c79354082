#ifndef VINEDIST_TEST_HELPERS_HPP
#define VINEDIST_TEST_HELPERS_HPP

#include "vinedist/rvine.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <set>

namespace testutil {

using namespace vinedist;

/// Random pair-copula with |tau| in [0.1, max_tau].
inline BivariateCopula random_copula(Rng& rng, const std::vector<Family>& fams, double max_tau = 0.6)
{
    const Family f = fams[static_cast<std::size_t>(rng.uniform() * fams.size())];
    if (f == Family::Independence) return {};
    double tau = 0.1 + (max_tau - 0.1) * rng.uniform();
    if (rng.uniform() < 0.5) tau = -tau;
    const auto rots = admissible_rotations(f, tau);
    const int rot = rots[static_cast<std::size_t>(rng.uniform() * rots.size())];
    return copula_from_tau(f, rot, tau, 3.0 + 7.0 * rng.uniform());
}

inline const std::vector<Family>& zoo()
{
    static const std::vector<Family> z{Family::Gaussian, Family::StudentT, Family::Clayton,
                                       Family::Gumbel,   Family::Frank,    Family::Joe};
    return z;
}

inline RVineModel random_model(int d, Rng& rng, const std::vector<Family>& fams = zoo(), double max_tau = 0.6)
{
    RVineStructure s = random_structure(d, rng);
    std::vector<BivariateCopula> cops(d * d);
    for (int j = 0; j < d - 1; ++j)
        for (int i = j + 1; i < d; ++i) cops[j * d + i] = random_copula(rng, fams, max_tau);
    return RVineModel(s, cops);
}

inline double boost_qnorm(double u) { return boost::math::quantile(boost::math::normal(), u); }

/// Closed-form Gaussian copula density.
inline double gaussian_copula_density(const Matrix& r, const std::vector<double>& u)
{
    const int d = static_cast<int>(u.size());
    Vector x(d);
    for (int i = 0; i < d; ++i) x[i] = boost_qnorm(u[i]);
    const Matrix ri = r.inverse() - Matrix::Identity(d, d);
    return std::exp(-0.5 * x.dot(ri * x)) / std::sqrt(r.determinant());
}

/// Closed-form t copula density.
inline double t_copula_density(const Matrix& r, double nu, const std::vector<double>& u)
{
    const int d = static_cast<int>(u.size());
    boost::math::students_t t(nu);
    Vector x(d);
    double marg = 0.0;
    for (int i = 0; i < d; ++i) {
        x[i] = boost::math::quantile(t, u[i]);
        marg += -(nu + 1) / 2 * std::log1p(x[i] * x[i] / nu);
    }
    const double q = x.dot(r.inverse() * x);
    const double lc = std::lgamma((nu + d) / 2) + (d - 1) * std::lgamma(nu / 2) - d * std::lgamma((nu + 1) / 2) -
                      0.5 * std::log(r.determinant());
    return std::exp(lc - (nu + d) / 2 * std::log1p(q / nu) - marg);
}

/// Edge-set recursion for the vine density, independent of the matrix source tables.
struct BruteForceVine {
    struct Edge {
        int a, b;
        std::set<int> cond;
        BivariateCopula c;
    };
    std::vector<Edge> edges;

    explicit BruteForceVine(const RVineModel& m)
    {
        const auto& s = m.structure();
        const int d = s.dim();
        for (int j = 0; j < d - 1; ++j)
            for (int i = j + 1; i < d; ++i) {
                auto cv = s.conditioning(j, i);
                edges.push_back({s.diagonal(j), s(i, j), std::set<int>(cv.begin(), cv.end()), m.at(j, i)});
            }
    }

    double cond_cdf(int x, const std::set<int>& cond, const std::vector<double>& u) const
    {
        if (cond.empty()) return u[x];
        for (const auto& e : edges) {
            if (e.cond.size() + 1 != cond.size()) continue;
            int y = -1;
            if (e.a == x) y = e.b;
            else if (e.b == x) y = e.a;
            if (y < 0 || !cond.count(y)) continue;
            std::set<int> rest = cond;
            rest.erase(y);
            if (rest != e.cond) continue;
            const double fx = cond_cdf(x, rest, u), fy = cond_cdf(y, rest, u);
            return e.a == x ? e.c.hfunc2(fx, fy) : e.c.hfunc1(fy, fx);
        }
        throw std::logic_error("edge not found");
    }

    double log_density(const std::vector<double>& u) const
    {
        double s = 0.0;
        for (const auto& e : edges) s += e.c.log_pdf(cond_cdf(e.a, e.cond, u), cond_cdf(e.b, e.cond, u));
        return s;
    }
};

/// Spearman rank correlation (no ties expected).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    auto ranks = [](const std::vector<double>& v) {
        std::vector<int> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * s / (n * (n * n - 1.0));
}

/// KL between bivariate Gaussian copulas with correlations rf and rg.
inline double gaussian_kl(double rf, double rg)
{
    return 0.5 * (std::log((1 - rg * rg) / (1 - rf * rf)) + (2 - 2 * rf * rg) / (1 - rg * rg) - 2);
}

}  // namespace testutil

#endif
