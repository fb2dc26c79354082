#ifndef VINEDIST_BOOTTEST_HPP
#define VINEDIST_BOOTTEST_HPP

/** @file
 * Parametric bootstrap test of a model class C^f against a larger class C^g
 * containing it.  Both classes are fitted to the data and the distance d0
 * between the fits is compared with the distances obtained when data are
 * simulated from the C^f fit and both classes are refitted.
 */

#include "distance.hpp"
#include "fit.hpp"
#include "nonsimplified.hpp"
#include "parallel.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <utility>

namespace vinedist {

struct BootstrapConfig {
    int M = 100;
    double alpha = 0.05;
    double beta = 0.01;
    std::uint64_t seed = 0;
    bool auto_m = false;  // double M up to max_m until the decision is adequate
    int max_m = 800;
};

struct BootstrapTestResult {
    double d0 = 0.0;
    std::vector<double> boot_distances;  // sorted, successful replicates only
    double ci_upper = 0.0;
    double p_value = 1.0;
    bool reject = false;
    int M = 0;
    double alpha = 0.05;
    double beta = 0.01;
    int N = 0;
    std::uint64_t seed = 0;
    bool m_adequate = false;
    int failed = 0;
};

/// Index (0-based) of the ceil(M (1 - alpha))-th order statistic.
inline int order_statistic_index(int M, double alpha)
{
    const int k = static_cast<int>(std::ceil(M * (1.0 - alpha) - 1e-9));
    return std::clamp(k, 1, M) - 1;
}

/**
 * True iff d0 lies outside a 100(1-beta)% distribution-free confidence
 * interval for the (1-alpha) quantile, built from order statistics of the
 * sorted bootstrap distances with binomial ranks.
 */
inline bool adequacy_check(const std::vector<double>& boot_sorted, double d0, double alpha = 0.05,
                           double beta = 0.01)
{
    const int M = static_cast<int>(boot_sorted.size());
    if (M == 0) return false;
    boost::math::binomial_distribution<double> bin(M, 1.0 - alpha);
    // largest l with P(B < l) <= beta/2, smallest u with P(B >= u) <= beta/2
    int l = 0;
    while (l < M && boost::math::cdf(bin, l) <= beta / 2) ++l;
    int u = M;
    while (u > 0 && boost::math::cdf(boost::math::complement(bin, u - 1)) <= beta / 2) --u;
    ++u;
    const double lo = boot_sorted[std::clamp(l, 1, M) - 1];
    const double hi = boot_sorted[std::clamp(u, 1, M) - 1];
    return d0 < lo || d0 > hi;
}

/// Fills the summary fields from d0 and the raw replicate distances (in replicate order).
inline void summarize(BootstrapTestResult& r, std::vector<double> raw)
{
    for (std::size_t j = 0; j < raw.size(); ++j) raw[j] += 1e-15 * static_cast<double>(j + 1);
    std::sort(raw.begin(), raw.end());
    r.boot_distances = std::move(raw);
    r.M = static_cast<int>(r.boot_distances.size());
    if (r.M == 0) throw NumericalError("no successful bootstrap replicate");
    r.ci_upper = r.boot_distances[order_statistic_index(r.M, r.alpha)];
    int ge = 0;
    for (double v : r.boot_distances) ge += v >= r.d0;
    r.p_value = (1.0 + ge) / (r.M + 1.0);
    r.reject = r.d0 > r.ci_upper;
    r.m_adequate = adequacy_check(r.boot_distances, r.d0, r.alpha, r.beta);
}

/**
 * Generic test.  `fit_both(x)` returns the pair (fit in C^f, fit in C^g);
 * `dist(f, g)` the distance between them; the C^f model must provide
 * sample(n, rng).  A replicate whose fit throws is redrawn once from a
 * second stream; more than 5% failed replicates abort the test.
 */
template <class FitBoth, class Dist>
BootstrapTestResult bootstrap_test(const Matrix& data, FitBoth&& fit_both, Dist&& dist, const BootstrapConfig& cfg = {})
{
    if (cfg.M < 1) throw ModelError("M must be positive");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ModelError("alpha must lie in (0, 1)");
    BootstrapTestResult r;
    r.alpha = cfg.alpha;
    r.beta = cfg.beta;
    r.N = static_cast<int>(data.rows());
    r.seed = cfg.seed;
    const auto fits = fit_both(data);
    const auto& f0 = fits.first;
    r.d0 = dist(fits.first, fits.second);

    std::vector<double> raw;
    std::vector<char> ok;
    int target = cfg.M;
    while (true) {
        const int have = static_cast<int>(raw.size());
        raw.resize(target, 0.0);
        ok.resize(target, 0);
        parallel_for(target - have, [&](int t) {
            const int j = have + t;
            for (int attempt = 0; attempt < 2 && !ok[j]; ++attempt) {
                Rng rng = Rng::stream(cfg.seed, attempt == 0 ? "boot" : "boot-retry", static_cast<std::uint64_t>(j));
                try {
                    const Matrix x = f0.sample(r.N, rng);
                    const auto fj = fit_both(x);
                    raw[j] = dist(fj.first, fj.second);
                    ok[j] = 1;
                } catch (const std::exception&) {
                }
            }
        });
        std::vector<double> good;
        int failed = 0;
        for (int j = 0; j < target; ++j) {
            if (ok[j]) good.push_back(raw[j]);
            else ++failed;
        }
        r.failed = failed;
        if (failed > 0.05 * target)
            throw NumericalError(std::to_string(failed) + " of " + std::to_string(target) +
                                 " bootstrap replicates failed to fit (limit 5%)");
        summarize(r, good);
        if (!cfg.auto_m || r.m_adequate || target * 2 > cfg.max_m) break;
        target *= 2;
    }
    return r;
}

/// Distance used by the tests: dkl below d = 10, sdkl from 10 on.
struct DefaultDistance {
    template <class F, class G>
    double operator()(const F& f, const G& g) const
    {
        return default_distance(f, g).value;
    }
};

struct SimplifyingOptions {
    std::vector<Family> familyset = default_familyset();
    /// Structure and families to hold fixed; defaults to the fit of the observed data.
    std::optional<RVineModel> fixed;
    /// Re-select structure and families in every refit instead of holding them fixed.
    bool reselect = false;
};

/// H0: the data come from a simplified vine; H1: a non-simplified vine with linear-tau edges.
inline BootstrapTestResult test_simplifying(const Matrix& data, const BootstrapConfig& cfg = {},
                                            const SimplifyingOptions& opt = {})
{
    const int d = static_cast<int>(data.cols());
    if (d < 3) throw DimensionError("the simplifying test needs d >= 3 (no conditional edge below)");
    detail::check_fit_data(data);
    FitConfig fc;
    fc.familyset = opt.familyset;
    std::optional<RVineModel> tmpl = opt.fixed;
    if (!opt.reselect && !tmpl) tmpl = fit_model(data, fc);
    if (tmpl && tmpl->dim() != d) throw DimensionError("fixed model dimension does not match the data");
    auto fit_both = [&](const Matrix& x) {
        RVineModel f = opt.reselect ? fit_model(x, fc) : refit_parameters(*tmpl, x);
        NonSimplifiedModel g = fit_nonsimplified(x, f);
        return std::make_pair(std::move(f), std::move(g));
    };
    return bootstrap_test(data, fit_both, DefaultDistance{}, cfg);
}

/**
 * Nested classes given as fit configurations.  The larger class is fitted
 * first; elliptical nested classes reuse its structure, so both fits share
 * one diagonal ordering.
 */
inline BootstrapTestResult test_nested(const Matrix& data, const FitConfig& cfg_f, const FitConfig& cfg_g,
                                       const BootstrapConfig& cfg = {})
{
    auto fit_both = [&](const Matrix& x) {
        RVineModel g = fit_model(x, cfg_g);
        FitConfig cf = cfg_f;
        if (!cf.structure && (cf.structure_class == StructureClass::GaussianCopula ||
                              cf.structure_class == StructureClass::TCopula))
            cf.structure = g.structure();
        RVineModel f = fit_model(x, cf);
        return std::make_pair(std::move(f), std::move(g));
    };
    return bootstrap_test(data, fit_both, DefaultDistance{}, cfg);
}

}  // namespace vinedist

#endif
