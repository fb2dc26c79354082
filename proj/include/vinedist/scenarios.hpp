#ifndef VINEDIST_SCENARIOS_HPP
#define VINEDIST_SCENARIOS_HPP

/** @file
 * Reference models and simulation harnesses: rejection rates of the
 * simplifying test along a family of linear tau functions, repeated model
 * selection, and repeated truncation selection.
 */

#include "boottest.hpp"
#include "nonsimplified.hpp"
#include "selection.hpp"
#include "truncation.hpp"

#include <cmath>
#include <vector>

namespace vinedist {

/// Clayton D-vine 1-2-3 (0-based 0-1-2) with tau 0.7 and 0.5 in tree 1 and
/// tau(u2) = a + (b - a) u2 on the conditional edge.
inline NonSimplifiedModel clayton_linear_tau(double a, double b)
{
    std::vector<std::vector<VineEdge>> trees{{{0, 1, {}}, {1, 2, {}}}, {{0, 2, {1}}}};
    const double mid = 0.5 * (a + b);
    const int rot = mid < 0.0 ? 90 : 0;
    std::vector<std::vector<BivariateCopula>> cops{
        {copula_from_tau(Family::Clayton, 0, 0.7), copula_from_tau(Family::Clayton, 0, 0.5)},
        {std::abs(mid) < 1e-3 ? copula_from_tau(Family::Clayton, 0, 0.1) : copula_from_tau(Family::Clayton, rot, mid)}};
    const auto base = model_from_trees(3, trees, cops);
    auto ns = NonSimplifiedModel::from_simplified(base);
    auto edges = ns.edges();
    edges[0 * 3 + 1].tau = TauFunction{a, b, 1};
    return NonSimplifiedModel(ns.structure(), edges);
}

/// Simplified template with the true structure and families of clayton_linear_tau(a, b).
inline RVineModel clayton_linear_tau_template(double a, double b)
{
    const auto ns = clayton_linear_tau(a, b);
    const int d = ns.dim();
    std::vector<BivariateCopula> cops(d * d);
    for (int j = 0; j < d; ++j)
        for (int i = j + 1; i < d; ++i) cops[j * d + i] = ns.edge(j, i).copula;
    return RVineModel(ns.structure(), cops);
}

/**
 * Five-dimensional mixed vine (tree 1: 1-5, 2-4, 3-4, 4-5).  Two-parameter
 * families outside the supported set are replaced: BB1 by t (nu = 4), BB7
 * and BB6 by Joe, Tawn by Gumbel; tau values are kept.
 */
inline RVineModel mixed_vine5()
{
    std::vector<std::vector<VineEdge>> trees{{{0, 4, {}}, {1, 3, {}}, {2, 3, {}}, {3, 4, {}}},
                                             {{0, 3, {4}}, {1, 4, {3}}, {2, 4, {3}}},
                                             {{0, 2, {3, 4}}, {1, 2, {3, 4}}},
                                             {{0, 1, {2, 3, 4}}}};
    std::vector<std::vector<BivariateCopula>> cops{
        {copula_from_tau(Family::Gumbel, 0, 0.6), copula_from_tau(Family::StudentT, 0, 0.83, 4.0),
         copula_from_tau(Family::Joe, 0, 0.74), copula_from_tau(Family::Gumbel, 0, 0.72)},
        {copula_from_tau(Family::Clayton, 0, 0.5), copula_from_tau(Family::Joe, 0, 0.45),
         copula_from_tau(Family::Joe, 0, 0.48)},
        {copula_from_tau(Family::StudentT, 0, -0.19, 3.0), copula_from_tau(Family::Frank, 0, -0.31)},
        {copula_from_tau(Family::Gaussian, 0, -0.13)}};
    return model_from_trees(5, trees, cops);
}

/// t copula with a random correlation matrix written as a D-vine on 0..d-1 and truncated at k.
inline RVineModel truncated_t_dvine(int d, int k, double nu, Rng& rng)
{
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    return t_vine(RVineStructure::dvine(order), random_correlation(d, rng), nu).truncate(k);
}

// ---- harnesses --------------------------------------------------------------

struct RejectionRate {
    double a = 0.0, b = 0.0;
    int rejections = 0;
    int repetitions = 0;
    double rate() const { return repetitions ? static_cast<double>(rejections) / repetitions : 0.0; }
};

/// P simplifying tests at (a, b) with structure and families fixed to the truth.
inline RejectionRate rejection_rate(double a, double b, int N, int P, const BootstrapConfig& boot, std::uint64_t seed)
{
    const auto truth = clayton_linear_tau(a, b);
    SimplifyingOptions opt;
    opt.fixed = clayton_linear_tau_template(a, b);
    RejectionRate r{a, b, 0, P};
    for (int p = 0; p < P; ++p) {
        Rng rng = Rng::stream(seed, "sim", static_cast<std::uint64_t>(p));
        const Matrix x = truth.sample(N, rng);
        BootstrapConfig cfg = boot;
        cfg.seed = Rng::stream(seed, "boot", static_cast<std::uint64_t>(p))();
        r.rejections += test_simplifying(x, cfg, opt).reject;
    }
    return r;
}

/// Rejection rates for b = -1, -0.9, ..., 1 (21 points).
inline std::vector<RejectionRate> power_curve(double a, int N, int P, const BootstrapConfig& boot, std::uint64_t seed)
{
    std::vector<RejectionRate> out;
    for (int k = -10; k <= 10; ++k)
        out.push_back(rejection_rate(a, k / 10.0, N, P, boot, Rng::stream(seed, "b", static_cast<std::uint64_t>(k + 10))()));
    return out;
}

/// Score tables of the named model classes fitted to `reps` samples of size N from `truth`.
inline std::vector<ScoreTable> selection_study(const RVineModel& truth, int N, int reps,
                                               const std::vector<std::string>& classes, std::uint64_t seed,
                                               const std::vector<Family>& familyset = default_familyset())
{
    std::vector<ScoreTable> out;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::stream(seed, "sim", static_cast<std::uint64_t>(r));
        const Matrix x = truth.sample(N, rng);
        out.push_back(score_models(x, fit_candidates(x, classes, familyset)));
    }
    return out;
}

struct TruncationRun {
    int k_global = 0, k_sequential = 0;
};

/// Both truncation algorithms on `runs` samples, each from a fresh truncated t D-vine.
inline std::vector<TruncationRun> truncation_study(int d, int k, double nu, int N, int runs, TruncationConfig cfg,
                                                   std::uint64_t seed)
{
    std::vector<TruncationRun> out;
    for (int r = 0; r < runs; ++r) {
        Rng rng = Rng::stream(seed, "sim", static_cast<std::uint64_t>(r));
        const auto truth = truncated_t_dvine(d, k, nu, rng);
        const Matrix x = truth.sample(N, rng);
        cfg.seed = Rng::stream(seed, "boot", static_cast<std::uint64_t>(r))();
        out.push_back({optimal_truncation_global(x, cfg).k_star, optimal_truncation_sequential(x, cfg).k_star});
    }
    return out;
}

}  // namespace vinedist

#endif
