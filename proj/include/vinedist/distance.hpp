#ifndef VINEDIST_DISTANCE_HPP
#define VINEDIST_DISTANCE_HPP

/** @file
 * Kullback-Leibler distances between vine copulas: quadrature and Monte
 * Carlo references, and the diagonal approximations dKL and sdKL.
 *
 * Levels follow the diagonal ordering of the first model f: level j
 * (1..d-1) compares the conditional densities of the variable at diagonal
 * position j-1 given positions j..d-1 (0-based).  Conditioning values are
 * taken on warped diagonals of [0,1]^{d-j}: corner-to-corner lines pushed
 * through the inverse Rosenblatt transform of f's margin on positions j..d-1.
 */

#include "engine.hpp"
#include "math.hpp"
#include "nonsimplified.hpp"
#include "parallel.hpp"
#include "rvine.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <functional>
#include <atomic>
#include <string>
#include <vector>

namespace vinedist {

enum class DistanceMethod { KlNumeric, KlMonteCarlo, Dkl, Sdkl };

inline std::string_view method_name(DistanceMethod m)
{
    switch (m) {
    case DistanceMethod::KlNumeric: return "kl_numeric";
    case DistanceMethod::KlMonteCarlo: return "kl_mc";
    case DistanceMethod::Dkl: return "dkl";
    case DistanceMethod::Sdkl: return "sdkl";
    }
    return "";
}

inline DistanceMethod method_from_name(std::string_view s)
{
    if (s == "kl" || s == "kl_numeric") return DistanceMethod::KlNumeric;
    if (s == "mc" || s == "kl_mc") return DistanceMethod::KlMonteCarlo;
    if (s == "dkl") return DistanceMethod::Dkl;
    if (s == "sdkl") return DistanceMethod::Sdkl;
    throw ModelError("unknown distance method '" + std::string(s) + "'");
}

struct DistanceReport {
    double value = 0.0;
    std::vector<double> per_level;  // index j-1 for level j
    DistanceMethod method = DistanceMethod::Dkl;
    double eps = 0.025;
    int n_grid = 10;
    double std_error = 0.0;  // Monte Carlo only
    int clamps = 0;          // log-ratio or density floor hits
    int negative = 0;        // univariate KLs below -1e-8 before clamping
};

/// Points of one level: `points[k]` holds f's conditioning values in diagonal order.
struct DiagonalGrid {
    int level = 1;
    double eps = 0.025;
    int n = 10;
    bool warped = true;
    std::vector<std::vector<int>> corners;                   // r with r[0] = 0
    std::vector<std::vector<std::vector<double>>> diagonals;  // [diagonal][point][coordinate]
};

/// How kl_univariate integrates: in f's probability-integral scale or directly in u.
enum class KlRoute { Probability, Density };

namespace detail {

inline bool all_independence(const RVineModel& m)
{
    for (const auto& c : m.copulas())
        if (!c.is_independence()) return false;
    return true;
}

inline bool all_independence(const NonSimplifiedModel& m)
{
    for (const auto& e : m.edges())
        if (!e.copula.is_independence()) return false;
    return true;
}

inline const QuadratureRule& kl_rule()
{
    static const QuadratureRule r = normal_score_rule(65);
    return r;
}

/// Conditional density of one diagonal position of a model, with columns behind it cached.
template <class Model>
class ConditionalView {
public:
    ConditionalView(const Model& m, int level) : m_(m), s_(m.structure()), j_(level)
    {
        ws_.reset(s_.dim());
    }

    /// values[k] for variable at position j + k of this model's ordering.
    void condition(std::span<const double> values)
    {
        for (int p = j_; p < s_.dim(); ++p) ws_.u[s_.diagonal(p)] = clamp_unit(values[p - j_]);
        eval_columns(m_, ws_, j_);
    }
    void condition_by_variable(const std::vector<double>& u_by_var)
    {
        for (int p = j_; p < s_.dim(); ++p) ws_.u[s_.diagonal(p)] = clamp_unit(u_by_var[s_.diagonal(p)]);
        eval_columns(m_, ws_, j_);
    }
    double log_density(double x)
    {
        ws_.u[s_.diagonal(j_ - 1)] = clamp_unit(x);
        return eval_column(m_, ws_, j_ - 1);
    }
    double quantile(double w)
    {
        invert_column(m_, ws_, j_ - 1, w);
        return ws_.u[s_.diagonal(j_ - 1)];
    }
    double cdf(double x)
    {
        log_density(x);
        return ws_.D(j_ - 1, j_);
    }

private:
    const Model& m_;
    const RVineStructure& s_;
    int j_;
    VineWorkspace ws_;
};

/// log density of the margin of `m` on the variables in `vars` (labels): leading
/// diagonal positions outside `vars` are dropped, the remaining ones are
/// integrated out by nested adaptive Gauss-Kronrod in normal scores.
template <class Model>
double marginal_log_density(const Model& m, const std::vector<int>& vars, const std::vector<double>& u_by_var)
{
    const auto& s = m.structure();
    const int d = s.dim();
    int p = d;
    std::vector<char> need(d, 0);
    for (int v : vars) need[v] = 1;
    int covered = 0;
    const int want = static_cast<int>(vars.size());
    while (covered < want) {
        --p;
        if (need[s.diagonal(p)]) ++covered;
    }
    std::vector<int> free_vars;
    for (int q = p; q < d; ++q)
        if (!need[s.diagonal(q)]) free_vars.push_back(s.diagonal(q));
    VineWorkspace ws;
    ws.reset(d);
    for (int v : vars) ws.u[v] = clamp_unit(u_by_var[v]);
    if (free_vars.empty()) return eval_columns(m, ws, p);
    const double zmax = -norm_quantile(kClamp);
    std::function<double(std::size_t)> integrate = [&](std::size_t k) -> double {
        if (k == free_vars.size()) return std::exp(eval_columns(m, ws, p));
        auto f = [&](double z) {
            ws.u[free_vars[k]] = norm_cdf(z);
            return integrate(k + 1) * norm_pdf(z);
        };
        return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, -zmax, zmax, 12, 1e-11);
    };
    return std::log(std::max(integrate(0), 1e-300));
}

/// Conditional log density of g for f's level j, whatever g's ordering.
template <class ModelG>
class RelabeledConditional {
public:
    RelabeledConditional(const ModelG& g, const RVineStructure& sf, int level) : g_(g), sf_(sf), j_(level)
    {
        const auto& sg = g.structure();
        const int d = sf.dim();
        trivial_ = all_independence(g);
        std::vector<int> a(sf.order().begin() + j_, sf.order().end()), b(sg.order().begin() + j_, sg.order().end());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        native_ = sg.diagonal(j_ - 1) == sf.diagonal(j_ - 1) && a == b;
        if (!trivial_ && !native_ && d > 6)
            throw ModelError("models with different diagonal orderings are only comparable up to d = 6");
        if (native_) view_.emplace(g, level);
        target_ = sf.diagonal(j_ - 1);
        for (int p = j_ - 1; p < d; ++p) joint_.push_back(sf.diagonal(p));
        cond_.assign(joint_.begin() + 1, joint_.end());
        u_.assign(d, 0.5);
    }

    void condition(std::span<const double> rest_f)
    {
        for (int p = j_; p < sf_.dim(); ++p) u_[sf_.diagonal(p)] = rest_f[p - j_];
        if (trivial_) return;
        if (native_) view_->condition_by_variable(u_);
        else log_norm_ = marginal_log_density(g_, cond_, u_);
    }
    double log_density(double x)
    {
        if (trivial_) return 0.0;
        if (native_) return view_->log_density(x);
        u_[target_] = x;
        return marginal_log_density(g_, joint_, u_) - log_norm_;
    }

private:
    const ModelG& g_;
    const RVineStructure& sf_;
    int j_;
    bool trivial_ = false, native_ = false;
    std::optional<ConditionalView<ModelG>> view_;
    int target_ = 0;
    std::vector<int> joint_, cond_;
    std::vector<double> u_;
    double log_norm_ = 0.0;
};

inline double clamp_log_ratio(double lr, int& clamps)
{
    constexpr double cap = 690.7755278982137;  // log(1e300)
    if (std::isnan(lr) || lr > cap || lr < -cap) {
        ++clamps;
        return std::isnan(lr) ? 0.0 : std::clamp(lr, -cap, cap);
    }
    return lr;
}

/// Univariate KL of f's conditional from g's at one conditioning point.
template <class ModelF, class ModelG>
double kl_univariate_at(ConditionalView<ModelF>& f, RelabeledConditional<ModelG>& g, std::span<const double> rest,
                        KlRoute route, int& clamps, int& negative)
{
    f.condition(rest);
    g.condition(rest);
    const auto& rule = kl_rule();
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        if (route == KlRoute::Probability) {
            const double x = f.quantile(rule.nodes[i]);
            s += rule.weights[i] * clamp_log_ratio(f.log_density(x) - g.log_density(x), clamps);
        } else {
            const double x = rule.nodes[i];
            const double lf = f.log_density(x);
            s += rule.weights[i] * std::exp(lf) * clamp_log_ratio(lf - g.log_density(x), clamps);
        }
    }
    if (s < -1e-8) ++negative;
    return std::max(s, 0.0);
}

/// Inverse Rosenblatt of f's margin on positions j..d-1; w and result in diagonal order.
template <class Model>
std::vector<double> warp_point(const Model& m, int j, std::span<const double> w)
{
    const auto& s = m.structure();
    const int d = s.dim();
    VineWorkspace ws;
    ws.reset(d);
    for (int c = d - 1; c >= j; --c) invert_column(m, ws, c, w[c - j]);
    std::vector<double> out(d - j);
    for (int p = j; p < d; ++p) out[p - j] = ws.u[s.diagonal(p)];
    return out;
}

template <class Model>
double margin_log_density(const Model& m, int j, std::span<const double> values)
{
    const auto& s = m.structure();
    VineWorkspace ws;
    ws.reset(s.dim());
    for (int p = j; p < s.dim(); ++p) ws.u[s.diagonal(p)] = clamp_unit(values[p - j]);
    return eval_columns(m, ws, j);
}

inline void check_grid(int d, int j, double eps, int n)
{
    if (j < 1 || j > d - 1) throw ModelError("level must be in [1, d-1]");
    if (!(eps > 0.0 && eps < 0.5)) throw ModelError("eps must lie in (0, 0.5)");
    if (n < 1) throw ModelError("n must be positive");
}

}  // namespace detail

/// Equidistant grid of n points on [eps, 1 - eps].
inline std::vector<double> trimmed_grid(double eps, int n)
{
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = n == 1 ? 0.5 : eps + (1.0 - 2.0 * eps) * i / (n - 1);
    return g;
}

/// The 2^{(d-j)-1} diagonals of level j, optionally warped by f's margin.
template <class Model>
DiagonalGrid build_diagonals(const Model& f, int j, double eps = 0.025, int n = 10, bool warp = true)
{
    const int d = f.structure().dim();
    detail::check_grid(d, j, eps, n);
    const int k = d - j;
    DiagonalGrid g;
    g.level = j;
    g.eps = eps;
    g.n = n;
    g.warped = warp;
    const auto mu = trimmed_grid(eps, n);
    const int count = 1 << (k - 1);
    for (int c = 0; c < count; ++c) {
        std::vector<int> r(k, 0);
        for (int i = 1; i < k; ++i) r[i] = (c >> (k - 1 - i)) & 1;  // lexicographic in r
        std::vector<std::vector<double>> line;
        for (double m : mu) {
            std::vector<double> p(k);
            for (int i = 0; i < k; ++i) p[i] = r[i] ? 1.0 - m : m;
            line.push_back(warp ? detail::warp_point(f, j, p) : p);
        }
        g.corners.push_back(std::move(r));
        g.diagonals.push_back(std::move(line));
    }
    return g;
}

/// Weights sum_points c^f_{(j+1):d}(point) per diagonal of `grid`.
template <class Model>
std::vector<double> diagonal_weights(const Model& f, const DiagonalGrid& grid)
{
    std::vector<double> w;
    for (const auto& line : grid.diagonals) {
        double s = 0.0;
        for (const auto& p : line) s += std::exp(detail::margin_log_density(f, grid.level, p));
        w.push_back(s);
    }
    return w;
}

/// Index of the diagonal of largest weight; ties go to the smallest corner.
template <class Model>
int principal_diagonal_index(const Model& f, const DiagonalGrid& grid)
{
    const auto w = diagonal_weights(f, grid);
    int best = 0;
    for (int i = 1; i < static_cast<int>(w.size()); ++i)
        if (w[i] > w[best] * (1.0 + 1e-12)) best = i;
    return best;
}

template <class Model>
std::vector<std::vector<double>> principal_diagonal(const Model& f, int j, double eps = 0.025, int n = 10)
{
    const auto grid = build_diagonals(f, j, eps, n);
    return grid.diagonals[principal_diagonal_index(f, grid)];
}

/**
 * KL of the level-j conditional of g from that of f at f-conditioning
 * values `rest` (diagonal order of f).
 */
template <class ModelF, class ModelG>
double kl_univariate(const ModelF& f, const ModelG& g, int j, std::span<const double> rest,
                     KlRoute route = KlRoute::Probability)
{
    if (f.structure().dim() != g.structure().dim()) throw ModelError("models differ in dimension");
    detail::ConditionalView<ModelF> fv(f, j);
    detail::RelabeledConditional<ModelG> gv(g, f.structure(), j);
    int clamps = 0, negative = 0;
    return detail::kl_univariate_at(fv, gv, rest, route, clamps, negative);
}

namespace detail {

template <class ModelF, class ModelG>
DistanceReport diagonal_distance(const ModelF& f, const ModelG& g, double eps, int n, bool single, KlRoute route)
{
    const int d = f.structure().dim();
    if (g.structure().dim() != d) throw ModelError("models differ in dimension");
    if (d < 2) throw ModelError("distances need d >= 2");
    DistanceReport rep;
    rep.method = single ? DistanceMethod::Sdkl : DistanceMethod::Dkl;
    rep.eps = eps;
    rep.n_grid = n;
    rep.per_level.assign(d - 1, 0.0);
    if (all_independence(f) && all_independence(g)) return rep;
    std::vector<std::vector<std::vector<double>>> points(d);  // [level][point]
    for (int j = 1; j <= d - 1; ++j) {
        check_grid(d, j, eps, n);
        auto grid = build_diagonals(f, j, eps, n);
        if (single) {
            points[j] = grid.diagonals[principal_diagonal_index(f, grid)];
        } else {
            for (auto& line : grid.diagonals)
                for (auto& p : line) points[j].push_back(std::move(p));
        }
    }
    struct Task {
        int level, index;
    };
    std::vector<Task> tasks;
    for (int j = 1; j <= d - 1; ++j)
        for (int i = 0; i < static_cast<int>(points[j].size()); ++i) tasks.push_back({j, i});
    std::vector<double> kl(tasks.size());
    std::vector<int> clamps(tasks.size(), 0), negative(tasks.size(), 0);
    const int chunk = 16;
    const int chunks = static_cast<int>((tasks.size() + chunk - 1) / chunk);
    parallel_for(chunks, [&](int c) {
        const std::size_t lo = static_cast<std::size_t>(c) * chunk, hi = std::min(tasks.size(), lo + chunk);
        int level = -1;
        std::optional<ConditionalView<ModelF>> fv;
        std::optional<RelabeledConditional<ModelG>> gv;
        for (std::size_t t = lo; t < hi; ++t) {
            if (tasks[t].level != level) {
                level = tasks[t].level;
                fv.emplace(f, level);
                gv.emplace(g, f.structure(), level);
            }
            kl[t] = kl_univariate_at(*fv, *gv, points[level][tasks[t].index], route, clamps[t], negative[t]);
        }
    });
    std::size_t t = 0;
    for (int j = 1; j <= d - 1; ++j) {
        double s = 0.0;
        const std::size_t np = points[j].size();
        for (std::size_t i = 0; i < np; ++i, ++t) {
            s += kl[t];
            rep.clamps += clamps[t];
            rep.negative += negative[t];
        }
        rep.per_level[j - 1] = s / static_cast<double>(np);
    }
    for (double v : rep.per_level) rep.value += v;
    return rep;
}

}  // namespace detail

template <class ModelF, class ModelG>
DistanceReport dkl(const ModelF& f, const ModelG& g, double eps = 0.025, int n = 10,
                   KlRoute route = KlRoute::Probability)
{
    return detail::diagonal_distance(f, g, eps, n, false, route);
}

template <class ModelF, class ModelG>
DistanceReport sdkl(const ModelF& f, const ModelG& g, double eps = 0.025, int n = 10,
                    KlRoute route = KlRoute::Probability)
{
    return detail::diagonal_distance(f, g, eps, n, true, route);
}

/// Tensor quadrature of the full KL integral, 64 normal-score nodes per axis; d <= 3.
template <class ModelF, class ModelG>
DistanceReport kl_numeric(const ModelF& f, const ModelG& g, int nodes = 64)
{
    const int d = f.structure().dim();
    if (g.structure().dim() != d) throw ModelError("models differ in dimension");
    if (d > 3) throw DimensionError("kl_numeric supports d <= 3 only");
    const auto rule = normal_score_rule(nodes);
    const int q = nodes;
    int total = 1;
    for (int k = 0; k < d; ++k) total *= q;
    std::vector<double> part(q, 0.0);
    std::vector<int> clamps(q, 0);
    parallel_for(q, [&](int first) {
        std::vector<double> u(d);
        std::vector<int> idx(d, 0);
        for (int r = 0; r < total / q; ++r) {
            int x = r;
            idx[0] = first;
            for (int k = 1; k < d; ++k) {
                idx[k] = x % q;
                x /= q;
            }
            double w = 1.0;
            for (int k = 0; k < d; ++k) {
                u[k] = rule.nodes[idx[k]];
                w *= rule.weights[idx[k]];
            }
            const double lf = f.log_density(u);
            part[first] += w * std::exp(lf) * detail::clamp_log_ratio(lf - g.log_density(u), clamps[first]);
        }
    });
    DistanceReport rep;
    rep.method = DistanceMethod::KlNumeric;
    for (int i = 0; i < q; ++i) {
        rep.value += part[i];
        rep.clamps += clamps[i];
    }
    rep.value = std::max(rep.value, 0.0);
    rep.per_level = {rep.value};
    return rep;
}

/// Mean of log(f/g) over a sample of f (clamped at 0), with its standard error.
template <class ModelF, class ModelG>
DistanceReport kl_monte_carlo(const ModelF& f, const ModelG& g, int n_samples, Rng& rng)
{
    const int d = f.structure().dim();
    if (g.structure().dim() != d) throw ModelError("models differ in dimension");
    if (n_samples < 1000) throw ModelError("kl_monte_carlo needs at least 1000 samples");
    const Matrix x = f.sample(n_samples, rng);
    std::vector<double> lr(n_samples);
    std::vector<int> clamps(n_samples, 0);
    parallel_for(n_samples, [&](int i) {
        std::vector<double> u(d);
        for (int k = 0; k < d; ++k) u[k] = x(i, k);
        lr[i] = detail::clamp_log_ratio(f.log_density(u) - g.log_density(u), clamps[i]);
    });
    DistanceReport rep;
    rep.method = DistanceMethod::KlMonteCarlo;
    double mean = 0.0;
    for (double v : lr) mean += v;
    mean /= n_samples;
    double ss = 0.0;
    for (double v : lr) ss += (v - mean) * (v - mean);
    rep.value = std::max(mean, 0.0);
    rep.std_error = std::sqrt(ss / (n_samples - 1) / n_samples);
    for (int c : clamps) rep.clamps += c;
    rep.per_level = {rep.value};
    return rep;
}

/// dkl below dimension 10, sdkl from 10 on.
template <class ModelF, class ModelG>
DistanceReport default_distance(const ModelF& f, const ModelG& g, double eps = 0.025, int n = 10)
{
    return f.structure().dim() < 10 ? dkl(f, g, eps, n) : sdkl(f, g, eps, n);
}

}  // namespace vinedist

#endif
