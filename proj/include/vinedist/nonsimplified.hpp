#ifndef VINEDIST_NONSIMPLIFIED_HPP
#define VINEDIST_NONSIMPLIFIED_HPP

/** @file
 * Non-simplified vines: conditional edges whose Kendall's tau is linear in
 * one conditioning variable, tau(u) = a + (b - a) u.
 */

#include "fit.hpp"
#include "parallel.hpp"
#include "rvine.hpp"

#include <optional>
#include <vector>

namespace vinedist {

inline constexpr double kTauClip = 0.95;

struct TauFunction {
    double a = 0.0, b = 0.0;
    int driver = 0;  // variable label

    double operator()(double u) const { return a + (b - a) * u; }
    bool constant() const { return a == b; }
};

/**
 * One edge.  Without a tau function the copula is used as is.  With one,
 * the copula supplies the family, the rotation group and (for t) nu; at
 * u_driver the edge is the family at tau(u_driver), clipped to +-0.95, with
 * asymmetric families switching to the 90/270 rotation for negative tau.
 * A constant tau function returns the stored copula unchanged.
 */
struct NsEdge {
    BivariateCopula copula;
    std::optional<TauFunction> tau;
};

namespace detail {

inline int rotation_for(int base_rotation, double tau)
{
    const bool upper_group = base_rotation == 180 || base_rotation == 270;
    if (tau >= 0.0) return upper_group ? 180 : 0;
    return upper_group ? 270 : 90;
}

inline BivariateCopula copula_at_tau(Family f, int base_rotation, double nu, double tau)
{
    tau = std::clamp(tau, -kTauClip, kTauClip);
    if (f == Family::Independence || std::abs(tau) < 1e-10) return {};
    const int rot = is_rotatable(f) ? rotation_for(base_rotation, tau) : 0;
    return copula_from_tau(f, rot, tau, nu);
}

/// Copula of edge `e` when its driver equals `u`.
inline BivariateCopula edge_at(const NsEdge& e, double u)
{
    if (!e.tau || e.tau->constant()) return e.copula;
    const double nu = e.copula.family() == Family::StudentT ? e.copula.parameter(1) : 4.0;
    return copula_at_tau(e.copula.family(), e.copula.rotation(), nu, (*e.tau)(u));
}

}  // namespace detail

class NonSimplifiedModel {
public:
    NonSimplifiedModel() = default;

    /// `edges[col * d + row]` for row > col.
    NonSimplifiedModel(RVineStructure s, std::vector<NsEdge> edges) : s_(std::move(s)), edges_(std::move(edges))
    {
        const int d = s_.dim();
        if (static_cast<int>(edges_.size()) != d * d) throw ModelError("need d*d edge slots");
        for (int j = 0; j < d; ++j)
            for (int i = j + 1; i < d; ++i) {
                const auto& e = edges_[j * d + i];
                if (!e.tau) continue;
                if (i == d - 1) throw ModelError("tree-1 edges cannot carry a tau function");
                const auto cond = s_.conditioning(j, i);
                if (std::find(cond.begin(), cond.end(), e.tau->driver) == cond.end())
                    throw ModelError("driver must belong to the edge's conditioning set");
                if (!(std::abs(e.tau->a) <= 1.0 && std::abs(e.tau->b) <= 1.0))
                    throw ParameterDomainError("tau function endpoints must lie in [-1, 1]");
            }
    }

    /// Conditional edges of `m` with constant tau functions on the default driver.
    static NonSimplifiedModel from_simplified(const RVineModel& m)
    {
        const auto& s = m.structure();
        const int d = s.dim();
        std::vector<NsEdge> edges(d * d);
        for (int j = 0; j < d - 1; ++j)
            for (int i = j + 1; i < d; ++i) {
                NsEdge& e = edges[j * d + i];
                e.copula = m.at(j, i);
                if (i < d - 1 && !e.copula.is_independence()) {
                    const double t = e.copula.tau();
                    e.tau = TauFunction{t, t, default_driver(s, j)};
                }
            }
        return NonSimplifiedModel(s, std::move(edges));
    }

    /// Driver of the conditional edges in column j: its tree-1 partner M(d-1, j).
    static int default_driver(const RVineStructure& s, int col) { return s(s.dim() - 1, col); }

    int dim() const { return s_.dim(); }
    const RVineStructure& structure() const { return s_; }
    const NsEdge& edge(int col, int row) const { return edges_[col * s_.dim() + row]; }
    const NsEdge& edge_at_tree(int tree, int e) const { return edge(e, s_.row_of_tree(tree)); }
    const std::vector<NsEdge>& edges() const { return edges_; }

    BivariateCopula edge_copula(int col, int row, const double* u) const
    {
        const NsEdge& e = edge(col, row);
        return detail::edge_at(e, e.tau ? u[e.tau->driver] : 0.0);
    }

    /// Linear-tau edges count 2 (+1 for t); other edges their own parameters.
    int num_parameters() const
    {
        int k = 0;
        for (const auto& e : edges_) {
            if (e.tau && !e.copula.is_independence())
                k += 2 + (e.copula.family() == Family::StudentT ? 1 : 0);
            else k += e.copula.num_parameters();
        }
        return k;
    }

    double log_density(std::span<const double> u) const
    {
        if (static_cast<int>(u.size()) != dim()) throw DimensionError("point dimension does not match the model");
        thread_local detail::VineWorkspace ws;
        ws.reset(dim());
        for (int k = 0; k < dim(); ++k) ws.u[k] = clamp_unit(u[k]);
        return detail::eval_columns(*this, ws);
    }
    double density(std::span<const double> u) const { return std::exp(log_density(u)); }

    Vector log_density(const Matrix& data) const
    {
        if (data.cols() != dim()) throw DimensionError("data dimension does not match the model");
        Vector out(data.rows());
        std::vector<double> row(dim());
        for (Eigen::Index r = 0; r < data.rows(); ++r) {
            for (int k = 0; k < dim(); ++k) row[k] = data(r, k);
            out[r] = log_density(row);
        }
        return out;
    }
    double loglik(const Matrix& data) const { return log_density(data).sum(); }

    std::vector<double> inverse_rosenblatt(std::span<const double> w) const
    {
        detail::VineWorkspace ws;
        ws.reset(dim());
        for (int j = dim() - 1; j >= 0; --j) detail::invert_column(*this, ws, j, w[s_.diagonal(j)]);
        return ws.u;
    }

    Matrix sample(int n, Rng& rng) const
    {
        const int d = dim();
        Matrix out(n, d);
        detail::VineWorkspace ws;
        ws.reset(d);
        std::vector<double> w(d);
        for (int r = 0; r < n; ++r) {
            for (int k = 0; k < d; ++k) w[k] = rng.uniform();
            for (int j = d - 1; j >= 0; --j) detail::invert_column(*this, ws, j, w[s_.diagonal(j)]);
            for (int k = 0; k < d; ++k) out(r, k) = ws.u[k];
        }
        return out;
    }

private:
    RVineStructure s_;
    std::vector<NsEdge> edges_;
};

/// Result of fitting one linear-tau edge.
struct NsEdgeFit {
    NsEdge edge;
    bool fallback = false;  // optimizer failed; simplified edge kept
};

namespace detail {

inline double ns_edge_loglik(Family f, int base_rot, double nu, double ta, double tb, std::span<const double> x,
                             std::span<const double> y, std::span<const double> drv)
{
    double s = 0.0;
    if (ta == tb) {
        const BivariateCopula c = copula_at_tau(f, base_rot, nu, ta);
        return c.loglik(x, y);
    }
    for (std::size_t r = 0; r < x.size(); ++r) {
        const BivariateCopula c = copula_at_tau(f, base_rot, nu, ta + (tb - ta) * drv[r]);
        s += c.log_pdf(x[r], y[r]);
    }
    return s;
}

// representative copula carrying family, rotation group and nu
inline BivariateCopula ns_base(Family f, int rot, double nu, double tau)
{
    return copula_at_tau(f, rot, nu, std::abs(tau) > 0.01 ? tau : 0.1);
}

/// ML fit of (a, b) (and nu for t) for one conditional edge, seeded at the simplified copula.
inline NsEdgeFit fit_ns_edge(const BivariateCopula& simplified, int driver, std::span<const double> x,
                             std::span<const double> y, std::span<const double> drv)
{
    // an independence edge is given the Gaussian family so its tau can move
    const Family f = simplified.is_independence() ? Family::Gaussian : simplified.family();
    const int rot = simplified.rotation();
    double nu = f == Family::StudentT ? simplified.parameter(1) : 4.0;
    const double t0 = std::clamp(simplified.tau(), -kTauClip, kTauClip);
    const double seed_ll = simplified.loglik(x, y);

    auto nll = [&](const std::vector<double>& p) {
        const double ll = ns_edge_loglik(f, rot, nu, p[0], p[1], x, y, drv);
        return std::isfinite(ll) ? -ll : 1e300;
    };
    NsEdgeFit out;
    try {
        auto r = nelder_mead(nll, {t0, t0}, {-1.0, -1.0}, {1.0, 1.0}, 0.1, 1e-8, 600);
        double best = r.value;
        if (f == Family::StudentT) {
            auto [v, fv] = minimize_scalar(
                [&](double n) {
                    const double ll = ns_edge_loglik(f, rot, n, r.x[0], r.x[1], x, y, drv);
                    return std::isfinite(ll) ? -ll : 1e300;
                },
                kNuMin, kNuMax, 20);
            if (fv < best) {
                nu = v;
                best = fv;
            }
        }
        if (!(best <= -seed_ll + 1e-8 * (1.0 + std::abs(seed_ll)))) throw NumericalError("no improvement over the simplified edge");
        out.edge = NsEdge{ns_base(f, rot, nu, 0.5 * (r.x[0] + r.x[1])), TauFunction{r.x[0], r.x[1], driver}};
    } catch (const std::exception&) {
        out.edge = simplified.is_independence() ? NsEdge{simplified, std::nullopt}
                                                : NsEdge{simplified, TauFunction{t0, t0, driver}};
        out.fallback = true;
    }
    return out;
}

}  // namespace detail

struct NsFitResult {
    NonSimplifiedModel model;
    int fallbacks = 0;
};

/**
 * Fits tree-1 edges by ML with the simplified families and every conditional
 * edge as a linear-tau edge, tree by tree on the non-simplified
 * pseudo-observations.  `simplified` supplies structure, families and seeds.
 */
inline NsFitResult fit_nonsimplified_detailed(const Matrix& data, const RVineModel& simplified)
{
    const auto& s = simplified.structure();
    const int d = s.dim();
    if (data.cols() != d) throw DimensionError("data dimension does not match the structure");
    detail::check_fit_data(data, 20);
    if (d < 3) throw DimensionError("non-simplified fitting needs d >= 3");
    std::vector<std::vector<double>> dir(d * (d + 1)), ind(d * (d + 1));
    auto D = [&](int j, int r) -> std::vector<double>& { return dir[j * (d + 1) + r]; };
    auto I = [&](int j, int r) -> std::vector<double>& { return ind[j * (d + 1) + r]; };
    std::vector<std::vector<double>> cols(d);
    for (int k = 0; k < d; ++k) cols[k] = detail::column_of(data, k);
    for (int j = 0; j < d; ++j) D(j, d) = cols[s.diagonal(j)];
    std::vector<NsEdge> edges(d * d);
    std::vector<char> fell(d * d, 0);
    const std::size_t n = static_cast<std::size_t>(data.rows());
    for (int t = 1; t <= d - 1; ++t) {
        const int i = d - t;
        parallel_for(i, [&](int j) {
            const auto src = s.source(j, i);
            const auto& a = D(j, i + 1);
            const auto& b = src.direct ? D(src.column, i + 1) : I(src.column, i + 1);
            const BivariateCopula& sc = simplified.at(j, i);
            NsEdge e;
            if (t == 1) {
                e.copula = sc.is_independence() ? sc : fit_pair(a, b, sc.family(), sc.rotation()).copula;
            } else {
                const int drv = NonSimplifiedModel::default_driver(s, j);
                auto r = detail::fit_ns_edge(sc, drv, a, b, cols[drv]);
                e = r.edge;
                fell[j * d + i] = r.fallback;
            }
            edges[j * d + i] = e;
            if (t == d - 1) return;
            auto& hd = D(j, i);
            hd.resize(n);
            const bool need = s.needs_indirect(j, i);
            if (need) I(j, i).resize(n);
            const bool varying = e.tau && !e.tau->constant();
            for (std::size_t r = 0; r < n; ++r) {
                const auto ev = varying ? detail::edge_at(e, cols[e.tau->driver][r]).evaluate(a[r], b[r])
                                        : e.copula.evaluate(a[r], b[r]);
                hd[r] = ev.h2;
                if (need) I(j, i)[r] = ev.h1;
            }
        });
    }
    NsFitResult res{NonSimplifiedModel(s, std::move(edges)), 0};
    for (char f : fell) res.fallbacks += f;
    return res;
}

inline NonSimplifiedModel fit_nonsimplified(const Matrix& data, const RVineModel& simplified)
{
    return fit_nonsimplified_detailed(data, simplified).model;
}

/// Pointwise bootstrap band of tau(u) for one conditional edge under the simplified model.
struct TauBand {
    std::vector<double> grid, lower, upper, median;
    double simplified_tau = 0.0;
};

inline TauBand tau_band(const RVineModel& simplified, int tree, int edge, int M, double alpha, int N, Rng& rng)
{
    const int d = simplified.dim();
    if (tree < 2 || tree > d - 1) throw ModelError("tau bands need a conditional edge (tree >= 2)");
    if (edge < 0 || edge >= d - tree) throw ModelError("edge index out of range");
    if (M < 1) throw ModelError("M must be positive");
    TauBand band;
    for (int g = 1; g <= 19; ++g) band.grid.push_back(0.05 * g);
    band.simplified_tau = simplified.copula(tree, edge).tau();
    const std::uint64_t master = rng();
    std::vector<std::vector<double>> taus(M);
    parallel_for(M, [&](int m) {
        Rng r = Rng::stream(master, "band", static_cast<std::uint64_t>(m));
        const Matrix x = simplified.sample(N, r);
        const RVineModel sm = refit_parameters(simplified, x);
        const auto ns = fit_nonsimplified(x, sm);
        const NsEdge& e = ns.edge_at_tree(tree, edge);
        for (double u : band.grid) {
            double t = e.copula.tau();
            if (e.tau) t = std::clamp((*e.tau)(u), -kTauClip, kTauClip);
            taus[m].push_back(t);
        }
    });
    for (std::size_t g = 0; g < band.grid.size(); ++g) {
        std::vector<double> v(M);
        for (int m = 0; m < M; ++m) v[m] = taus[m][g];
        std::sort(v.begin(), v.end());
        auto q = [&](double p) {
            const double h = (M - 1) * p;
            const int lo = static_cast<int>(std::floor(h));
            const int hi = std::min(lo + 1, M - 1);
            return v[lo] + (h - lo) * (v[hi] - v[lo]);
        };
        band.lower.push_back(q(alpha / 2));
        band.upper.push_back(q(1 - alpha / 2));
        band.median.push_back(q(0.5));
    }
    return band;
}

}  // namespace vinedist

#endif
