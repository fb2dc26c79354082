#ifndef VINEDIST_ENGINE_HPP
#define VINEDIST_ENGINE_HPP

/** @file
 * h-function recursion shared by simplified and non-simplified vines.
 *
 * A model type provides `structure()` and `edge_copula(col, row, u)`, where
 * `u` is indexed by variable label (non-simplified edges read their driver
 * from it).  The first copula argument is always the column's diagonal side.
 *
 * dir(j, r) = C(u_{M(j,j)} | M(r..d-1, j)), dir(j, d) = u_{M(j,j)};
 * ind(j, r) = C(u_{M(r,j)} | M(j,j), M(r+1..d-1, j)).
 */

#include "structure.hpp"

#include <vector>

namespace vinedist::detail {

struct VineWorkspace {
    int d = 0;
    std::vector<double> dir, ind, u;

    void reset(int dim)
    {
        if (d == dim) return;
        d = dim;
        dir.assign(static_cast<std::size_t>(d) * (d + 1), 0.5);
        ind.assign(static_cast<std::size_t>(d) * (d + 1), 0.5);
        u.assign(d, 0.5);
    }
    double& D(int col, int row) { return dir[col * (d + 1) + row]; }
    double& I(int col, int row) { return ind[col * (d + 1) + row]; }
};

/// Second argument of edge (j, i), read from the workspace.
template <class Model>
inline double edge_input(const RVineStructure& s, VineWorkspace& ws, int j, int i)
{
    const auto src = s.source(j, i);
    return src.direct ? ws.D(src.column, i + 1) : ws.I(src.column, i + 1);
}

/// Evaluates column j (columns > j must be done); returns its log density sum.
template <class Model>
double eval_column(const Model& m, VineWorkspace& ws, int j)
{
    const RVineStructure& s = m.structure();
    const int d = s.dim();
    ws.D(j, d) = ws.u[s.diagonal(j)];
    double lp = 0.0;
    for (int i = d - 1; i > j; --i) {
        const double a = ws.D(j, i + 1);
        const double b = edge_input<Model>(s, ws, j, i);
        decltype(auto) c = m.edge_copula(j, i, ws.u.data());
        if (c.is_independence()) {
            ws.D(j, i) = a;
            ws.I(j, i) = b;
            continue;
        }
        const auto ev = c.evaluate(a, b);
        lp += ev.log_pdf;
        ws.D(j, i) = ev.h2;
        ws.I(j, i) = ev.h1;
    }
    return lp;
}

/// Evaluates columns d-1 down to `first`; returns the summed log density.
template <class Model>
double eval_columns(const Model& m, VineWorkspace& ws, int first = 0)
{
    const int d = m.structure().dim();
    double lp = 0.0;
    for (int j = d - 1; j >= first; --j) lp += eval_column(m, ws, j);
    return lp;
}

/// Inverse step for column j: given w = C(u_{M(j,j)} | rest), fills ws.u and
/// the column's recursion values.  Columns > j must be done.
template <class Model>
void invert_column(const Model& m, VineWorkspace& ws, int j, double w)
{
    const RVineStructure& s = m.structure();
    const int d = s.dim();
    double v = clamp_unit(w);
    for (int i = j + 1; i < d; ++i) {
        ws.D(j, i) = v;
        const double b = edge_input<Model>(s, ws, j, i);
        decltype(auto) c = m.edge_copula(j, i, ws.u.data());
        v = c.is_independence() ? v : c.hinv2(v, b);
    }
    ws.u[s.diagonal(j)] = v;
    ws.D(j, d) = v;
    for (int i = d - 1; i > j; --i) {
        if (!s.needs_indirect(j, i)) continue;
        const double a = ws.D(j, i + 1);
        const double b = edge_input<Model>(s, ws, j, i);
        decltype(auto) c = m.edge_copula(j, i, ws.u.data());
        ws.I(j, i) = c.is_independence() ? b : c.hfunc1(a, b);
    }
}

}  // namespace vinedist::detail

#endif
