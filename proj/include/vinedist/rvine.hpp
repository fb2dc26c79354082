#ifndef VINEDIST_RVINE_HPP
#define VINEDIST_RVINE_HPP

/** @file
 * Simplified R-vine copula models.
 */

#include "bicop.hpp"
#include "engine.hpp"
#include "rng.hpp"
#include "structure.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace vinedist {

class RVineModel {
public:
    RVineModel() = default;

    /// All edges independence; truncation level 0.
    explicit RVineModel(RVineStructure s) : s_(std::move(s)), cops_(s_.dim() * s_.dim()), trunc_(0) {}

    /// `copulas[col * d + row]` for row > col.  The truncation level is the
    /// highest tree that has a non-independence edge unless given explicitly.
    RVineModel(RVineStructure s, std::vector<BivariateCopula> copulas, int truncation = -1)
        : s_(std::move(s)), cops_(std::move(copulas))
    {
        const int d = s_.dim();
        if (static_cast<int>(cops_.size()) != d * d) throw ModelError("need d*d copula slots");
        int highest = 0;
        for (int j = 0; j < d; ++j)
            for (int i = j + 1; i < d; ++i)
                if (!cops_[j * d + i].is_independence()) highest = std::max(highest, d - i);
        if (truncation < 0) truncation = d - 1;
        if (truncation > d - 1) throw ModelError("truncation level exceeds d-1");
        if (highest > truncation)
            throw ModelError("tree " + std::to_string(highest) + " has a non-independence edge above truncation level " +
                             std::to_string(truncation));
        trunc_ = truncation;
    }

    /// Independence copula in dimension d (D-vine on 0..d-1).
    static RVineModel independence(int d)
    {
        std::vector<int> order(d);
        std::iota(order.begin(), order.end(), 0);
        return RVineModel(RVineStructure::dvine(order));
    }

    int dim() const { return s_.dim(); }
    const RVineStructure& structure() const { return s_; }
    int truncation_level() const { return trunc_; }

    /// Pair-copula of edge `edge` (0-based) in tree `tree` (1-based).
    const BivariateCopula& copula(int tree, int edge) const { return at(edge, s_.row_of_tree(tree)); }
    const BivariateCopula& at(int col, int row) const { return cops_[col * s_.dim() + row]; }
    const BivariateCopula& edge_copula(int col, int row, const double*) const { return at(col, row); }
    const std::vector<BivariateCopula>& copulas() const { return cops_; }

    RVineModel with_copula(int tree, int edge, const BivariateCopula& c) const
    {
        auto cops = cops_;
        cops[edge * s_.dim() + s_.row_of_tree(tree)] = c;
        return RVineModel(s_, std::move(cops), std::max(trunc_, c.is_independence() ? 0 : tree));
    }

    /// Free parameters; tied parameters (one df shared by a t copula) may override the per-edge count.
    int num_parameters() const
    {
        if (nparam_) return *nparam_;
        int k = 0;
        for (const auto& c : cops_) k += c.num_parameters();
        return k;
    }

    std::optional<int> parameter_count_override() const { return nparam_; }

    RVineModel with_parameter_count(int k) const
    {
        RVineModel m = *this;
        m.nparam_ = k;
        return m;
    }

    double log_density(std::span<const double> u) const
    {
        thread_local detail::VineWorkspace ws;
        load(ws, u);
        return detail::eval_columns(*this, ws);
    }
    double density(std::span<const double> u) const { return std::exp(log_density(u)); }

    /// Per-row log densities of an N x d sample.
    Vector log_density(const Matrix& data) const
    {
        check_dim(data);
        Vector out(data.rows());
        std::vector<double> row(dim());
        for (Eigen::Index r = 0; r < data.rows(); ++r) {
            for (int k = 0; k < dim(); ++k) row[k] = data(r, k);
            out[r] = log_density(row);
        }
        return out;
    }

    double loglik(const Matrix& data) const { return log_density(data).sum(); }

    /// w with w[M(j,j)] = C(u_{M(j,j)} | later diagonal variables).
    std::vector<double> rosenblatt(std::span<const double> u) const
    {
        detail::VineWorkspace ws;
        load(ws, u);
        detail::eval_columns(*this, ws);
        std::vector<double> w(dim());
        for (int j = 0; j < dim(); ++j) w[s_.diagonal(j)] = ws.D(j, j + 1);
        return w;
    }

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

    /**
     * Density of the variable at diagonal position j (1-based, 1..d-1) given
     * positions j+1..d; `rest` lists the conditioning values in diagonal order.
     */
    double conditional_density(int j, double uj, std::span<const double> rest) const
    {
        thread_local detail::VineWorkspace ws;
        load_conditional(ws, j, uj, rest);
        detail::eval_columns(*this, ws, j);
        return std::exp(detail::eval_column(*this, ws, j - 1));
    }

    double conditional_cdf(int j, double uj, std::span<const double> rest) const
    {
        thread_local detail::VineWorkspace ws;
        load_conditional(ws, j, uj, rest);
        detail::eval_columns(*this, ws, j - 1);
        return ws.D(j - 1, j);
    }

    /// Margin of diagonal positions j+1..d (1-based), relabeled in ascending original order.
    RVineModel sub_model(int j) const
    {
        if (j == 0) return *this;
        if (j < 0 || j > dim() - 1) throw ModelError("sub_model level out of range");
        const int d = dim(), k = d - j;
        std::vector<BivariateCopula> cops(k * k);
        for (int c = 0; c < k; ++c)
            for (int r = c + 1; r < k; ++r) cops[c * k + r] = at(c + j, r + j);
        return RVineModel(s_.margin(j), std::move(cops), std::min(trunc_, k - 1));
    }

    RVineModel truncate(int k) const
    {
        const int d = dim();
        if (k < 0 || k > d - 1) throw ModelError("truncation level must be in [0, d-1]");
        auto cops = cops_;
        for (int j = 0; j < d; ++j)
            for (int i = j + 1; i < d - k; ++i) cops[j * d + i] = BivariateCopula();
        return RVineModel(s_, std::move(cops), k);
    }

    friend bool operator==(const RVineModel& a, const RVineModel& b)
    {
        return a.s_ == b.s_ && a.trunc_ == b.trunc_ && a.cops_ == b.cops_;
    }

private:
    void check_dim(const Matrix& data) const
    {
        if (data.cols() != dim())
            throw DimensionError("data has " + std::to_string(data.cols()) + " columns, model has dimension " +
                                 std::to_string(dim()));
    }

    void load(detail::VineWorkspace& ws, std::span<const double> u) const
    {
        if (static_cast<int>(u.size()) != dim()) throw DimensionError("point dimension does not match the model");
        ws.reset(dim());
        for (int k = 0; k < dim(); ++k) ws.u[k] = clamp_unit(u[k]);
    }

    void load_conditional(detail::VineWorkspace& ws, int j, double uj, std::span<const double> rest) const
    {
        const int d = dim();
        if (j < 1 || j > d - 1) throw ModelError("conditional level must be in [1, d-1]");
        if (static_cast<int>(rest.size()) != d - j) throw DimensionError("conditioning vector has the wrong length");
        ws.reset(d);
        ws.u[s_.diagonal(j - 1)] = clamp_unit(uj);
        for (int p = j; p < d; ++p) ws.u[s_.diagonal(p)] = clamp_unit(rest[p - j]);
    }

    RVineStructure s_;
    std::vector<BivariateCopula> cops_;
    int trunc_ = 0;
    std::optional<int> nparam_;
};

inline RVineModel truncate(const RVineModel& m, int k) { return m.truncate(k); }

/**
 * Model from a tree sequence; `copulas[t][k]` belongs to `trees[t][k]` and
 * takes (u_a, u_b) in that order.
 */
inline RVineModel model_from_trees(int d, const std::vector<std::vector<VineEdge>>& trees,
                                   const std::vector<std::vector<BivariateCopula>>& copulas, int truncation = -1)
{
    std::vector<std::vector<EdgeSlot>> slots;
    RVineStructure s = RVineStructure::from_trees(d, trees, &slots);
    std::vector<BivariateCopula> cops(d * d);
    for (std::size_t t = 0; t < trees.size(); ++t)
        for (std::size_t k = 0; k < trees[t].size(); ++k) {
            const EdgeSlot sl = slots[t][k];
            cops[sl.col * d + sl.row] = sl.a_first ? copulas[t][k] : copulas[t][k].swapped();
        }
    return RVineModel(std::move(s), std::move(cops), truncation);
}

/// Partial correlation of (a, b) given `cond` implied by the correlation matrix.
inline double partial_correlation(const Matrix& sigma, int a, int b, const std::vector<int>& cond)
{
    std::vector<int> idx{a, b};
    idx.insert(idx.end(), cond.begin(), cond.end());
    const int k = static_cast<int>(idx.size());
    Matrix sub(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = sigma(idx[r], idx[c]);
    const Matrix p = sub.inverse();
    return -p(0, 1) / std::sqrt(p(0, 0) * p(1, 1));
}

/**
 * Vine on `s` equivalent to the Gaussian copula (nu <= 0) or the t copula
 * with nu degrees of freedom; the t df in tree m is nu + m - 1.
 */
inline RVineModel elliptical_vine(const RVineStructure& s, const Matrix& sigma, double nu = 0.0)
{
    const int d = s.dim();
    if (sigma.rows() != d || sigma.cols() != d) throw DimensionError("correlation matrix does not match dimension");
    std::vector<BivariateCopula> cops(d * d);
    for (int j = 0; j < d - 1; ++j)
        for (int i = j + 1; i < d; ++i) {
            const double rho = std::clamp(partial_correlation(sigma, s.diagonal(j), s(i, j), s.conditioning(j, i)),
                                          -0.99999, 0.99999);
            const int tree = s.tree_of_row(i);
            cops[j * d + i] = nu > 0.0 ? BivariateCopula(Family::StudentT, 0, {rho, nu + tree - 1})
                                       : BivariateCopula(Family::Gaussian, 0, {rho});
        }
    return RVineModel(s, std::move(cops));
}

inline RVineModel gaussian_vine(const RVineStructure& s, const Matrix& sigma) { return elliptical_vine(s, sigma); }
inline RVineModel t_vine(const RVineStructure& s, const Matrix& sigma, double nu)
{
    if (!(nu >= kNuMin)) throw ParameterDomainError("t copula needs nu >= 2");
    return elliptical_vine(s, sigma, nu);
}

/// Uniformly distributed correlation matrix (onion method, LKJ with eta = 1).
inline Matrix random_correlation(int d, Rng& rng)
{
    if (d < 2) throw DimensionError("random_correlation needs d >= 2");
    auto beta = [&](double a, double b) {
        std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
        const double x = ga(rng), y = gb(rng);
        return x / (x + y);
    };
    double bpar = 1.0 + (d - 2) / 2.0;
    Matrix r = Matrix::Identity(d, d);
    r(0, 1) = r(1, 0) = 2.0 * beta(bpar, bpar) - 1.0;
    for (int k = 2; k < d; ++k) {
        bpar -= 0.5;
        const double y = beta(k / 2.0, bpar);
        Vector z(k);
        for (int i = 0; i < k; ++i) z[i] = rng.normal();
        z *= std::sqrt(y) / z.norm();
        const Matrix a = r.topLeftCorner(k, k).llt().matrixL();
        const Vector w = a * z;
        for (int i = 0; i < k; ++i) r(i, k) = r(k, i) = w[i];
    }
    return r;
}

}  // namespace vinedist

#endif
