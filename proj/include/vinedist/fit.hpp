#ifndef VINEDIST_FIT_HPP
#define VINEDIST_FIT_HPP

/** @file
 * Sequential (tree-by-tree) estimation of simplified vines, fixed-structure
 * fits, and elliptical copulas written as vines.
 */

#include "bicop.hpp"
#include "parallel.hpp"
#include "rvine.hpp"

#include <Eigen/Eigenvalues>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vinedist {

enum class StructureClass { RVine, CVine, DVine, GaussianCopula, TCopula };

inline std::string_view structure_class_name(StructureClass c)
{
    switch (c) {
    case StructureClass::RVine: return "rvine";
    case StructureClass::CVine: return "cvine";
    case StructureClass::DVine: return "dvine";
    case StructureClass::GaussianCopula: return "gaussian";
    case StructureClass::TCopula: return "tcopula";
    }
    return "?";
}

inline StructureClass structure_class_from_name(std::string_view s)
{
    for (auto c : {StructureClass::RVine, StructureClass::CVine, StructureClass::DVine, StructureClass::GaussianCopula,
                   StructureClass::TCopula})
        if (structure_class_name(c) == s) return c;
    if (s == "gaussian_copula") return StructureClass::GaussianCopula;
    if (s == "t_copula") return StructureClass::TCopula;
    throw ModelError("unknown structure class '" + std::string(s) + "'");
}

inline std::vector<Family> default_familyset()
{
    return {Family::Gaussian, Family::StudentT, Family::Clayton, Family::Gumbel, Family::Frank, Family::Joe};
}

struct FitConfig {
    std::vector<Family> familyset = default_familyset();
    std::optional<RVineStructure> structure;
    StructureClass structure_class = StructureClass::RVine;
    std::optional<int> truncation_level;
};

namespace detail {

inline void check_fit_data(const Matrix& data, int min_rows = 30)
{
    if (data.cols() < 2) throw DimensionError("need at least two variables");
    check_copula_data(data, min_rows);
}

inline std::vector<double> column_of(const Matrix& data, int k)
{
    return std::vector<double>(data.col(k).data(), data.col(k).data() + data.rows());
}

/// Hamiltonian path maximizing the summed weight (exhaustive up to 9 nodes, greedy above).
inline std::vector<int> best_path(const Matrix& w)
{
    const int n = static_cast<int>(w.rows());
    std::vector<int> best(n);
    std::iota(best.begin(), best.end(), 0);
    auto score = [&](const std::vector<int>& p) {
        double s = 0.0;
        for (int i = 0; i + 1 < n; ++i) s += w(p[i], p[i + 1]);
        return s;
    };
    if (n <= 9) {
        std::vector<int> p = best;
        double bs = score(p);
        while (std::next_permutation(p.begin(), p.end())) {
            if (p.front() > p.back()) continue;
            const double s = score(p);
            if (s > bs) {
                bs = s;
                best = p;
            }
        }
        return best;
    }
    int bi = 0, bk = 1;
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
            if (w(i, k) > w(bi, bk)) bi = i, bk = k;
    std::vector<int> path{bi, bk};
    std::vector<bool> used(n, false);
    used[bi] = used[bk] = true;
    while (static_cast<int>(path.size()) < n) {
        int pick = -1;
        bool front = false;
        double bw = -1.0;
        for (int v = 0; v < n; ++v) {
            if (used[v]) continue;
            if (w(path.front(), v) > bw) bw = w(path.front(), v), pick = v, front = true;
            if (w(path.back(), v) > bw) bw = w(path.back(), v), pick = v, front = false;
        }
        used[pick] = true;
        if (front) path.insert(path.begin(), pick);
        else path.push_back(pick);
    }
    return path;
}

}  // namespace detail

/**
 * Tree-by-tree selection and estimation.  Each call to next_tree() picks the
 * next tree (maximum spanning tree on |tau| of the pseudo-observations,
 * restricted to stars or paths for C- and D-vines) and, if requested, fits
 * its pair-copulas by AIC over the family set.
 */
class TreewiseFit {
public:
    TreewiseFit(const Matrix& data, StructureClass cls = StructureClass::RVine,
                std::vector<Family> familyset = default_familyset())
        : d_(static_cast<int>(data.cols())), cls_(cls), fams_(std::move(familyset))
    {
        detail::check_fit_data(data);
        if (cls != StructureClass::RVine && cls != StructureClass::CVine && cls != StructureClass::DVine)
            throw ModelError("tree-wise fitting needs an rvine, cvine or dvine class");
        for (int v = 0; v < d_; ++v) {
            Node n;
            n.edge = {v, v, {}};
            n.ha = detail::column_of(data, v);
            n.hb = n.ha;
            nodes_.push_back(std::move(n));
        }
        for (int v = 0; v < d_; ++v) {
            const auto& x = nodes_[v].ha;
            if (std::all_of(x.begin(), x.end(), [&](double y) { return y == x[0]; }))
                throw DataError("column " + std::to_string(v + 1) + " is constant");
        }
    }

    int dim() const { return d_; }
    int trees_selected() const { return static_cast<int>(trees_.size()); }
    int trees_estimated() const { return estimated_; }
    const std::vector<std::vector<VineEdge>>& trees() const { return trees_; }

    void next_tree(bool estimate = true)
    {
        const int t = trees_selected();
        if (t >= d_ - 1) throw ModelError("all trees already selected");
        if (estimate && estimated_ != t) throw ModelError("trees must be estimated in order");
        const int n = static_cast<int>(nodes_.size());

        struct Candidate {
            int i, k;
            VineEdge e;
            bool a_from_i;
            double tau = 0.0;
        };
        std::vector<Candidate> cand;
        for (int i = 0; i < n; ++i)
            for (int k = i + 1; k < n; ++k) {
                if (t == 0) {
                    cand.push_back({i, k, VineEdge{i, k, {}}, true});
                    continue;
                }
                auto e = join_edges(nodes_[i].edge, nodes_[k].edge);
                if (!e) continue;
                const bool a_in_i = holds(nodes_[i].edge, e->a);
                const int ai = a_in_i ? i : k, bi = a_in_i ? k : i;
                if (!holds(nodes_[ai].edge, e->a) || !holds(nodes_[bi].edge, e->b)) continue;
                cand.push_back({i, k, *e, a_in_i});
            }
        parallel_for(static_cast<int>(cand.size()), [&](int c) {
            const auto& x = cand[c];
            cand[c].tau = kendall_tau(values(x.a_from_i ? x.i : x.k, x.e.a), values(x.a_from_i ? x.k : x.i, x.e.b));
        });
        Matrix w = Matrix::Constant(n, n, -1.0);
        std::vector<std::vector<int>> index(n, std::vector<int>(n, -1));
        for (int c = 0; c < static_cast<int>(cand.size()); ++c) {
            w(cand[c].i, cand[c].k) = w(cand[c].k, cand[c].i) = std::abs(cand[c].tau);
            index[cand[c].i][cand[c].k] = index[cand[c].k][cand[c].i] = c;
        }

        std::vector<std::pair<int, int>> chosen;
        if (cls_ == StructureClass::RVine || (cls_ == StructureClass::DVine && t > 0)) {
            chosen = maximum_spanning_tree(n, [&](int i, int k) -> std::optional<double> {
                if (index[i][k] < 0) return std::nullopt;
                return w(i, k);
            });
        } else if (cls_ == StructureClass::DVine) {
            const auto path = detail::best_path(w);
            for (int p = 0; p + 1 < n; ++p) chosen.push_back({std::min(path[p], path[p + 1]), std::max(path[p], path[p + 1])});
        } else {
            int root = -1;
            double best = -1.0;
            for (int r = 0; r < n; ++r) {
                double s = 0.0;
                bool ok = true;
                for (int k = 0; k < n && ok; ++k)
                    if (k != r) {
                        if (index[r][k] < 0) ok = false;
                        else s += w(r, k);
                    }
                if (ok && s > best) best = s, root = r;
            }
            if (root < 0) throw ModelError("no admissible C-vine root");
            for (int k = 0; k < n; ++k)
                if (k != root) chosen.push_back({std::min(root, k), std::max(root, k)});
        }

        std::vector<Node> next(chosen.size());
        std::vector<BivariateCopula> cops(chosen.size());
        parallel_for(static_cast<int>(chosen.size()), [&](int q) {
            const Candidate& c = cand[index[chosen[q].first][chosen[q].second]];
            const auto& ua = values(c.a_from_i ? c.i : c.k, c.e.a);
            const auto& ub = values(c.a_from_i ? c.k : c.i, c.e.b);
            BivariateCopula cop;
            if (estimate) cop = select_pair(ua, ub, fams_, c.tau).copula;
            cops[q] = cop;
            Node& nd = next[q];
            nd.edge = c.e;
            if (t + 1 < d_ - 1) {
                nd.ha.resize(ua.size());
                nd.hb.resize(ua.size());
                for (std::size_t r = 0; r < ua.size(); ++r) {
                    const auto ev = cop.evaluate(ua[r], ub[r]);
                    nd.ha[r] = ev.h2;
                    nd.hb[r] = ev.h1;
                }
            }
        });
        std::vector<VineEdge> tree;
        for (auto& nd : next) tree.push_back(nd.edge);
        trees_.push_back(std::move(tree));
        cops_.push_back(std::move(cops));
        nodes_ = std::move(next);
        if (estimate) ++estimated_;
    }

    /// Model with the estimated trees; remaining trees are selected on the
    /// pseudo-observations and carry independence copulas.
    RVineModel model() const
    {
        TreewiseFit rest = *this;
        while (rest.trees_selected() < d_ - 1) rest.next_tree(false);
        if (d_ == 1) return RVineModel::independence(1);
        return model_from_trees(d_, rest.trees_, rest.cops_, std::max(estimated_, 0));
    }

private:
    struct Node {
        VineEdge edge;
        std::vector<double> ha, hb;  // C(a | b, D) and C(b | a, D)
    };

    static bool holds(const VineEdge& e, int v) { return e.a == v || e.b == v; }

    const std::vector<double>& values(int node, int var) const
    {
        const Node& n = nodes_[node];
        return n.edge.a == var ? n.ha : n.hb;
    }

    int d_;
    StructureClass cls_;
    std::vector<Family> fams_;
    std::vector<Node> nodes_;
    std::vector<std::vector<VineEdge>> trees_;
    std::vector<std::vector<BivariateCopula>> cops_;
    int estimated_ = 0;
};

/**
 * Fits pair-copulas along a fixed structure, tree by tree up to `truncation`.
 * `fit_edge(col, row, a, b)` returns the copula for (a, b), a being the
 * column's diagonal side.
 */
template <class EdgeFit>
RVineModel fit_on_structure(const Matrix& data, const RVineStructure& s, int truncation, EdgeFit&& fit_edge)
{
    const int d = s.dim();
    if (data.cols() != d) throw DimensionError("data dimension does not match the structure");
    truncation = std::clamp(truncation, 0, d - 1);
    std::vector<std::vector<double>> dir(d * (d + 1)), ind(d * (d + 1));
    auto D = [&](int j, int r) -> std::vector<double>& { return dir[j * (d + 1) + r]; };
    auto I = [&](int j, int r) -> std::vector<double>& { return ind[j * (d + 1) + r]; };
    for (int j = 0; j < d; ++j) D(j, d) = detail::column_of(data, s.diagonal(j));
    std::vector<BivariateCopula> cops(d * d);
    for (int t = 1; t <= truncation; ++t) {
        const int i = d - t;
        parallel_for(i, [&](int j) {
            const auto src = s.source(j, i);
            const auto& a = D(j, i + 1);
            const auto& b = src.direct ? D(src.column, i + 1) : I(src.column, i + 1);
            BivariateCopula c = fit_edge(j, i, std::span<const double>(a), std::span<const double>(b));
            cops[j * d + i] = c;
            if (t == truncation) return;
            auto& hd = D(j, i);
            hd.resize(a.size());
            const bool need = s.needs_indirect(j, i);
            if (need) I(j, i).resize(a.size());
            for (std::size_t r = 0; r < a.size(); ++r) {
                const auto ev = c.evaluate(a[r], b[r]);
                hd[r] = ev.h2;
                if (need) I(j, i)[r] = ev.h1;
            }
        });
    }
    return RVineModel(s, std::move(cops), truncation);
}

/// Family selection (AIC) and estimation on a given structure.
inline RVineModel fit_structure(const Matrix& data, const RVineStructure& s,
                                const std::vector<Family>& familyset = default_familyset(),
                                std::optional<int> truncation = std::nullopt)
{
    detail::check_fit_data(data);
    return fit_on_structure(data, s, truncation.value_or(s.dim() - 1),
                            [&](int, int, std::span<const double> a, std::span<const double> b) {
                                return select_pair(a, b, familyset).copula;
                            });
}

/// Re-estimates the parameters of `model` on new data, keeping structure, families and rotations.
inline RVineModel refit_parameters(const RVineModel& model, const Matrix& data)
{
    detail::check_fit_data(data);
    return fit_on_structure(data, model.structure(), model.truncation_level(),
                            [&](int j, int i, std::span<const double> a, std::span<const double> b) {
                                const BivariateCopula& c = model.at(j, i);
                                if (c.is_independence()) return c;
                                return fit_pair(a, b, c.family(), c.rotation()).copula;
                            });
}

/// Nearest correlation matrix by eigenvalue clipping and rescaling.
inline Matrix nearest_correlation(const Matrix& r, double floor = 1e-6)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(r);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed in correlation projection");
    Vector ev = es.eigenvalues().cwiseMax(floor);
    Matrix out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const Vector s = out.diagonal().cwiseSqrt().cwiseInverse();
    out = s.asDiagonal() * out * s.asDiagonal();
    out.diagonal().setOnes();
    if (out.llt().info() != Eigen::Success) throw NumericalError("correlation projection is not positive definite");
    return out;
}

/// Correlation matrix from pairwise Kendall's tau, rho = sin(pi tau / 2).
inline Matrix tau_correlation(const Matrix& data)
{
    const int d = static_cast<int>(data.cols());
    Matrix r = Matrix::Identity(d, d);
    std::vector<std::vector<double>> cols(d);
    for (int k = 0; k < d; ++k) cols[k] = detail::column_of(data, k);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < d; ++i)
        for (int k = i + 1; k < d; ++k) pairs.push_back({i, k});
    parallel_for(static_cast<int>(pairs.size()), [&](int p) {
        const auto [i, k] = pairs[p];
        r(i, k) = r(k, i) = std::sin(std::numbers::pi / 2.0 * kendall_tau(cols[i], cols[k]));
    });
    return nearest_correlation(r);
}

inline RVineStructure default_elliptical_structure(int d)
{
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    return RVineStructure::dvine(order);
}

inline RVineModel fit_gaussian_copula(const Matrix& data, std::optional<RVineStructure> structure = std::nullopt)
{
    detail::check_fit_data(data);
    const int d = static_cast<int>(data.cols());
    return gaussian_vine(structure.value_or(default_elliptical_structure(d)), tau_correlation(data));
}

/// Log-likelihood of a t copula with correlation r and df nu.
inline double t_copula_loglik(const Matrix& data, const Matrix& r, double nu)
{
    const int d = static_cast<int>(data.cols());
    Eigen::LLT<Matrix> llt(r);
    const Matrix l = llt.matrixL();
    double logdet = 0.0;
    for (int k = 0; k < d; ++k) logdet += 2.0 * std::log(l(k, k));
    const StudentT t(nu);
    const double c = std::lgamma((nu + d) / 2) + (d - 1) * std::lgamma(nu / 2) - d * std::lgamma((nu + 1) / 2) -
                     0.5 * logdet;
    double s = 0.0;
    Vector x(d);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        double marg = 0.0;
        for (int k = 0; k < d; ++k) {
            x[k] = t.quantile(clamp_unit(data(i, k)));
            marg += (nu + 1) / 2 * std::log1p(x[k] * x[k] / nu);
        }
        const Vector z = l.triangularView<Eigen::Lower>().solve(x);
        s += c - (nu + d) / 2 * std::log1p(z.squaredNorm() / nu) + marg;
    }
    return s;
}

/// t copula with tau-based correlation and profiled df, as a vine (tree m df nu + m - 1).
inline RVineModel fit_t_copula(const Matrix& data, std::optional<RVineStructure> structure = std::nullopt)
{
    detail::check_fit_data(data);
    const int d = static_cast<int>(data.cols());
    const Matrix r = tau_correlation(data);
    auto [nu, f] = minimize_scalar([&](double v) { return -t_copula_loglik(data, r, v); }, kNuMin, kNuMax, 20);
    (void)f;
    return t_vine(structure.value_or(default_elliptical_structure(d)), r, nu)
        .with_parameter_count(d * (d - 1) / 2 + 1);
}

/// Fits a model of the configured class.
inline RVineModel fit_model(const Matrix& data, const FitConfig& cfg = {})
{
    detail::check_fit_data(data);
    const int d = static_cast<int>(data.cols());
    if (cfg.truncation_level && (*cfg.truncation_level < 0 || *cfg.truncation_level > d - 1))
        throw ModelError("truncation level must be in [0, d-1]");
    if (cfg.structure && cfg.structure->dim() != d)
        throw DimensionError("fixed structure dimension does not match the data");
    switch (cfg.structure_class) {
    case StructureClass::GaussianCopula: return fit_gaussian_copula(data, cfg.structure);
    case StructureClass::TCopula: return fit_t_copula(data, cfg.structure);
    default: break;
    }
    if (cfg.structure) {
        if (cfg.structure_class != StructureClass::RVine)
            throw ModelError("a fixed structure requires the rvine, gaussian or tcopula class");
        return fit_structure(data, *cfg.structure, cfg.familyset, cfg.truncation_level);
    }
    TreewiseFit tf(data, cfg.structure_class, cfg.familyset);
    const int k = cfg.truncation_level.value_or(d - 1);
    for (int t = 0; t < k; ++t) tf.next_tree(true);
    return tf.model();
}

inline RVineModel fit_dissmann(const Matrix& data, const FitConfig& cfg = {}) { return fit_model(data, cfg); }

}  // namespace vinedist

#endif
