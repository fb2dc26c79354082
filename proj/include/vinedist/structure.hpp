#ifndef VINEDIST_STRUCTURE_HPP
#define VINEDIST_STRUCTURE_HPP

/** @file
 * R-vine structure matrices.
 *
 * Layout (0-based, variables 0..d-1).  M is lower triangular; column j holds
 * the edges {M(j,j), M(i,j) ; M(i+1,j), ..., M(d-1,j)} for i = j+1..d-1.
 * Row i belongs to tree d-1-i+1 = d-i (1-based), so the last row is tree 1.
 * The diagonal (M(0,0), ..., M(d-1,d-1)) is the variable ordering used by
 * all conditional objects: position p is conditioned on positions p+1..d-1.
 */

#include "core.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <random>
#include <string>
#include <vector>

namespace vinedist {

/// An edge {a, b ; conditioning}.
struct VineEdge {
    int a = 0, b = 0;
    std::vector<int> conditioning;
};

/// Position of a tree-list edge in the matrix; `a_first` tells whether the
/// edge's `a` is the diagonal (first pair-copula argument) of the column.
struct EdgeSlot {
    int col = 0, row = 0;
    bool a_first = true;
};

class RVineStructure {
public:
    /// Where the second argument of edge (col, row) comes from.
    struct Source {
        int column = 0;
        bool direct = true;  // true: C(y | ...) of that column; false: the other h-output
    };

    RVineStructure() = default;

    /// Row-major d*d matrix with 0-based labels; entries above the diagonal are ignored.
    RVineStructure(int d, std::vector<int> matrix) : d_(d), m_(std::move(matrix))
    {
        if (d < 1) throw ModelError("structure dimension must be at least 1");
        if (static_cast<int>(m_.size()) != d * d) throw ModelError("structure matrix must have d*d entries");
        for (int r = 0; r < d; ++r)
            for (int c = r + 1; c < d; ++c) m_[r * d + c] = -1;
        validate();
        derive();
    }

    /**
     * Builds the matrix from a tree sequence (trees[t] lists the edges of tree
     * t+1).  Throws ModelError if the sequence is not a regular vine.
     */
    static RVineStructure from_trees(int d, const std::vector<std::vector<VineEdge>>& trees,
                                     std::vector<std::vector<EdgeSlot>>* slots = nullptr)
    {
        std::vector<std::vector<EdgeSlot>> local;
        if (!slots) slots = &local;
        if (static_cast<int>(trees.size()) != d - 1) throw ModelError("need d-1 trees");
        for (int t = 0; t < d - 1; ++t)
            if (static_cast<int>(trees[t].size()) != d - 1 - t)
                throw ModelError("tree " + std::to_string(t + 1) + " must have " + std::to_string(d - 1 - t) + " edges");
        std::vector<std::vector<bool>> used(d - 1);
        for (int t = 0; t < d - 1; ++t) used[t].assign(trees[t].size(), false);
        slots->assign(d - 1, {});
        for (int t = 0; t < d - 1; ++t) (*slots)[t].resize(trees[t].size());
        std::vector<int> m(d * d, -1);
        std::vector<bool> removed(d, false);
        for (int col = 0; col < d - 1; ++col) {
            const int top = d - 2 - col;
            int top_idx = -1;
            for (int k = 0; k < static_cast<int>(trees[top].size()); ++k)
                if (!used[top][k]) top_idx = k;
            if (top_idx < 0) throw ModelError("invalid tree sequence");
            const VineEdge& te = trees[top][top_idx];
            const int x = std::min(te.a, te.b);
            m[col * d + col] = x;
            for (int t = top; t >= 0; --t) {
                int hit = -1;
                for (int k = 0; k < static_cast<int>(trees[t].size()); ++k) {
                    if (used[t][k]) continue;
                    const VineEdge& e = trees[t][k];
                    if (e.a == x || e.b == x) {
                        if (hit >= 0) throw ModelError("invalid tree sequence (variable in several edges)");
                        hit = k;
                    }
                }
                if (hit < 0) throw ModelError("invalid tree sequence (missing edge)");
                used[t][hit] = true;
                const VineEdge& e = trees[t][hit];
                const int row = d - 1 - t;
                m[row * d + col] = e.a == x ? e.b : e.a;
                (*slots)[t][hit] = EdgeSlot{col, row, e.a == x};
            }
            removed[x] = true;
        }
        for (int v = 0; v < d; ++v)
            if (!removed[v]) m[(d - 1) * d + (d - 1)] = v;
        RVineStructure s(d, m);
        // conditioning sets must agree with the input
        for (int t = 0; t < d - 1; ++t)
            for (std::size_t k = 0; k < trees[t].size(); ++k) {
                const EdgeSlot sl = (*slots)[t][k];
                auto cond = s.conditioning(sl.col, sl.row);
                auto want = trees[t][k].conditioning;
                std::sort(cond.begin(), cond.end());
                std::sort(want.begin(), want.end());
                if (cond != want) throw ModelError("invalid tree sequence (conditioning sets)");
            }
        return s;
    }

    /// D-vine along the path order[0] - order[1] - ... - order[d-1].
    static RVineStructure dvine(const std::vector<int>& order)
    {
        const int d = static_cast<int>(order.size());
        std::vector<std::vector<VineEdge>> trees(std::max(d - 1, 0));
        for (int t = 0; t < d - 1; ++t)
            for (int k = 0; k + t + 1 < d; ++k)
                trees[t].push_back({order[k], order[k + t + 1],
                                    std::vector<int>(order.begin() + k + 1, order.begin() + k + t + 1)});
        if (d == 1) return RVineStructure(1, {order[0]});
        return from_trees(d, trees);
    }

    /// C-vine with root order[t] in tree t+1.
    static RVineStructure cvine(const std::vector<int>& order)
    {
        const int d = static_cast<int>(order.size());
        std::vector<std::vector<VineEdge>> trees(std::max(d - 1, 0));
        for (int t = 0; t < d - 1; ++t)
            for (int k = t + 1; k < d; ++k)
                trees[t].push_back({order[t], order[k], std::vector<int>(order.begin(), order.begin() + t)});
        if (d == 1) return RVineStructure(1, {order[0]});
        return from_trees(d, trees);
    }

    int dim() const { return d_; }
    int operator()(int row, int col) const { return m_[row * d_ + col]; }
    int diagonal(int pos) const { return m_[pos * d_ + pos]; }
    const std::vector<int>& order() const { return order_; }
    int position(int var) const { return pos_[var]; }
    const std::vector<int>& matrix() const { return m_; }

    Source source(int col, int row) const { return src_[col * d_ + row]; }
    bool needs_indirect(int col, int row) const { return need_ind_[col * d_ + row] != 0; }

    static int tree_of_row(int d, int row) { return d - row; }
    int tree_of_row(int row) const { return d_ - row; }
    int row_of_tree(int tree) const { return d_ - tree; }

    std::vector<int> conditioning(int col, int row) const
    {
        std::vector<int> s;
        for (int r = row + 1; r < d_; ++r) s.push_back((*this)(r, col));
        return s;
    }

    /// Original labels of the margin formed by diagonal positions first..d-1, ascending.
    std::vector<int> margin_variables(int first) const
    {
        std::vector<int> v(order_.begin() + first, order_.end());
        std::sort(v.begin(), v.end());
        return v;
    }

    /// Structure of the margin on diagonal positions first..d-1, relabeled to 0..d-first-1.
    RVineStructure margin(int first) const
    {
        if (first == 0) return *this;
        const int k = d_ - first;
        const auto vars = margin_variables(first);
        std::vector<int> relabel(d_, -1);
        for (int i = 0; i < k; ++i) relabel[vars[i]] = i;
        std::vector<int> m(k * k, -1);
        for (int c = 0; c < k; ++c)
            for (int r = c; r < k; ++r) m[r * k + c] = relabel[(*this)(r + first, c + first)];
        return RVineStructure(k, m);
    }

    std::string str() const
    {
        std::ostringstream os;
        for (int r = 0; r < d_; ++r) {
            for (int c = 0; c <= r; ++c) os << (c ? " " : "") << (*this)(r, c);
            os << '\n';
        }
        return os.str();
    }

    friend bool operator==(const RVineStructure& a, const RVineStructure& b) { return a.d_ == b.d_ && a.m_ == b.m_; }

private:
    void validate()
    {
        const int d = d_;
        std::vector<int> seen(d, 0);
        for (int p = 0; p < d; ++p) {
            const int v = diagonal(p);
            if (v < 0 || v >= d || seen[v]++) throw ModelError("structure diagonal must be a permutation");
        }
        pos_.assign(d, 0);
        order_.resize(d);
        for (int p = 0; p < d; ++p) {
            pos_[diagonal(p)] = p;
            order_[p] = diagonal(p);
        }
        for (int c = 0; c < d; ++c) {
            std::vector<int> col, later;
            for (int r = c + 1; r < d; ++r) col.push_back((*this)(r, c));
            for (int p = c + 1; p < d; ++p) later.push_back(diagonal(p));
            std::sort(col.begin(), col.end());
            std::sort(later.begin(), later.end());
            if (col != later)
                throw ModelError("structure column " + std::to_string(c + 1) +
                                 " violates the nesting property");
        }
        // proximity: the second argument of every edge must be produced by an edge one tree lower
        for (int j = 0; j < d - 1; ++j)
            for (int i = d - 2; i > j; --i) {
                const int x = (*this)(i, j);
                std::vector<int> S;
                for (int r = i + 1; r < d; ++r) S.push_back((*this)(r, j));
                int y = x;
                for (int s : S)
                    if (pos_[s] < pos_[y]) y = s;
                const int c = pos_[y];
                std::vector<int> have;
                bool ok = true;
                if (x == y) {
                    for (int r = i + 1; r < d; ++r) have.push_back((*this)(r, c));
                    std::vector<int> want = S;
                    std::sort(have.begin(), have.end());
                    std::sort(want.begin(), want.end());
                    ok = have == want;
                } else {
                    ok = (*this)(i + 1, c) == x;
                    have.push_back(y);
                    for (int r = i + 2; r < d; ++r) have.push_back((*this)(r, c));
                    std::vector<int> want = S;
                    std::sort(have.begin(), have.end());
                    std::sort(want.begin(), want.end());
                    ok = ok && have == want;
                }
                if (!ok)
                    throw ModelError("structure violates the proximity condition at column " + std::to_string(j + 1) +
                                     ", row " + std::to_string(i + 1));
            }
    }

    void derive()
    {
        const int d = d_;
        src_.assign(d * d, Source{});
        need_ind_.assign(d * d, 0);
        for (int j = 0; j < d - 1; ++j)
            for (int i = d - 1; i > j; --i) {
                const int x = (*this)(i, j);
                int y = x;
                for (int r = i + 1; r < d; ++r)
                    if (pos_[(*this)(r, j)] < pos_[y]) y = (*this)(r, j);
                Source s{pos_[y], x == y};
                src_[j * d + i] = s;
                if (!s.direct) need_ind_[s.column * d + (i + 1)] = 1;
            }
    }

    int d_ = 0;
    std::vector<int> m_;
    std::vector<int> pos_;
    std::vector<int> order_;
    std::vector<Source> src_;
    std::vector<char> need_ind_;
};

/**
 * Prim's maximum spanning tree over n nodes.  `weight(i, k)` returns nullopt
 * for pairs that may not be joined.  Ties go to the smaller (i, k) pair.
 * Throws ModelError if the admissible graph is disconnected.
 */
inline std::vector<std::pair<int, int>> maximum_spanning_tree(
    int n, const std::function<std::optional<double>(int, int)>& weight)
{
    std::vector<std::vector<std::optional<double>>> w(n, std::vector<std::optional<double>>(n));
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k) w[i][k] = w[k][i] = weight(i, k);
    std::vector<bool> in(n, false);
    in[0] = n > 0;
    std::vector<std::pair<int, int>> edges;
    for (int step = 1; step < n; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        std::pair<int, int> pick{-1, -1};
        for (int i = 0; i < n; ++i) {
            if (!in[i]) continue;
            for (int k = 0; k < n; ++k) {
                if (in[k] || !w[i][k]) continue;
                const std::pair<int, int> p{std::min(i, k), std::max(i, k)};
                if (*w[i][k] > best || (*w[i][k] == best && p < pick)) {
                    best = *w[i][k];
                    pick = p;
                }
            }
        }
        if (pick.first < 0) throw ModelError("no admissible spanning tree");
        in[pick.first] = in[pick.second] = true;
        edges.push_back(pick);
    }
    return edges;
}

/// Full variable set {a, b} union conditioning of an edge, sorted.
inline std::vector<int> constraint_set(const VineEdge& e)
{
    std::vector<int> s = e.conditioning;
    s.push_back(e.a);
    s.push_back(e.b);
    std::sort(s.begin(), s.end());
    return s;
}

/// Whether two edges of one tree may be joined in the next (proximity).
inline std::optional<VineEdge> join_edges(const VineEdge& x, const VineEdge& y)
{
    const auto sx = constraint_set(x), sy = constraint_set(y);
    std::vector<int> common, diff;
    std::set_intersection(sx.begin(), sx.end(), sy.begin(), sy.end(), std::back_inserter(common));
    if (common.size() + 1 != sx.size()) return std::nullopt;
    std::set_symmetric_difference(sx.begin(), sx.end(), sy.begin(), sy.end(), std::back_inserter(diff));
    return VineEdge{diff[0], diff[1], common};
}

/// Random regular vine: each tree is a spanning tree with random weights.
template <class URng>
RVineStructure random_structure(int d, URng& rng)
{
    if (d == 1) return RVineStructure(1, {0});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<VineEdge>> trees;
    std::vector<VineEdge> nodes;
    auto first = maximum_spanning_tree(d, [&](int, int) { return std::optional<double>(unif(rng)); });
    for (auto [i, k] : first) nodes.push_back({i, k, {}});
    trees.push_back(nodes);
    for (int t = 1; t < d - 1; ++t) {
        const auto prev = trees.back();
        auto tree = maximum_spanning_tree(static_cast<int>(prev.size()), [&](int i, int k) -> std::optional<double> {
            if (!join_edges(prev[i], prev[k])) return std::nullopt;
            return unif(rng);
        });
        std::vector<VineEdge> next;
        for (auto [i, k] : tree) next.push_back(*join_edges(prev[i], prev[k]));
        trees.push_back(next);
    }
    return RVineStructure::from_trees(d, trees);
}

}  // namespace vinedist

#endif
