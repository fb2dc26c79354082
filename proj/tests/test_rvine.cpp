#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "vinedist/math.hpp"

using namespace vinedist;
using namespace testutil;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<std::vector<double>> grid3()
{
    const double g[] = {0.05, 0.27, 0.5, 0.73, 0.95};
    std::vector<std::vector<double>> pts;
    for (double a : g)
        for (double b : g)
            for (double c : g) pts.push_back({a, b, c});
    return pts;
}

std::vector<double> column(const Matrix& m, int k)
{
    return std::vector<double>(m.col(k).data(), m.col(k).data() + m.rows());
}

}  // namespace

TEST_CASE("structure validation and tree conversion", "[rvine]")
{
    // column nesting broken
    CHECK_THROWS_AS(RVineStructure(3, {0, -1, -1, 1, 1, -1, 1, 2, 2}), ModelError);
    // valid D-vine 0-1-2
    auto dv = RVineStructure::dvine({0, 1, 2});
    CHECK(dv.order().size() == 3);
    // proximity broken: 4-d matrix whose tree-2 edge joins non-adjacent tree-1 edges
    CHECK_THROWS_AS(RVineStructure(4, {0, -1, -1, -1, 3, 1, -1, -1, 1, 2, 2, -1, 2, 3, 3, 3}), ModelError);

    Rng rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        const int d = 2 + rep % 7;
        auto s = random_structure(d, rng);
        for (int j = 0; j < d; ++j) {
            auto cond = s.conditioning(j, j);
            CHECK(static_cast<int>(cond.size()) == d - 1 - j);
        }
        auto m = s.margin(1);
        CHECK(m.dim() == d - 1);
    }

    // C-vine: root of tree 1 appears in every tree-1 edge
    auto cv = RVineStructure::cvine({2, 0, 3, 1});
    for (int j = 0; j < 3; ++j) {
        const int a = cv.diagonal(j), b = cv(3, j);
        CHECK((a == 2 || b == 2));
    }
}

TEST_CASE("maximum spanning tree matches brute force", "[rvine]")
{
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 5;
        Matrix w(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) w(i, k) = i < k ? rng.uniform() : 0.0;
        auto tree = maximum_spanning_tree(n, [&](int i, int k) { return std::optional<double>(w(i, k)); });
        double got = 0.0;
        for (auto [i, k] : tree) got += w(i, k);
        // enumerate all subsets of 4 edges that form a tree
        std::vector<std::pair<int, int>> all;
        for (int i = 0; i < n; ++i)
            for (int k = i + 1; k < n; ++k) all.push_back({i, k});
        double best = 0.0;
        const int e = static_cast<int>(all.size());
        for (int mask = 0; mask < (1 << e); ++mask) {
            if (__builtin_popcount(mask) != n - 1) continue;
            std::vector<int> parent(n);
            std::iota(parent.begin(), parent.end(), 0);
            std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
            bool ok = true;
            double s = 0.0;
            for (int b = 0; b < e && ok; ++b)
                if (mask >> b & 1) {
                    const int x = find(all[b].first), y = find(all[b].second);
                    if (x == y) ok = false;
                    parent[x] = y;
                    s += w(all[b].first, all[b].second);
                }
            if (ok) best = std::max(best, s);
        }
        CHECK_THAT(got, WithinAbs(best, 1e-12));
    }
}

TEST_CASE("independence vine has unit density and identity Rosenblatt", "[rvine]")
{
    auto m = RVineModel::independence(4);
    std::vector<double> u{0.1, 0.5, 0.77, 0.3};
    CHECK(m.density(u) == 1.0);
    auto w = m.rosenblatt(u);
    for (int k = 0; k < 4; ++k) CHECK_THAT(w[k], WithinAbs(u[k], 1e-15));
    CHECK(m.conditional_density(1, 0.3, std::vector<double>{0.5, 0.2, 0.9}) == 1.0);
    CHECK_THAT(m.conditional_cdf(2, 0.3, std::vector<double>{0.2, 0.9}), WithinAbs(0.3, 1e-15));
}

TEST_CASE("Gaussian vine equals the trivariate Gaussian copula", "[rvine]")
{
    Rng rng(3);
    for (int rep = 0; rep < 6; ++rep) {
        const Matrix r = random_correlation(3, rng);
        const std::vector<RVineStructure> structs{RVineStructure::dvine({0, 1, 2}), RVineStructure::dvine({1, 0, 2}),
                                                  RVineStructure::cvine({2, 0, 1})};
        for (const auto& s : structs) {
            auto m = gaussian_vine(s, r);
            for (const auto& u : grid3()) {
                const double ref = gaussian_copula_density(r, u);
                CHECK_THAT(m.density(u), WithinAbs(ref, 1e-8 * std::max(1.0, ref)));
            }
        }
    }
}

TEST_CASE("t vine with df nu + m - 1 equals the trivariate t copula", "[rvine]")
{
    Rng rng(4);
    for (double nu : {3.0, 4.5, 8.0}) {
        const Matrix r = random_correlation(3, rng);
        auto m = t_vine(RVineStructure::dvine({2, 0, 1}), r, nu);
        CHECK(m.copula(2, 0).parameter(1) == nu + 1);
        for (const auto& u : grid3())
            CHECK_THAT(m.density(u), WithinRel(t_copula_density(r, nu, u), 1e-6));
    }
}

TEST_CASE("log density equals the brute-force edge recursion", "[rvine]")
{
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        auto m = random_model(5, rng);
        BruteForceVine bf(m);
        for (int p = 0; p < 10; ++p) {
            std::vector<double> u(5);
            for (auto& x : u) x = rng.uniform();
            CHECK_THAT(m.log_density(u), WithinAbs(bf.log_density(u), 1e-9));
        }
    }
}

TEST_CASE("telescoping factorization of the density", "[rvine]")
{
    Rng rng(22);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 3 + rep % 4;
        auto m = random_model(d, rng);
        const auto& s = m.structure();
        for (int p = 0; p < 5; ++p) {
            std::vector<double> u(d);
            for (auto& x : u) x = rng.uniform();
            double prod = 1.0;
            for (int j = 1; j <= d - 1; ++j) {
                std::vector<double> rest;
                for (int q = j; q < d; ++q) rest.push_back(u[s.diagonal(q)]);
                prod *= m.conditional_density(j, u[s.diagonal(j - 1)], rest);
            }
            CHECK_THAT(prod, WithinRel(m.density(u), 1e-8));
        }
    }
}

TEST_CASE("conditional densities integrate to one and match the cdf derivative", "[rvine]")
{
    Rng rng(23);
    // composite rule in normal scores; a single 65-node rule is only accurate to ~1e-2 for
    // peaked conditionals built from strong Joe/Gumbel edges
    QuadratureRule rule;
    const auto gl = gauss_legendre(20);
    const double zmax = -norm_quantile(1e-10);
    for (int p = 0; p < 200; ++p) {
        const double z0 = -zmax + 2 * zmax * p / 200, z1 = z0 + 2 * zmax / 200;
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double z = z0 + (z1 - z0) * (gl.nodes[i] + 1) / 2;
            rule.nodes.push_back(norm_cdf(z));
            rule.weights.push_back((z1 - z0) / 2 * gl.weights[i] * norm_pdf(z));
        }
    }
    for (int rep = 0; rep < 8; ++rep) {
        auto m = random_model(5, rng);
        for (int j = 1; j <= 4; ++j) {
            std::vector<double> rest(5 - j);
            for (auto& x : rest) x = 0.1 + 0.8 * rng.uniform();
            double s = 0.0;
            for (std::size_t i = 0; i < rule.size(); ++i)
                s += rule.weights[i] * m.conditional_density(j, rule.nodes[i], rest);
            CHECK_THAT(s, WithinAbs(1.0, 1e-4));
            for (double x : {0.2, 0.5, 0.8}) {
                const double h = 1e-5;
                const double fd = (m.conditional_cdf(j, x + h, rest) - m.conditional_cdf(j, x - h, rest)) / (2 * h);
                CHECK_THAT(fd, WithinRel(m.conditional_density(j, x, rest), 1e-4));
                CHECK(m.conditional_cdf(j, x, rest) < m.conditional_cdf(j, x + 0.05, rest));
            }
        }
    }
}

TEST_CASE("bivariate Gaussian conditionals match the analytic formulas", "[rvine]")
{
    const double rho = 0.5;
    auto m = gaussian_vine(RVineStructure::dvine({0, 1}), (Matrix(2, 2) << 1, rho, rho, 1).finished());
    const int first = m.structure().diagonal(0), second = m.structure().diagonal(1);
    for (double a : {0.1, 0.4, 0.9})
        for (double b : {0.2, 0.6, 0.95}) {
            const double x = boost_qnorm(a), y = boost_qnorm(b);
            std::vector<double> u(2);
            u[first] = a;
            u[second] = b;
            const double s = std::sqrt(1 - rho * rho);
            const double cond = boost::math::cdf(boost::math::normal(), (x - rho * y) / s);
            auto w = m.rosenblatt(u);
            CHECK_THAT(w[first], WithinAbs(cond, 1e-8));
            CHECK_THAT(w[second], WithinAbs(b, 1e-15));
            auto back = m.inverse_rosenblatt(w);
            CHECK_THAT(back[first], WithinAbs(a, 1e-8));
            const double dens = std::exp(-(x * x - 2 * rho * x * y + y * y) / (2 * s * s) + (x * x + y * y) / 2) / s;
            CHECK_THAT(m.conditional_density(1, a, std::vector<double>{b}), WithinRel(dens, 1e-8));
            CHECK_THAT(m.conditional_cdf(1, a, std::vector<double>{b}), WithinAbs(cond, 1e-8));
        }
}

TEST_CASE("Rosenblatt round trip", "[rvine]")
{
    Rng rng(24);
    for (int rep = 0; rep < 10; ++rep) {
        auto m = random_model(6, rng);
        for (int p = 0; p < 20; ++p) {
            std::vector<double> w(6);
            for (auto& x : w) x = 0.001 + 0.998 * rng.uniform();
            auto u = m.inverse_rosenblatt(w);
            auto back = m.rosenblatt(u);
            for (int k = 0; k < 6; ++k) CHECK_THAT(back[k], WithinAbs(w[k], 1e-8));
        }
    }
}

TEST_CASE("sampling the three-dimensional Clayton vine reproduces its taus", "[rvine]")
{
    std::vector<std::vector<VineEdge>> trees{{{0, 1, {}}, {1, 2, {}}}, {{0, 2, {1}}}};
    std::vector<std::vector<BivariateCopula>> cops{
        {copula_from_tau(Family::Clayton, 0, 0.7), copula_from_tau(Family::Clayton, 0, 0.5)},
        {copula_from_tau(Family::Clayton, 0, 0.3)}};
    auto m = model_from_trees(3, trees, cops);
    Rng rng(99);
    const Matrix x = m.sample(10000, rng);
    CHECK_THAT(kendall_tau(column(x, 0), column(x, 1)), WithinAbs(0.7, 0.02));
    CHECK_THAT(kendall_tau(column(x, 1), column(x, 2)), WithinAbs(0.5, 0.02));
    Rng a(5), b(5);
    CHECK(m.sample(50, a) == m.sample(50, b));

    auto ind = RVineModel::independence(3).sample(10000, rng);
    for (int k = 0; k < 3; ++k) {
        CHECK_THAT(ind.col(k).mean(), WithinAbs(0.5, 0.01));
        for (int l = k + 1; l < 3; ++l) CHECK(std::abs(kendall_tau(column(ind, k), column(ind, l))) < 0.02);
    }
}

TEST_CASE("sub-models are margins", "[rvine]")
{
    Rng rng(31);
    const Matrix r = random_correlation(3, rng);
    auto g = gaussian_vine(RVineStructure::dvine({0, 1, 2}), r);
    CHECK(g.sub_model(0) == g);
    auto sub = g.sub_model(1);
    const auto vars = g.structure().margin_variables(1);
    CHECK(sub.dim() == 2);
    CHECK_THAT(sub.copula(1, 0).parameter(0), WithinAbs(r(vars[0], vars[1]), 1e-12));

    // integrate the removed coordinate numerically
    const auto rule = normal_score_rule(65);
    for (int rep = 0; rep < 4; ++rep) {
        auto m = random_model(3, rng, {Family::Gaussian, Family::Clayton, Family::Frank, Family::Gumbel}, 0.5);
        auto sm = m.sub_model(1);
        const int removed = m.structure().diagonal(0);
        const auto keep = m.structure().margin_variables(1);
        for (double a : {0.15, 0.5, 0.8})
            for (double b : {0.3, 0.6}) {
                std::vector<double> u(3);
                u[keep[0]] = a;
                u[keep[1]] = b;
                double s = 0.0;
                for (std::size_t i = 0; i < rule.size(); ++i) {
                    u[removed] = rule.nodes[i];
                    s += rule.weights[i] * m.density(u);
                }
                CHECK_THAT(s, WithinRel(sm.density(std::vector<double>{a, b}), 1e-3));
            }
    }
}

TEST_CASE("truncation bookkeeping", "[rvine]")
{
    Rng rng(41);
    auto m = random_model(5, rng);
    CHECK(m.truncate(4) == m);
    CHECK(m.truncate(2).truncate(2) == m.truncate(2));
    CHECK(m.truncate(0).density(std::vector<double>{0.2, 0.3, 0.4, 0.5, 0.9}) == 1.0);
    for (int k = 0; k <= 4; ++k) {
        int expect = 0;
        for (int t = 1; t <= k; ++t)
            for (int e = 0; e < 5 - t; ++e) expect += m.copula(t, e).num_parameters();
        CHECK(m.truncate(k).num_parameters() == expect);
        CHECK(m.truncate(k).truncation_level() == k);
    }
    std::vector<BivariateCopula> bad(9);
    bad[0 * 3 + 1] = BivariateCopula(Family::Gaussian, 0, {0.3});
    CHECK_THROWS_AS(RVineModel(RVineStructure::dvine({0, 1, 2}), bad, 1), ModelError);
}

TEST_CASE("random correlation matrices", "[rvine]")
{
    Rng rng(51);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) mean += random_correlation(2, rng)(0, 1);
    CHECK_THAT(mean / 10000, WithinAbs(0.0, 0.02));
    for (int i = 0; i < 200; ++i) {
        const int d = 3 + i % 6;
        const Matrix r = random_correlation(d, rng);
        CHECK(r.llt().info() == Eigen::Success);
        CHECK((r - r.transpose()).norm() == 0.0);
        for (int k = 0; k < d; ++k) CHECK(r(k, k) == 1.0);
        if (d == 3) CHECK(r.determinant() > 0.0);
    }
    // marginal of an off-diagonal entry under the uniform law is Beta(d/2, d/2) on [-1, 1]: variance 1/(d+1)
    double v = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = random_correlation(4, rng)(1, 3);
        v += x * x;
    }
    CHECK_THAT(v / 20000, WithinAbs(1.0 / 5.0, 0.01));
}
