#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "vinedist/nonsimplified.hpp"

using namespace vinedist;
using namespace testutil;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RVineModel clayton_dvine(double t12, double t23, double t13)
{
    std::vector<std::vector<VineEdge>> trees{{{0, 1, {}}, {1, 2, {}}}, {{0, 2, {1}}}};
    std::vector<std::vector<BivariateCopula>> cops{
        {copula_from_tau(Family::Clayton, 0, t12), copula_from_tau(Family::Clayton, 0, t23)},
        {copula_from_tau(Family::Clayton, 0, t13)}};
    return model_from_trees(3, trees, cops);
}

// Clayton D-vine 0-1-2 with tau_{13;2}(u2) = a + (b - a) u2
NonSimplifiedModel linear_model(double t12, double t23, double a, double b)
{
    auto base = clayton_dvine(t12, t23, 0.5);
    auto ns = NonSimplifiedModel::from_simplified(base);
    auto edges = ns.edges();
    const int d = 3;
    for (int j = 0; j < d; ++j)
        for (int i = j + 1; i < d - 1; ++i) edges[j * d + i].tau = TauFunction{a, b, 1};
    return NonSimplifiedModel(ns.structure(), edges);
}

std::vector<double> col(const Matrix& m, int k) { return std::vector<double>(m.col(k).data(), m.col(k).data() + m.rows()); }

}  // namespace

TEST_CASE("constant tau functions reproduce the simplified vine", "[nonsimplified]")
{
    Rng rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        auto m = random_model(5, rng);
        auto ns = NonSimplifiedModel::from_simplified(m);
        for (int k = 0; k < 20; ++k) {
            std::vector<double> u(5);
            for (auto& x : u) x = rng.uniform();
            CHECK(ns.log_density(u) == m.log_density(u));
        }
        CHECK(ns.num_parameters() >= m.num_parameters());
    }
}

TEST_CASE("linear-tau density matches the direct three-factor formula", "[nonsimplified]")
{
    Rng rng(32);
    for (auto [a, b] : {std::pair{0.3, 0.9}, std::pair{-0.5, 0.5}, std::pair{0.6, -0.2}}) {
        auto ns = linear_model(0.7, 0.5, a, b);
        const auto& s = ns.structure();
        const int first = s.diagonal(0);  // conditioned variable placed first in the tree-2 edge
        const auto c12 = copula_from_tau(Family::Clayton, 0, 0.7), c23 = copula_from_tau(Family::Clayton, 0, 0.5);
        for (int k = 0; k < 50; ++k) {
            std::vector<double> u{rng.uniform(), rng.uniform(), rng.uniform()};
            const double t = a + (b - a) * u[1];
            double want = c12.pdf(u[0], u[1]) * c23.pdf(u[1], u[2]);
            if (std::abs(t) > 1e-10) {
                const auto c = copula_from_tau(Family::Clayton, t > 0 ? 0 : 90, t);
                const double h0 = c12.hfunc2(u[0], u[1]), h2 = c23.hfunc1(u[1], u[2]);
                want *= first == 0 ? c.pdf(h0, h2) : c.pdf(h2, h0);
            }
            CHECK_THAT(ns.density(u), WithinAbs(want, 1e-10 * std::max(1.0, want)));
        }
    }
}

TEST_CASE("linear-tau density integrates to one", "[nonsimplified]")
{
    auto ns = linear_model(0.3, 0.2, 0.1, 0.4);
    const auto rule = normal_score_rule(48);
    double s = 0.0;
    std::vector<double> u(3);
    for (std::size_t i = 0; i < rule.size(); ++i)
        for (std::size_t j = 0; j < rule.size(); ++j)
            for (std::size_t k = 0; k < rule.size(); ++k) {
                u = {rule.nodes[i], rule.nodes[j], rule.nodes[k]};
                s += rule.weights[i] * rule.weights[j] * rule.weights[k] * ns.density(u);
            }
    CHECK_THAT(s, WithinAbs(1.0, 1e-3));
}

TEST_CASE("sampled conditional tau follows the driver", "[nonsimplified]")
{
    auto ns = linear_model(0.7, 0.5, 0.3, 0.9);
    Rng rng(33);
    const Matrix x = ns.sample(30000, rng);
    const auto c12 = copula_from_tau(Family::Clayton, 0, 0.7), c23 = copula_from_tau(Family::Clayton, 0, 0.5);
    std::vector<double> lo1, lo3, hi1, hi3;
    for (int r = 0; r < x.rows(); ++r) {
        const double a = c12.hfunc2(x(r, 0), x(r, 1)), b = c23.hfunc1(x(r, 1), x(r, 2));
        if (x(r, 1) < 0.2) lo1.push_back(a), lo3.push_back(b);
        if (x(r, 1) > 0.8) hi1.push_back(a), hi3.push_back(b);
    }
    const double tlo = kendall_tau(lo1, lo3), thi = kendall_tau(hi1, hi3);
    // bin averages of tau(u2): 0.36 and 0.84
    CHECK_THAT(tlo, WithinAbs(0.36, 0.04));
    CHECK_THAT(thi, WithinAbs(0.84, 0.04));
    CHECK(thi > tlo);

    Rng r1(5), r2(5);
    CHECK(ns.sample(50, r1) == ns.sample(50, r2));
}

TEST_CASE("tau stays inside its clip range", "[nonsimplified]")
{
    auto ns = linear_model(0.7, 0.5, -1.0, 1.0);
    const auto& e = ns.edge_at_tree(2, 0);
    for (double u : {0.0, 1e-12, 0.5, 1.0 - 1e-12, 1.0}) {
        std::vector<double> p{0.3, u, 0.7};
        const auto c = ns.edge_copula(0, 1, p.data());
        CHECK(std::abs(c.tau()) <= kTauClip + 1e-12);
        CHECK(std::isfinite(ns.log_density(p)));
    }
    CHECK(e.tau->driver == 1);
    CHECK_THROWS_AS(NonSimplifiedModel(ns.structure(), [&] {
                        auto ed = ns.edges();
                        ed[0 * 3 + 1].tau->driver = 0;
                        return ed;
                    }()),
                    ModelError);
}

TEST_CASE("non-simplified fit recovers linear tau functions", "[nonsimplified]")
{
    auto truth = linear_model(0.7, 0.5, 0.3, 0.9);
    int hits = 0;
    const int seeds = 10;
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(100 + seed);
        const Matrix x = truth.sample(1000, rng);
        const auto simplified = refit_parameters(clayton_dvine(0.7, 0.5, 0.5), x);
        const auto fit = fit_nonsimplified_detailed(x, simplified);
        CHECK(fit.fallbacks == 0);
        const auto& e = fit.model.edge_at_tree(2, 0);
        REQUIRE(e.tau);
        if (std::abs(e.tau->a - 0.3) < 0.15 && std::abs(e.tau->b - 0.9) < 0.15) ++hits;
        // the simplified model is nested at a = b
        CHECK(fit.model.loglik(x) >= simplified.loglik(x) - 1e-6);
        CHECK(std::abs(e.tau->a) <= 1.0);
        CHECK(std::abs(e.tau->b) <= 1.0);
    }
    CHECK(hits >= 8);
}

TEST_CASE("fit on simplified data stays near constant tau", "[nonsimplified]")
{
    auto truth = clayton_dvine(0.6, 0.4, 0.3);
    Rng rng(41);
    const Matrix x = truth.sample(1500, rng);
    const auto fit = fit_nonsimplified(x, refit_parameters(truth, x));
    const auto& e = fit.edge_at_tree(2, 0);
    REQUIRE(e.tau);
    CHECK_THAT(e.tau->a, WithinAbs(0.3, 0.15));
    CHECK_THAT(e.tau->b, WithinAbs(0.3, 0.15));
    CHECK(fit.num_parameters() == 4);

    Matrix tiny = x.topRows(10);
    CHECK_THROWS_AS(fit_nonsimplified(tiny, truth), DataError);
}

TEST_CASE("bootstrap tau band covers a constant tau", "[nonsimplified]")
{
    auto truth = clayton_dvine(0.6, 0.4, 0.3);
    Rng rng(42);
    const auto band = tau_band(truth, 2, 0, 20, 0.1, 500, rng);
    REQUIRE(band.grid.size() == 19);
    for (std::size_t g = 0; g < band.grid.size(); ++g) {
        CHECK(band.lower[g] <= band.median[g]);
        CHECK(band.median[g] <= band.upper[g]);
    }
    CHECK(band.lower[9] <= 0.3);
    CHECK(band.upper[9] >= 0.3);
    CHECK_THROWS_AS(tau_band(truth, 1, 0, 5, 0.1, 200, rng), ModelError);
}
