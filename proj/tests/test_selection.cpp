#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "vinedist/selection.hpp"

using namespace vinedist;
using namespace testutil;
using Catch::Matchers::WithinAbs;

namespace {

RVineModel clayton_dvine4()
{
    std::vector<std::vector<VineEdge>> trees{{{0, 1, {}}, {1, 2, {}}, {2, 3, {}}},
                                             {{0, 2, {1}}, {1, 3, {2}}},
                                             {{0, 3, {1, 2}}}};
    std::vector<std::vector<BivariateCopula>> cops{
        {copula_from_tau(Family::Clayton, 0, 0.6), copula_from_tau(Family::Gumbel, 0, 0.5),
         copula_from_tau(Family::Clayton, 180, 0.5)},
        {copula_from_tau(Family::Frank, 0, 0.3), copula_from_tau(Family::Joe, 0, 0.2)},
        {copula_from_tau(Family::Clayton, 0, 0.2)}};
    return model_from_trees(4, trees, cops);
}

}  // namespace

TEST_CASE("independence candidate scores zero", "[selection]")
{
    Rng rng(71);
    const Matrix x = random_model(3, rng).sample(200, rng);
    const auto t = score_models(x, {{"indep", RVineModel::independence(3)}});
    REQUIRE(t.rows.size() == 1);
    const auto& r = t.rows[0];
    CHECK(r.num_parameters == 0);
    CHECK(r.distance == 0.0);
    CHECK(r.loglik == 0.0);
    CHECK(r.aic == 0.0);
    CHECK(r.bic == 0.0);
    CHECK_THROWS_AS(score_models(x, {{"bad", RVineModel::independence(4)}}), DimensionError);
}

TEST_CASE("information criteria identities and rankings", "[selection]")
{
    Rng rng(72);
    const auto truth = clayton_dvine4();
    const Matrix x = truth.sample(800, rng);
    const auto cands = fit_candidates(x, {"gaussian", "tcopula", "cvine", "dvine", "rvine"});
    std::vector<Candidate> all = cands;
    all.push_back({"truth", truth});
    const auto t = score_models(x, all);
    CHECK(t.method == DistanceMethod::Dkl);
    CHECK(t.N == 800);
    for (const auto& r : t.rows) {
        CHECK(r.aic == -2.0 * r.loglik + 2.0 * r.num_parameters);
        CHECK(r.bic == -2.0 * r.loglik + std::log(800.0) * r.num_parameters);
        CHECK(r.distance > 0.0);
    }
    CHECK(t.rows[0].num_parameters == 6);
    CHECK(t.rows[1].num_parameters == 7);
    for (auto c : {Criterion::Distance, Criterion::LogLik, Criterion::Aic, Criterion::Bic}) {
        const auto order = t.ranking(c);
        const auto rk = t.ranks(c);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            if (c == Criterion::Distance || c == Criterion::LogLik) CHECK(t.value(order[k], c) >= t.value(order[k + 1], c));
            else CHECK(t.value(order[k], c) <= t.value(order[k + 1], c));
            CHECK(rk[order[k]] == static_cast<int>(k) + 1);
        }
    }
    // asymmetric tail dependence: the Gaussian copula is never the best fit
    CHECK(t.ranking(Criterion::Aic).front() != 0);
    CHECK(t.ranking(Criterion::Distance).front() != 0);
}

TEST_CASE("rankings are stable under ties", "[selection]")
{
    ScoreTable t;
    t.N = 10;
    t.rows = {score_row("a", 1, 0.5, 3.0, 10), score_row("b", 1, 0.5, 3.0, 10), score_row("c", 0, 0.0, 0.0, 10)};
    CHECK(t.ranking(Criterion::Distance) == std::vector<int>{0, 1, 2});
    CHECK(t.ranking(Criterion::Aic) == std::vector<int>{0, 1, 2});
    CHECK(t.ranks(Criterion::Bic) == std::vector<int>{1, 2, 3});
}

TEST_CASE("the fuller nested model has the larger log-likelihood", "[selection]")
{
    Rng rng(73);
    for (int rep = 0; rep < 4; ++rep) {
        const auto truth = random_model(5, rng);
        const Matrix x = truth.sample(400, rng);
        const auto full = fit_structure(x, truth.structure());
        for (int k = 0; k < 4; ++k) {
            const auto nested = fit_structure(x, truth.structure(), default_familyset(), k);
            CHECK(full.loglik(x) >= nested.loglik(x) - 1e-6);
            CHECK(full.num_parameters() >= nested.num_parameters());
        }
    }
}

TEST_CASE("noise-to-signal ratios", "[selection]")
{
    CHECK(noise_to_signal(std::vector<double>{2.0, 2.0, 2.0}) == 0.0);
    CHECK(std::isinf(noise_to_signal(std::vector<double>{1.5, -1.5})));
    CHECK_THAT(noise_to_signal(std::vector<double>{1.0, 2.0, 3.0}), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(noise_to_signal(std::vector<double>{1.0}), ModelError);

    ScoreTable a, b;
    a.rows = {score_row("m", 2, 1.0, 10.0, 100)};
    b.rows = {score_row("m", 2, 3.0, 10.0, 100)};
    const auto r = noise_to_signal(std::vector<ScoreTable>{a, b});
    REQUIRE(r.size() == 1);
    CHECK(r[0].name == "m");
    CHECK(r[0].num_parameters == 0.0);
    CHECK(r[0].loglik == 0.0);
    CHECK_THAT(r[0].distance, WithinAbs(std::sqrt(2.0) / 2.0, 1e-15));
}
