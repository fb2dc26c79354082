#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "vinedist/distance.hpp"

using namespace vinedist;
using namespace testutil;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RVineModel gauss2(double rho)
{
    Matrix r(2, 2);
    r << 1, rho, rho, 1;
    return gaussian_vine(RVineStructure::dvine({0, 1}), r);
}

RVineModel random_gauss(int d, Rng& rng)
{
    return gaussian_vine(random_structure(d, rng), random_correlation(d, rng));
}

// g with every parameter moved a fraction t of the way towards f (same structure and families)
RVineModel blend(const RVineModel& f, const RVineModel& g, double t)
{
    const int d = f.dim();
    std::vector<BivariateCopula> cops(d * d);
    for (int j = 0; j < d - 1; ++j)
        for (int i = j + 1; i < d; ++i) {
            const auto& a = f.at(j, i);
            const auto& b = g.at(j, i);
            auto p = b.parameters();
            const auto q = a.parameters();
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = (1 - t) * p[k] + t * q[k];
            cops[j * d + i] = BivariateCopula(a.family(), a.rotation(), p);
        }
    return RVineModel(f.structure(), cops);
}

}  // namespace

TEST_CASE("distances of a model to itself vanish", "[distance]")
{
    Rng rng(51);
    for (int d : {2, 3, 5}) {
        auto m = random_model(d, rng);
        for (const auto& r : {dkl(m, m), sdkl(m, m)}) {
            CHECK(r.value == 0.0);
            CHECK(static_cast<int>(r.per_level.size()) == d - 1);
        }
        auto ns = NonSimplifiedModel::from_simplified(m);
        CHECK(dkl(ns, ns).value == 0.0);
        CHECK(dkl(m, ns).value == 0.0);
    }
    auto m3 = random_model(3, rng);
    CHECK(kl_numeric(m3, m3).value < 1e-10);
    const auto mc = kl_monte_carlo(m3, m3, 2000, rng);
    CHECK(mc.value == 0.0);
}

TEST_CASE("kl_numeric matches the closed-form Gaussian KL", "[distance]")
{
    for (double rf : {-0.8, -0.4, 0.0, 0.4, 0.8})
        for (double rg : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
            const auto f = rf == 0.0 ? RVineModel::independence(2) : gauss2(rf);
            const auto g = rg == 0.0 ? RVineModel::independence(2) : gauss2(rg);
            CHECK_THAT(kl_numeric(f, g).value, WithinAbs(gaussian_kl(rf, rg), 1e-4));
        }
    CHECK_THROWS_AS(kl_numeric(RVineModel::independence(4), RVineModel::independence(4)), DimensionError);
}

TEST_CASE("kl_numeric is nonnegative and agrees with Monte Carlo", "[distance]")
{
    Rng rng(52);
    for (int k = 0; k < 50; ++k) {
        auto f = random_model(3, rng), g = random_model(3, rng);
        CHECK(kl_numeric(f, g, 24).value >= 0.0);
    }
    for (int k = 0; k < 3; ++k) {
        auto f = random_gauss(3, rng), g = random_gauss(3, rng);
        const double ref = kl_numeric(f, g).value;
        Rng r1(k), r2(k);
        const auto mc = kl_monte_carlo(f, g, 20000, r1);
        CHECK(std::abs(mc.value - ref) < 3 * mc.std_error);
        CHECK(kl_monte_carlo(f, g, 20000, r2).value == mc.value);
    }
}

TEST_CASE("diagonal grids", "[distance]")
{
    Rng rng(53);
    auto m = random_model(5, rng);
    for (int j = 1; j <= 4; ++j) {
        const auto g = build_diagonals(m, j);
        CHECK(g.diagonals.size() == (1u << (5 - j - 1)));
        for (const auto& line : g.diagonals) {
            CHECK(line.size() == 10);
            for (const auto& p : line) CHECK(static_cast<int>(p.size()) == 5 - j);
        }
        for (const auto& r : g.corners) CHECK(r[0] == 0);
    }
    const auto last = build_diagonals(m, 4, 0.025, 10);
    const auto grid = trimmed_grid(0.025, 10);
    for (int i = 0; i < 10; ++i) CHECK(last.diagonals[0][i][0] == grid[i]);
    CHECK(grid.front() == 0.025);
    CHECK_THAT(grid.back(), WithinAbs(0.975, 1e-15));

    const auto ind = RVineModel::independence(4);
    const auto warped = build_diagonals(ind, 1), plain = build_diagonals(ind, 1, 0.025, 10, false);
    CHECK(warped.diagonals == plain.diagonals);
    CHECK(plain.diagonals[1][0] == std::vector<double>{0.025, 0.025, 0.975});
}

TEST_CASE("principal diagonal follows the sign of dependence", "[distance]")
{
    const auto ind = RVineModel::independence(3);
    CHECK(principal_diagonal_index(ind, build_diagonals(ind, 1)) == 0);
    for (double rho : {0.8, -0.8}) {
        Matrix r = Matrix::Identity(3, 3);
        r(1, 2) = r(2, 1) = rho;
        r(0, 1) = r(1, 0) = 0.3;
        const auto m = gaussian_vine(RVineStructure::dvine({0, 1, 2}), r);
        const auto grid = build_diagonals(m, 1);
        const auto w = diagonal_weights(m, grid);
        REQUIRE(w.size() == 2);
        CHECK(principal_diagonal_index(m, grid) == (rho > 0 ? 0 : 1));
        CHECK(grid.corners[1] == std::vector<int>{0, 1});
    }
}

TEST_CASE("univariate KL matches the normal conditional oracle", "[distance]")
{
    for (double rf : {0.3, 0.7, -0.5})
        for (double rg : {0.0, 0.5, -0.2})
            for (double v : {0.05, 0.5, 0.9}) {
                const auto f = gauss2(rf);
                const auto g = rg == 0.0 ? RVineModel::independence(2) : gauss2(rg);
                // variable at position 0 given position 1
                const double z = boost_qnorm(v);
                const double mf = rf * z, sf = std::sqrt(1 - rf * rf), mg = rg * z, sg = std::sqrt(1 - rg * rg);
                const double want = std::log(sg / sf) + (sf * sf + (mf - mg) * (mf - mg)) / (2 * sg * sg) - 0.5;
                const std::vector<double> rest{v};
                CHECK_THAT(kl_univariate(f, g, 1, rest), WithinAbs(want, 1e-5));
                CHECK_THAT(kl_univariate(f, g, 1, rest, KlRoute::Density), WithinAbs(want, 1e-5));
            }
}

TEST_CASE("g's conditional is independent of its own ordering", "[distance]")
{
    // moderate dependence: near-singular correlations put f's mass where g's
    // density is below the h-function clamp, and orderings then disagree in the tails
    Rng rng(54);
    const Matrix eye = Matrix::Identity(3, 3);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix rf = 0.6 * random_correlation(3, rng) + 0.4 * eye, rg = 0.6 * random_correlation(3, rng) + 0.4 * eye;
        const auto f = gaussian_vine(RVineStructure::dvine({0, 1, 2}), rf);
        const auto g_native = gaussian_vine(RVineStructure::dvine({0, 1, 2}), rg);
        const auto g_other = gaussian_vine(RVineStructure::dvine({1, 0, 2}), rg);
        const auto g_far = gaussian_vine(RVineStructure::cvine({2, 1, 0}), rg);
        REQUIRE(g_other.structure().order() != f.structure().order());
        for (int j = 1; j <= 2; ++j) {
            std::vector<double> rest(3 - j);
            for (auto& x : rest) x = 0.1 + 0.8 * rng.uniform();
            const double a = kl_univariate(f, g_native, j, rest);
            CHECK_THAT(kl_univariate(f, g_other, j, rest), WithinAbs(a, 1e-6));
            CHECK_THAT(kl_univariate(f, g_far, j, rest), WithinAbs(a, 1e-6));
        }
        CHECK_THAT(dkl(f, g_other).value, WithinAbs(dkl(f, g_native).value, 1e-6));
    }
}

TEST_CASE("dkl ranks 3-d Gaussian pairs like the full KL", "[distance]")
{
    Rng rng(55);
    std::vector<double> a, b;
    for (int k = 0; k < 20; ++k) {
        auto f = random_gauss(3, rng), g = random_gauss(3, rng);
        a.push_back(dkl(f, g).value);
        b.push_back(kl_numeric(f, g).value);
    }
    CHECK(spearman(a, b) >= 0.95);
}

TEST_CASE("sdkl ranks 5-d pairs like dkl", "[distance]")
{
    Rng rng(56);
    std::vector<double> a, b;
    for (int k = 0; k < 10; ++k) {
        auto f = random_model(5, rng);
        auto g = RVineModel(f.structure(), [&] {
            auto c = f.copulas();
            for (auto& x : c)
                if (!x.is_independence()) x = random_copula(rng, zoo());
            return c;
        }());
        const auto full = dkl(f, g), single = sdkl(f, g);
        a.push_back(full.value);
        b.push_back(single.value);
        double s = 0.0;
        for (double v : full.per_level) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK_THAT(full.value, WithinAbs(s, 1e-12));
    }
    CHECK(spearman(a, b) >= 0.9);
}

TEST_CASE("dkl shrinks along a parameter homotopy", "[distance]")
{
    Rng rng(57);
    for (int rep = 0; rep < 6; ++rep) {
        auto f = random_model(4, rng);
        auto g = RVineModel(f.structure(), [&] {
            auto c = f.copulas();
            for (auto& x : c)
                if (!x.is_independence())
                    x = copula_from_tau(x.family(), x.rotation(), std::clamp(x.tau() * 0.3, -0.9, 0.9),
                                        x.family() == Family::StudentT ? x.parameter(1) : 4.0);
            return c;
        }());
        double prev = std::numeric_limits<double>::infinity();
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double v = dkl(f, blend(f, g, t)).value;
            CHECK(v < prev + 1e-12);
            prev = v;
        }
        CHECK(prev == 0.0);
    }
}

TEST_CASE("sdkl on structural special cases", "[distance]")
{
    Rng rng(58);
    const auto f = gauss2(0.6), g = gauss2(-0.1);
    CHECK(dkl(f, g).value == sdkl(f, g).value);

    // independent margin on positions 1..2: all level-1 diagonals weigh the same
    Matrix r = Matrix::Identity(3, 3);
    r(0, 1) = r(1, 0) = 0.5;
    r(0, 2) = r(2, 0) = -0.3;
    const auto m = gaussian_vine(RVineStructure::cvine({1, 2, 0}), r);
    REQUIRE(m.structure().diagonal(0) == 0);
    const auto h = random_gauss(3, rng);
    const auto grid = build_diagonals(m, 1);
    double first = 0.0;
    for (const auto& p : grid.diagonals[0]) first += kl_univariate(m, h, 1, p);
    CHECK_THAT(sdkl(m, h).per_level[0], WithinRel(first / 10, 1e-12));
}

TEST_CASE("distances are deterministic across thread counts", "[distance]")
{
    Rng rng(59);
    auto f = random_model(6, rng);
    auto g = RVineModel(f.structure(), [&] {
        auto c = f.copulas();
        for (auto& x : c)
            if (!x.is_independence()) x = random_copula(rng, zoo());
        return c;
    }());
    const int saved = num_threads();
    set_num_threads(1);
    const auto a = dkl(f, g);
    set_num_threads(3);
    const auto b = dkl(f, g);
    set_num_threads(saved);
    CHECK(a.value == b.value);
    CHECK(a.per_level == b.per_level);
    CHECK_THROWS_AS(dkl(f, RVineModel::independence(5)), ModelError);
}
