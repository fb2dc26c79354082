#include "catch_amalgamated.hpp"

#include "helpers.hpp"
#include "vinedist/io.hpp"

using namespace vinedist;
using namespace testutil;

namespace {

CsvData parse(const std::string& s)
{
    std::istringstream in(s);
    return read_csv(in);
}

std::string data_error(const std::string& s)
{
    try {
        parse(s);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("CSV round trip is lossless", "[io]")
{
    Rng rng(81);
    const Matrix x = random_model(4, rng).sample(50, rng);
    std::ostringstream out;
    write_csv(out, x, {"a", "b", "c", "d"});
    const auto back = parse(out.str());
    CHECK(back.header == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(back.values == x);
    const auto crlf = parse("x,y\r\n0.25,0.5\r\n\r\n0.125,0.75\r\n");
    CHECK(crlf.values.rows() == 2);
    CHECK(crlf.values(1, 1) == 0.75);
}

TEST_CASE("CSV errors name the row and column", "[io]")
{
    CHECK(data_error("x,y\n0.2,0.3\n0.4,1.0\n").find("row 2, column 2 ('y')") != std::string::npos);
    CHECK(data_error("x,y\n0.2,abc\n").find("row 1, column 2") != std::string::npos);
    CHECK(data_error("x,y\n-0.1,0.5\n").find("row 1, column 1") != std::string::npos);
    CHECK(data_error("x,y\n0.2,0.3,0.4\n").find("row 1") != std::string::npos);
    CHECK(data_error("x,y\n0.2,\n").find("row 1, column 2") != std::string::npos);
    CHECK(data_error("x,y\n0.2,nan\n").find("column 2") != std::string::npos);
    CHECK_FALSE(data_error("").empty());
    CHECK_FALSE(data_error("x,y\n").empty());
    CHECK(data_error("0.1,0.2\n0.3,0.4\n").find("header") != std::string::npos);
}

TEST_CASE("model JSON round trip", "[io]")
{
    Rng rng(82);
    for (int d : {2, 3, 6}) {
        const auto m = random_model(d, rng);
        const std::string text = dump(to_json(m));
        const auto j = parse_json(text, "test");
        CHECK_FALSE(is_nonsimplified_json(j));
        const auto back = rvine_from_json(j);
        CHECK(dump(to_json(back)) == text);
        CHECK(back.structure().matrix() == m.structure().matrix());
        CHECK(back.truncation_level() == m.truncation_level());
        CHECK(back.num_parameters() == m.num_parameters());
        const Matrix x = m.sample(20, rng);
        CHECK((back.log_density(x) - m.log_density(x)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(static_cast<int>(j.at("pair_copulas").size()) == d * (d - 1) / 2);
    }
    const auto tc = t_vine(RVineStructure::dvine({0, 1, 2}), Matrix::Identity(3, 3) * 0.5 + Matrix::Constant(3, 3, 0.5), 5.0)
                        .with_parameter_count(4);
    CHECK(rvine_from_json(to_json(tc)).num_parameters() == 4);
    const auto tr = random_model(5, rng).truncate(2);
    CHECK(rvine_from_json(to_json(tr)).truncation_level() == 2);
}

TEST_CASE("non-simplified model JSON round trip", "[io]")
{
    Rng rng(83);
    const auto base = random_model(4, rng, {Family::Gaussian, Family::Clayton, Family::StudentT});
    auto ns = NonSimplifiedModel::from_simplified(base);
    auto edges = ns.edges();
    for (int j = 0; j < 4; ++j)
        for (int i = j + 1; i < 3; ++i)
            if (edges[j * 4 + i].tau) edges[j * 4 + i].tau = TauFunction{0.1 * (j + 1), -0.2 * i, edges[j * 4 + i].tau->driver};
    ns = NonSimplifiedModel(ns.structure(), edges);
    const std::string text = dump(to_json(ns));
    const auto j = parse_json(text, "test");
    CHECK(is_nonsimplified_json(j));
    const auto back = nonsimplified_from_json(j);
    CHECK(dump(to_json(back)) == text);
    const Matrix x = ns.sample(20, rng);
    CHECK((back.log_density(x) - ns.log_density(x)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(rvine_from_json(j), ModelError);
}

TEST_CASE("malformed model JSON is rejected", "[io]")
{
    CHECK_THROWS_AS(parse_json("{\"d\": 3,", "m"), ModelError);
    auto j = to_json(RVineModel::independence(3));
    auto bad = j;
    bad["matrix"] = std::vector<int>{0, 1};
    CHECK_THROWS_AS(rvine_from_json(bad), ModelError);
    bad = j;
    bad.erase("d");
    CHECK_THROWS_AS(rvine_from_json(bad), ModelError);
    bad = j;
    bad["pair_copulas"][0]["family"] = "tawn";
    CHECK_THROWS_AS(rvine_from_json(bad), ParameterDomainError);
    bad = j;
    bad["pair_copulas"][0] = {{"tree", 1}, {"edge", 0}, {"family", "clayton"}, {"rotation", 0}, {"parameters", {-2.0}}};
    CHECK_THROWS_AS(rvine_from_json(bad), ParameterDomainError);
    bad = j;
    bad["pair_copulas"][0]["tree"] = 5;
    CHECK_THROWS_AS(rvine_from_json(bad), ModelError);
    bad = j;
    bad["truncation"] = 0;
    bad["pair_copulas"][2] = {{"tree", 2}, {"edge", 0}, {"family", "gaussian"}, {"rotation", 0}, {"parameters", {0.3}}};
    CHECK_THROWS_AS(rvine_from_json(bad), ModelError);
}

TEST_CASE("atomic file writes", "[io]")
{
    const auto dir = std::filesystem::temp_directory_path() / "vinedist_io_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "out.json").string();
    write_file_atomic(path, "first\n");
    write_file_atomic(path, "second\n");
    CHECK(read_file(path) == "second\n");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    CHECK_THROWS_AS(write_file_atomic((dir / "missing" / "x.json").string(), "x"), DataError);
    std::filesystem::remove_all(dir);
}
