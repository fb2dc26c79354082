#ifndef VINEDIST_IO_HPP
#define VINEDIST_IO_HPP

/** @file
 * CSV data and JSON model/result serialization.
 */

#include "boottest.hpp"
#include "nonsimplified.hpp"
#include "selection.hpp"
#include "truncation.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace vinedist {

using json = nlohmann::json;

struct CsvData {
    std::vector<std::string> header;
    Matrix values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads copula-scale data: a header row, then one column per variable with values in (0, 1).
inline CsvData read_csv(std::istream& in)
{
    CsvData out;
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV is empty (a header row is required)");
    for (auto& h : detail::split_csv_line(line)) out.header.push_back(detail::trim(h));
    const int d = static_cast<int>(out.header.size());
    for (const auto& h : out.header) {
        double x;
        const auto r = std::from_chars(h.data(), h.data() + h.size(), x);
        if (!h.empty() && r.ec == std::errc() && r.ptr == h.data() + h.size())
            throw DataError("CSV header row looks numeric; the first row must name the columns");
    }
    std::vector<double> vals;
    int row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != d)
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(d) + " fields, found " +
                            std::to_string(cells.size()));
        for (int c = 0; c < d; ++c) {
            const std::string s = detail::trim(cells[c]);
            double x = 0.0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
            const std::string where = "row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" +
                                      out.header[c] + "')";
            if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
                throw DataError(where + ": '" + s + "' is not a number");
            if (!(x > 0.0 && x < 1.0)) throw DataError(where + ": value " + s + " is not in (0, 1)");
            vals.push_back(x);
        }
    }
    if (row == 0) throw DataError("CSV has no data rows");
    out.values.resize(row, d);
    for (int i = 0; i < row; ++i)
        for (int c = 0; c < d; ++c) out.values(i, c) = vals[static_cast<std::size_t>(i) * d + c];
    return out;
}

inline CsvData read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

inline std::vector<std::string> default_header(int d)
{
    std::vector<std::string> h;
    for (int k = 1; k <= d; ++k) h.push_back("V" + std::to_string(k));
    return h;
}

inline void write_csv(std::ostream& os, const Matrix& x, std::vector<std::string> header = {})
{
    if (header.empty()) header = default_header(static_cast<int>(x.cols()));
    std::ostringstream s;
    s << std::setprecision(17);
    for (std::size_t c = 0; c < header.size(); ++c) s << (c ? "," : "") << header[c];
    s << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) s << (c ? "," : "") << x(i, c);
        s << '\n';
    }
    os << s.str();
}

/// Writes to a temporary file next to `path`, then renames it into place.
inline void write_file_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + path + "'");
        out << content;
        if (!out) throw DataError("write to '" + path + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw DataError("cannot write '" + path + "': " + ec.message());
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---- models ---------------------------------------------------------------

namespace detail {

inline json copula_json(int tree, int edge, const BivariateCopula& c)
{
    return {{"tree", tree},
            {"edge", edge},
            {"family", std::string(family_name(c.family()))},
            {"rotation", c.rotation()},
            {"parameters", c.parameters()}};
}

template <class T>
T get_key(const json& j, const char* key, const std::string& ctx)
{
    if (!j.is_object() || !j.contains(key)) throw ModelError(ctx + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ModelError(ctx + ": '" + key + "' has the wrong type");
    }
}

inline RVineStructure structure_from_json(const json& j)
{
    const int d = get_key<int>(j, "d", "model JSON");
    if (d < 1) throw ModelError("model JSON: d must be positive");
    const auto m = get_key<std::vector<int>>(j, "matrix", "model JSON");
    if (static_cast<int>(m.size()) != d * d)
        throw ModelError("model JSON: matrix has " + std::to_string(m.size()) + " entries, expected d*d = " +
                         std::to_string(d * d));
    return RVineStructure(d, m);
}

struct EdgeRecord {
    int tree, edge;
    BivariateCopula copula;
    std::optional<TauFunction> tau;
};

inline std::vector<EdgeRecord> edges_from_json(const json& j, const RVineStructure& s)
{
    const int d = s.dim();
    std::vector<EdgeRecord> out;
    if (!j.contains("pair_copulas")) throw ModelError("model JSON: missing 'pair_copulas'");
    if (!j.at("pair_copulas").is_array()) throw ModelError("model JSON: 'pair_copulas' must be an array");
    int k = 0;
    for (const auto& e : j.at("pair_copulas")) {
        const std::string ctx = "model JSON pair_copulas[" + std::to_string(k++) + "]";
        const int tree = get_key<int>(e, "tree", ctx), edge = get_key<int>(e, "edge", ctx);
        if (tree < 1 || tree > d - 1 || edge < 0 || edge >= d - tree)
            throw ModelError(ctx + ": no edge " + std::to_string(edge) + " in tree " + std::to_string(tree));
        const Family f = family_from_name(get_key<std::string>(e, "family", ctx));
        const int rot = e.contains("rotation") ? get_key<int>(e, "rotation", ctx) : 0;
        const auto par = e.contains("parameters") ? get_key<std::vector<double>>(e, "parameters", ctx)
                                                  : std::vector<double>{};
        EdgeRecord r{tree, edge, f == Family::Independence ? BivariateCopula() : BivariateCopula(f, rot, par), {}};
        if (e.contains("tau_a") || e.contains("tau_b") || e.contains("driver"))
            r.tau = TauFunction{get_key<double>(e, "tau_a", ctx), get_key<double>(e, "tau_b", ctx),
                                get_key<int>(e, "driver", ctx)};
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace detail

inline json to_json(const RVineModel& m)
{
    const int d = m.dim();
    json pcs = json::array();
    for (int t = 1; t < d; ++t)
        for (int e = 0; e < d - t; ++e) pcs.push_back(detail::copula_json(t, e, m.copula(t, e)));
    json j{{"d", d}, {"matrix", m.structure().matrix()}, {"truncation", m.truncation_level()}, {"pair_copulas", pcs}};
    if (m.parameter_count_override()) j["num_parameters"] = *m.parameter_count_override();
    return j;
}

inline json to_json(const NonSimplifiedModel& m)
{
    const int d = m.dim();
    json pcs = json::array();
    int trunc = 0;
    for (int t = 1; t < d; ++t)
        for (int e = 0; e < d - t; ++e) {
            const NsEdge& x = m.edge_at_tree(t, e);
            json c = detail::copula_json(t, e, x.copula);
            if (x.tau) {
                c["tau_a"] = x.tau->a;
                c["tau_b"] = x.tau->b;
                c["driver"] = x.tau->driver;
            }
            if (!x.copula.is_independence() || x.tau) trunc = t;
            pcs.push_back(std::move(c));
        }
    return {{"d", d}, {"matrix", m.structure().matrix()}, {"truncation", trunc}, {"pair_copulas", pcs}};
}

inline bool is_nonsimplified_json(const json& j)
{
    if (!j.is_object() || !j.contains("pair_copulas") || !j.at("pair_copulas").is_array()) return false;
    for (const auto& e : j.at("pair_copulas"))
        if (e.is_object() && (e.contains("tau_a") || e.contains("driver"))) return true;
    return false;
}

inline RVineModel rvine_from_json(const json& j)
{
    const RVineStructure s = detail::structure_from_json(j);
    const int d = s.dim();
    std::vector<BivariateCopula> cops(d * d);
    for (const auto& r : detail::edges_from_json(j, s)) {
        if (r.tau) throw ModelError("model JSON: edge with a tau function in a simplified model");
        cops[r.edge * d + s.row_of_tree(r.tree)] = r.copula;
    }
    const int trunc = j.contains("truncation") ? detail::get_key<int>(j, "truncation", "model JSON") : d - 1;
    RVineModel m(s, std::move(cops), std::max(trunc, 0));
    if (j.contains("num_parameters")) m = m.with_parameter_count(detail::get_key<int>(j, "num_parameters", "model JSON"));
    return m;
}

inline NonSimplifiedModel nonsimplified_from_json(const json& j)
{
    const RVineStructure s = detail::structure_from_json(j);
    const int d = s.dim();
    std::vector<NsEdge> edges(d * d);
    for (auto& r : detail::edges_from_json(j, s)) edges[r.edge * d + s.row_of_tree(r.tree)] = {r.copula, r.tau};
    return NonSimplifiedModel(s, std::move(edges));
}

inline json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(what + ": malformed JSON (" + e.what() + ")");
    }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- results --------------------------------------------------------------

inline json to_json(const DistanceReport& r)
{
    json j{{"method", std::string(method_name(r.method))}, {"value", r.value}};
    if (r.method == DistanceMethod::Dkl || r.method == DistanceMethod::Sdkl) {
        j["per_level"] = r.per_level;
        j["eps"] = r.eps;
        j["n_grid"] = r.n_grid;
    }
    if (r.method == DistanceMethod::KlMonteCarlo) j["std_error"] = r.std_error;
    j["clamps"] = r.clamps;
    j["negative"] = r.negative;
    return j;
}

inline json to_json(const BootstrapTestResult& r)
{
    return {{"d0", r.d0},
            {"ci_upper", r.ci_upper},
            {"p_value", r.p_value},
            {"reject", r.reject},
            {"M", r.M},
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"N", r.N},
            {"seed", r.seed},
            {"m_adequate", r.m_adequate},
            {"failed", r.failed},
            {"boot_distances", r.boot_distances}};
}

inline json to_json(const ScoreTable& t)
{
    json rows = json::array();
    const auto rd = t.ranks(Criterion::Distance), ra = t.ranks(Criterion::Aic), rb = t.ranks(Criterion::Bic);
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        rows.push_back({{"name", r.name},
                        {"num_parameters", r.num_parameters},
                        {"distance", r.distance},
                        {"loglik", r.loglik},
                        {"aic", r.aic},
                        {"bic", r.bic},
                        {"rank_distance", rd[k]},
                        {"rank_aic", ra[k]},
                        {"rank_bic", rb[k]}});
    }
    return {{"N", t.N}, {"distance_method", std::string(method_name(t.method))}, {"models", rows}};
}

/// Aligned-column text rendering of a score table.
inline std::string format_table(const ScoreTable& t)
{
    std::ostringstream s;
    const auto rd = t.ranks(Criterion::Distance), ra = t.ranks(Criterion::Aic), rb = t.ranks(Criterion::Bic);
    s << std::left << std::setw(12) << "model" << std::right << std::setw(8) << "params" << std::setw(14)
      << method_name(t.method) << std::setw(14) << "loglik" << std::setw(14) << "AIC" << std::setw(14) << "BIC"
      << "  ranks(dist/AIC/BIC)\n";
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        s << std::left << std::setw(12) << r.name << std::right << std::setw(8) << r.num_parameters << std::fixed
          << std::setprecision(5) << std::setw(14) << r.distance << std::setprecision(2) << std::setw(14) << r.loglik
          << std::setw(14) << r.aic << std::setw(14) << r.bic << "  " << rd[k] << "/" << ra[k] << "/" << rb[k] << "\n";
        s.unsetf(std::ios::fixed);
    }
    return s.str();
}

inline json to_json(const TruncationTrace& tr)
{
    json levels = json::array();
    for (const auto& lv : tr.levels)
        levels.push_back({{"k", lv.k},
                          {"distance", lv.distance},
                          {"ci_upper", lv.ci_upper},
                          {"significant", lv.significant},
                          {"p_value", lv.p_value},
                          {"M", lv.M}});
    return {{"algorithm", std::string(algorithm_name(tr.algorithm))},
            {"k_star", tr.k_star},
            {"alpha", tr.alpha},
            {"M", tr.M},
            {"seed", tr.seed},
            {"N", tr.N},
            {"d", tr.d},
            {"levels", levels},
            {"model", to_json(tr.model)}};
}

inline json to_json(const TauBand& b)
{
    return {{"grid", b.grid},
            {"lower", b.lower},
            {"median", b.median},
            {"upper", b.upper},
            {"simplified_tau", b.simplified_tau}};
}

}  // namespace vinedist

#endif
