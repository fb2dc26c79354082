// vinedist command-line tool: fit, simulate, distances, bootstrap tests,
// model selection, truncation and simulation studies.

#include "vinedist/io.hpp"
#include "vinedist/scenarios.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <set>
#include <variant>

using namespace vinedist;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string output;
    bool quiet = false;
};

Common common;

void log(const std::string& msg)
{
    if (!common.quiet) std::cerr << "[vinedist] " << msg << '\n';
}

void emit(const std::string& text)
{
    if (common.output.empty()) std::cout << text << std::flush;
    else write_file_atomic(common.output, text);
}

std::vector<Family> parse_familyset(const std::string& s)
{
    std::vector<Family> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(family_from_name(tok));
    if (out.empty()) throw ModelError("empty family set");
    return out;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(tok);
    return out;
}

using AnyModel = std::variant<RVineModel, NonSimplifiedModel>;

AnyModel load_model(const std::string& path)
{
    const json j = parse_json(read_file(path), path);
    if (is_nonsimplified_json(j)) return nonsimplified_from_json(j);
    return rvine_from_json(j);
}

Matrix load_data(const std::string& path)
{
    auto csv = read_csv_file(path);
    log("read " + std::to_string(csv.values.rows()) + " x " + std::to_string(csv.values.cols()) + " from " + path);
    return csv.values;
}

void check_boot(double alpha, int m, double beta)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("--alpha must lie in (0, 1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ModelError("--beta must lie in (0, 1)");
    if (m < 1) throw ModelError("--m must be positive");
}

/// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(read_file(path));
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ": line " + std::to_string(line_no) + " is not of the form key = value");
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

struct Settings {
    std::map<std::string, std::string> kv;
    std::set<std::string> used;

    double num(const std::string& k, double def)
    {
        used.insert(k);
        auto it = kv.find(k);
        if (it == kv.end()) return def;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw DataError("setting '" + k + "': '" + it->second + "' is not a number");
        }
    }
    int integer(const std::string& k, int def)
    {
        const double v = num(k, def);
        if (v != std::floor(v)) throw DataError("setting '" + k + "' must be an integer");
        return static_cast<int>(v);
    }
    void check_unused() const
    {
        for (const auto& [k, v] : kv)
            if (!used.count(k)) throw DataError("unknown setting '" + k + "' for this preset");
    }
};

std::string fmt(double x)
{
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Vine copula model distances, bootstrap tests, model selection and truncation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    app.add_option("--seed", common.seed, "master seed of all random streams");
    app.add_option("--threads", common.threads, "worker threads (default: VINEDIST_THREADS or hardware)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("-o,--output", common.output, "write the result here instead of stdout");
    app.add_flag("-q,--quiet", common.quiet, "no log lines on stderr");

    std::string familyset = "gaussian,t,clayton,gumbel,frank,joe";

    // fit
    auto* fit = app.add_subcommand("fit", "fit a vine copula to copula-scale CSV data; prints model JSON");
    std::string fit_data, fit_class = "rvine";
    int fit_trunc = -1;
    bool fit_ns = false;
    fit->add_option("data", fit_data, "CSV file")->required();
    fit->add_option("--familyset", familyset, "comma-separated pair-copula families");
    fit->add_option("--structure-class", fit_class, "rvine, cvine, dvine, gaussian or tcopula");
    fit->add_option("--truncation-level", fit_trunc, "fit trees 1..k only");
    std::string fit_structure_from;
    fit->add_flag("--nonsimplified", fit_ns, "also fit linear tau functions on the conditional edges");
    fit->add_option("--structure-from", fit_structure_from, "model JSON whose vine structure is kept fixed");

    // simulate
    auto* sim = app.add_subcommand("simulate", "sample from a model JSON; prints CSV");
    std::string sim_model;
    int sim_n = 0;
    sim->add_option("model", sim_model, "model JSON")->required();
    sim->add_option("-n,--n", sim_n, "number of rows")->required()->check(CLI::PositiveNumber);

    // distance
    auto* dist = app.add_subcommand("distance", "distance between two model JSON files");
    std::string dist_f, dist_g, dist_method = "dkl";
    double dist_eps = 0.025;
    int dist_grid = 10, dist_mc = 100000, dist_nodes = 64;
    dist->add_option("f", dist_f, "model f (expectation taken under f)")->required();
    dist->add_option("g", dist_g, "model g")->required();
    dist->add_option("--method", dist_method, "kl, mc, dkl or sdkl");
    dist->add_option("--eps", dist_eps, "diagonal trimming")->check(CLI::Range(1e-6, 0.49));
    dist->add_option("--n-grid", dist_grid, "points per diagonal")->check(CLI::Range(2, 10000));
    dist->add_option("--mc-n", dist_mc, "Monte Carlo sample size")->check(CLI::Range(1000, 100000000));
    dist->add_option("--nodes", dist_nodes, "quadrature nodes per axis for kl")->check(CLI::Range(4, 400));

    // bootstrap options shared by the tests
    double alpha = 0.05, beta = 0.01;
    int boot_m = 100, max_m = 800;
    bool auto_m = false;
    auto add_boot = [&](CLI::App* c) {
        c->add_option("--alpha", alpha, "significance level");
        c->add_option("--beta", beta, "level of the adequacy interval for --auto-m");
        c->add_option("--m", boot_m, "bootstrap replicates");
        c->add_flag("--auto-m", auto_m, "double M until the decision is adequate");
        c->add_option("--max-m", max_m, "cap for --auto-m");
    };

    auto* ts = app.add_subcommand("test-simplified", "bootstrap test of simplified against non-simplified vines");
    std::string ts_data, ts_model;
    bool ts_reselect = false;
    ts->add_option("data", ts_data, "CSV file")->required();
    ts->add_option("--model", ts_model, "simplified model JSON fixing structure and families");
    ts->add_flag("--reselect", ts_reselect, "re-select structure and families in every refit");
    ts->add_option("--familyset", familyset, "comma-separated pair-copula families");
    add_boot(ts);

    auto* tn = app.add_subcommand("test-nested", "bootstrap test of a model class against a larger one");
    std::string tn_data, tn_f = "gaussian", tn_g = "rvine";
    tn->add_option("data", tn_data, "CSV file")->required();
    tn->add_option("--class-f", tn_f, "nested class (gaussian, tcopula, cvine, dvine, rvine)");
    tn->add_option("--class-g", tn_g, "larger class");
    tn->add_option("--familyset", familyset, "comma-separated pair-copula families");
    add_boot(tn);

    auto* sel = app.add_subcommand("select", "score fitted candidate models");
    std::string sel_data, sel_cands = "gaussian,tcopula,cvine,dvine,rvine", sel_format = "json";
    sel->add_option("data", sel_data, "CSV file")->required();
    sel->add_option("--candidates", sel_cands, "comma-separated model classes");
    sel->add_option("--familyset", familyset, "comma-separated pair-copula families");
    sel->add_option("--format", sel_format, "json or text")->check(CLI::IsMember({"json", "text"}));

    auto* tr = app.add_subcommand("truncate", "select a truncation level");
    std::string tr_data, tr_alg = "global", tr_trace;
    bool tr_refamily = false;
    tr->add_option("data", tr_data, "CSV file")->required();
    tr->add_option("--algorithm", tr_alg, "global or sequential")->check(CLI::IsMember({"global", "sequential"}));
    tr->add_option("--trace", tr_trace, "write k,distance,ci_upper CSV here");
    tr->add_flag("--refit-families", tr_refamily, "re-select families in bootstrap refits (slower)");
    tr->add_option("--familyset", familyset, "comma-separated pair-copula families");
    add_boot(tr);

    auto* tb = app.add_subcommand("tau-band", "bootstrap band of a conditional edge's tau function; prints CSV");
    std::string tb_model;
    int tb_tree = 2, tb_edge = 0, tb_n = 0;
    tb->add_option("model", tb_model, "simplified model JSON")->required();
    tb->add_option("--tree", tb_tree, "tree of the edge (>= 2)");
    tb->add_option("--edge", tb_edge, "edge index within the tree");
    tb->add_option("-n,--n", tb_n, "sample size")->required()->check(CLI::PositiveNumber);
    tb->add_option("--alpha", alpha, "1 - coverage of the band");
    tb->add_option("--m", boot_m, "replicates");

    auto* st = app.add_subcommand("study", "simulation studies; prints CSV");
    std::string st_preset, st_config;
    std::vector<std::string> st_set;
    st->add_option("--preset", st_preset, "power, level, selection or truncation")
        ->required()
        ->check(CLI::IsMember({"power", "level", "selection", "truncation"}));
    st->add_option("--config", st_config, "key = value settings file");
    st->add_option("--set", st_set, "key=value override (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (common.threads > 0) set_num_threads(common.threads);
        const std::string cmd = app.get_subcommands().front()->get_name();
        log(std::string("vinedist ") + kVersion + " (Eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
            std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) + ", Boost " +
            std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + ") " + cmd +
            " seed=" + std::to_string(common.seed) + " threads=" + std::to_string(num_threads()));
        const auto fams = parse_familyset(familyset);

        if (*fit) {
            FitConfig cfg;
            cfg.familyset = fams;
            cfg.structure_class = structure_class_from_name(fit_class);
            const Matrix x = load_data(fit_data);
            if (fit_trunc >= 0) cfg.truncation_level = fit_trunc;
            if (!fit_structure_from.empty()) {
                const AnyModel s = load_model(fit_structure_from);
                cfg.structure = std::visit([](const auto& m) { return m.structure(); }, s);
                if (cfg.structure->dim() != x.cols()) throw DimensionError("--structure-from dimension does not match the data");
            }
            const RVineModel m = fit_model(x, cfg);
            if (fit_ns) {
                const auto r = fit_nonsimplified_detailed(x, m);
                if (r.fallbacks) log(std::to_string(r.fallbacks) + " edge(s) kept simplified (optimizer fallback)");
                emit(dump(to_json(r.model)));
            } else {
                emit(dump(to_json(m)));
            }
            log("loglik " + fmt(m.loglik(x)) + ", " + std::to_string(m.num_parameters()) + " parameters");
        } else if (*sim) {
            const AnyModel m = load_model(sim_model);
            Rng rng = Rng::stream(common.seed, "sim");
            const Matrix x = std::visit([&](const auto& mm) { return mm.sample(sim_n, rng); }, m);
            std::ostringstream s;
            write_csv(s, x);
            emit(s.str());
        } else if (*dist) {
            const DistanceMethod method = method_from_name(dist_method);
            const AnyModel f = load_model(dist_f), g = load_model(dist_g);
            const int df = std::visit([](const auto& m) { return m.dim(); }, f);
            const int dg = std::visit([](const auto& m) { return m.dim(); }, g);
            if (df != dg) throw DimensionError("models have dimensions " + std::to_string(df) + " and " + std::to_string(dg));
            if (method == DistanceMethod::KlNumeric && df > 3)
                throw DimensionError("kl (numerical integration) supports d <= 3; use mc, dkl or sdkl");
            Rng rng = Rng::stream(common.seed, "mc");
            const DistanceReport r = std::visit(
                [&](const auto& a, const auto& b) {
                    switch (method) {
                    case DistanceMethod::KlNumeric: return kl_numeric(a, b, dist_nodes);
                    case DistanceMethod::KlMonteCarlo: return kl_monte_carlo(a, b, dist_mc, rng);
                    case DistanceMethod::Dkl: return dkl(a, b, dist_eps, dist_grid);
                    case DistanceMethod::Sdkl: break;
                    }
                    return sdkl(a, b, dist_eps, dist_grid);
                },
                f, g);
            emit(dump(to_json(r)));
        } else if (*ts || *tn) {
            check_boot(alpha, boot_m, beta);
            BootstrapConfig cfg;
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.M = boot_m;
            cfg.auto_m = auto_m;
            cfg.max_m = max_m;
            cfg.seed = common.seed;
            BootstrapTestResult r;
            if (*ts) {
                const Matrix x = load_data(ts_data);
                SimplifyingOptions opt;
                opt.familyset = fams;
                opt.reselect = ts_reselect;
                if (!ts_model.empty()) {
                    const AnyModel m = load_model(ts_model);
                    if (!std::holds_alternative<RVineModel>(m)) throw ModelError("--model must be a simplified vine");
                    opt.fixed = std::get<RVineModel>(m);
                    if (opt.fixed->dim() != x.cols()) throw DimensionError("--model dimension does not match the data");
                }
                if (x.cols() < 3) throw DimensionError("the simplifying test needs d >= 3");
                r = test_simplifying(x, cfg, opt);
            } else {
                const Matrix x = load_data(tn_data);
                FitConfig cf, cg;
                cf.familyset = cg.familyset = fams;
                cf.structure_class = structure_class_from_name(tn_f);
                cg.structure_class = structure_class_from_name(tn_g);
                r = test_nested(x, cf, cg, cfg);
            }
            log("d0 " + fmt(r.d0) + ", ci_upper " + fmt(r.ci_upper) + ", p " + fmt(r.p_value) +
                (r.reject ? ", reject" : ", no rejection"));
            emit(dump(to_json(r)));
        } else if (*sel) {
            const Matrix x = load_data(sel_data);
            const auto names = split_list(sel_cands);
            for (const auto& n : names) structure_class_from_name(n);
            const auto t = score_models(x, fit_candidates(x, names, fams));
            emit(sel_format == "text" ? format_table(t) : dump(to_json(t)));
        } else if (*tr) {
            check_boot(alpha, boot_m, beta);
            const Matrix x = load_data(tr_data);
            TruncationConfig cfg;
            cfg.alpha = alpha;
            cfg.M = boot_m;
            cfg.seed = common.seed;
            cfg.familyset = fams;
            cfg.fast = !tr_refamily;
            cfg.auto_m = auto_m;
            cfg.max_m = max_m;
            const auto trace = optimal_truncation(x, algorithm_from_name(tr_alg), cfg);
            if (!tr_trace.empty()) {
                std::ostringstream s;
                emit_trace(trace, s);
                write_file_atomic(tr_trace, s.str());
            }
            log("k* = " + std::to_string(trace.k_star));
            emit(dump(to_json(trace)));
        } else if (*tb) {
            if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("--alpha must lie in (0, 1)");
            if (boot_m < 2) throw ModelError("--m must be at least 2");
            const AnyModel m = load_model(tb_model);
            if (!std::holds_alternative<RVineModel>(m)) throw ModelError("tau-band needs a simplified model");
            Rng rng = Rng::stream(common.seed, "band");
            const auto band = tau_band(std::get<RVineModel>(m), tb_tree, tb_edge, boot_m, alpha, tb_n, rng);
            std::ostringstream s;
            s << "u,lower,median,upper\n";
            for (std::size_t k = 0; k < band.grid.size(); ++k)
                s << fmt(band.grid[k]) << ',' << fmt(band.lower[k]) << ',' << fmt(band.median[k]) << ','
                  << fmt(band.upper[k]) << '\n';
            emit(s.str());
        } else if (*st) {
            Settings set;
            if (!st_config.empty()) set.kv = read_config(st_config);
            for (const auto& kv : st_set) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw DataError("--set expects key=value, got '" + kv + "'");
                set.kv[detail::trim(kv.substr(0, eq))] = detail::trim(kv.substr(eq + 1));
            }
            std::ostringstream s;
            if (st_preset == "power" || st_preset == "level") {
                const double a = set.num("a", 0.3);
                const double b = set.num("b", a);
                const int n = set.integer("n", 500), p = set.integer("p", 20);
                BootstrapConfig cfg;
                cfg.M = set.integer("m", 100);
                cfg.alpha = set.num("alpha", 0.05);
                set.check_unused();
                check_boot(cfg.alpha, cfg.M, 0.01);
                if (n < 30 || p < 1) throw ModelError("n must be at least 30 and p positive");
                const auto rows = st_preset == "power" ? power_curve(a, n, p, cfg, common.seed)
                                                       : std::vector<RejectionRate>{rejection_rate(a, b, n, p, cfg, common.seed)};
                s << "a,b,rejection_rate,rejections,repetitions\n";
                for (const auto& r : rows)
                    s << fmt(r.a) << ',' << fmt(r.b) << ',' << fmt(r.rate()) << ',' << r.rejections << ',' << r.repetitions
                      << '\n';
            } else if (st_preset == "selection") {
                const int n = set.integer("n", 3000), reps = set.integer("reps", 20);
                set.check_unused();
                if (n < 30 || reps < 1) throw ModelError("n must be at least 30 and reps positive");
                const std::vector<std::string> classes{"gaussian", "cvine", "dvine", "rvine"};
                const auto tables = selection_study(mixed_vine5(), n, reps, classes, common.seed, fams);
                s << "rep,model,num_parameters,distance,loglik,aic,bic,rank_distance,rank_aic,rank_bic\n";
                int agree = 0;
                for (std::size_t r = 0; r < tables.size(); ++r) {
                    const auto& t = tables[r];
                    const auto rd = t.ranks(Criterion::Distance), ra = t.ranks(Criterion::Aic), rb = t.ranks(Criterion::Bic);
                    agree += rd == ra;
                    for (std::size_t k = 0; k < t.rows.size(); ++k) {
                        const auto& row = t.rows[k];
                        s << r << ',' << row.name << ',' << row.num_parameters << ',' << fmt(row.distance) << ','
                          << fmt(row.loglik) << ',' << fmt(row.aic) << ',' << fmt(row.bic) << ',' << rd[k] << ',' << ra[k]
                          << ',' << rb[k] << '\n';
                    }
                }
                log("distance ranking equals AIC ranking in " + std::to_string(agree) + " of " + std::to_string(reps) +
                    " repetitions");
                if (tables.size() >= 2)
                    for (const auto& q : noise_to_signal(tables))
                        log("noise-to-signal " + q.name + ": distance " + fmt(q.distance) + ", AIC " + fmt(q.aic) +
                            ", BIC " + fmt(q.bic));
            } else {
                const int d = set.integer("d", 8), k = set.integer("k", 4), n = set.integer("n", 2000),
                          runs = set.integer("runs", 10);
                const double nu = set.num("nu", 3.0);
                TruncationConfig cfg;
                cfg.M = set.integer("m", 100);
                cfg.alpha = set.num("alpha", 0.05);
                cfg.familyset = fams;
                set.check_unused();
                check_boot(cfg.alpha, cfg.M, 0.01);
                if (d < 3 || k < 0 || k > d - 1 || n < 30 || runs < 1) throw ModelError("invalid truncation study settings");
                const auto rows = truncation_study(d, k, nu, n, runs, cfg, common.seed);
                s << "run,k_global,k_sequential\n";
                for (std::size_t r = 0; r < rows.size(); ++r)
                    s << r << ',' << rows[r].k_global << ',' << rows[r].k_sequential << '\n';
            }
            emit(s.str());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream w;
        w << std::fixed << std::setprecision(3) << secs;
        log("done in " + w.str() + " s");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
