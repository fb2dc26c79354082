#ifndef VINEDIST_TRUNCATION_HPP
#define VINEDIST_TRUNCATION_HPP

/** @file
 * Truncation level selection.  The global algorithm fits the full vine and
 * scans m = d-2, ..., 0 for the first truncated model that differs
 * significantly from it; the sequential algorithm grows the vine tree by
 * tree until a new tree adds nothing significant.
 */

#include "boottest.hpp"
#include "fit.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

namespace vinedist {

enum class TruncationAlgorithm { Global, Sequential };

inline std::string_view algorithm_name(TruncationAlgorithm a)
{
    return a == TruncationAlgorithm::Global ? "global" : "sequential";
}

inline TruncationAlgorithm algorithm_from_name(std::string_view s)
{
    if (s == "global") return TruncationAlgorithm::Global;
    if (s == "sequential") return TruncationAlgorithm::Sequential;
    throw ModelError("unknown truncation algorithm '" + std::string(s) + "'");
}

struct TruncationConfig {
    double alpha = 0.05;
    int M = 100;
    std::uint64_t seed = 0;
    std::vector<Family> familyset = default_familyset();
    /// Refit parameters only; otherwise families are re-selected on the fixed structure.
    bool fast = true;
    bool auto_m = false;
    int max_m = 800;
};

struct TruncationLevel {
    int k = 0;
    double distance = 0.0;
    double ci_upper = 0.0;
    bool significant = false;
    double p_value = 1.0;
    int M = 0;  // 0 when no bootstrap was needed
};

struct TruncationTrace {
    TruncationAlgorithm algorithm = TruncationAlgorithm::Global;
    std::vector<TruncationLevel> levels;  // in scan order
    int k_star = 0;
    double alpha = 0.05;
    int M = 100;
    std::uint64_t seed = 0;
    int N = 0;
    int d = 0;
    RVineModel model = RVineModel::independence(1);  // the model truncated at k_star
};

namespace detail {

inline void check_truncation_input(const Matrix& data, const TruncationConfig& cfg)
{
    if (data.cols() < 3) throw DimensionError("truncation selection needs d >= 3");
    check_fit_data(data);
    if (cfg.M < 1) throw ModelError("M must be positive");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ModelError("alpha must lie in (0, 1)");
}

inline BootstrapConfig level_bootstrap(const TruncationConfig& cfg, int m)
{
    BootstrapConfig b;
    b.M = cfg.M;
    b.alpha = cfg.alpha;
    b.auto_m = cfg.auto_m;
    b.max_m = cfg.max_m;
    b.seed = Rng::stream(cfg.seed, "level", static_cast<std::uint64_t>(m))();
    return b;
}

inline RVineModel refit_like(const RVineModel& tmpl, const Matrix& x, const TruncationConfig& cfg)
{
    if (cfg.fast) return refit_parameters(tmpl, x);
    return fit_structure(x, tmpl.structure(), cfg.familyset, tmpl.truncation_level());
}

/// Bootstrap of "tRV(m) is the true model" against the model `larger`
/// (trees above m may be non-independence).  `dist(small, large)` orders the pair.
template <class Dist>
TruncationLevel truncation_level_test(const Matrix& data, const RVineModel& larger, int m, Dist&& dist,
                                      const TruncationConfig& cfg)
{
    TruncationLevel lv;
    lv.k = m;
    const RVineModel small = larger.truncate(m);
    bool same = true;
    for (int t = m + 1; t <= larger.truncation_level() && same; ++t)
        for (int e = 0; e < larger.dim() - t; ++e)
            if (!larger.copula(t, e).is_independence()) same = false;
    if (same) return lv;  // d0 = 0 and every replicate distance is 0 as well

    auto fit_both = [&](const Matrix& x) {
        if (&x == &data) return std::make_pair(small, larger);
        RVineModel g = refit_like(larger, x, cfg);
        return std::make_pair(g.truncate(m), g);
    };
    const auto r = bootstrap_test(data, fit_both, dist, level_bootstrap(cfg, m));
    lv.distance = r.d0;
    lv.ci_upper = r.ci_upper;
    lv.significant = r.reject;
    lv.p_value = r.p_value;
    lv.M = r.M;
    return lv;
}

}  // namespace detail

/// Algorithm 1: backward scan from the full Dißmann fit.
inline TruncationTrace optimal_truncation_global(const Matrix& data, const TruncationConfig& cfg = {})
{
    detail::check_truncation_input(data, cfg);
    const int d = static_cast<int>(data.cols());
    FitConfig fc;
    fc.familyset = cfg.familyset;
    const RVineModel full = fit_model(data, fc);

    TruncationTrace tr;
    tr.algorithm = TruncationAlgorithm::Global;
    tr.alpha = cfg.alpha;
    tr.M = cfg.M;
    tr.seed = cfg.seed;
    tr.N = static_cast<int>(data.rows());
    tr.d = d;
    TruncationLevel top;
    top.k = d - 1;
    tr.levels.push_back(top);
    auto dist = [](const RVineModel& truncated, const RVineModel& f) { return sdkl(f, truncated).value; };
    for (int m = d - 2; m >= 0; --m) {
        tr.levels.push_back(detail::truncation_level_test(data, full, m, dist, cfg));
        if (tr.levels.back().significant) {
            tr.k_star = m + 1;
            break;
        }
    }
    tr.model = full.truncate(tr.k_star);
    return tr;
}

/// Algorithm 2: forward extension with frozen lower trees.
inline TruncationTrace optimal_truncation_sequential(const Matrix& data, const TruncationConfig& cfg = {})
{
    detail::check_truncation_input(data, cfg);
    const int d = static_cast<int>(data.cols());
    TreewiseFit tf(data, StructureClass::RVine, cfg.familyset);

    TruncationTrace tr;
    tr.algorithm = TruncationAlgorithm::Sequential;
    tr.alpha = cfg.alpha;
    tr.M = cfg.M;
    tr.seed = cfg.seed;
    tr.N = static_cast<int>(data.rows());
    tr.d = d;
    tr.k_star = d - 1;
    auto dist = [](const RVineModel& prev, const RVineModel& cur) { return sdkl(prev, cur).value; };
    RVineModel cur = tf.model();
    for (int m = 1; m <= d - 1; ++m) {
        tf.next_tree(true);
        cur = tf.model();
        auto lv = detail::truncation_level_test(data, cur, m - 1, dist, cfg);
        lv.k = m;
        tr.levels.push_back(lv);
        if (!lv.significant) {
            tr.k_star = m - 1;
            break;
        }
    }
    tr.model = cur.truncate(tr.k_star);
    return tr;
}

inline TruncationTrace optimal_truncation(const Matrix& data, TruncationAlgorithm a, const TruncationConfig& cfg = {})
{
    return a == TruncationAlgorithm::Global ? optimal_truncation_global(data, cfg)
                                            : optimal_truncation_sequential(data, cfg);
}

/// CSV with header "k,distance,ci_upper", one row per scanned level.
inline void emit_trace(const TruncationTrace& tr, std::ostream& os)
{
    std::ostringstream s;
    s << std::setprecision(17);
    s << "k,distance,ci_upper\n";
    for (const auto& lv : tr.levels) s << lv.k << ',' << lv.distance << ',' << lv.ci_upper << '\n';
    os << s.str();
}

}  // namespace vinedist

#endif
