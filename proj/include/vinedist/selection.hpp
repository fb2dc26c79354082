#ifndef VINEDIST_SELECTION_HPP
#define VINEDIST_SELECTION_HPP

/** @file
 * Scores fitted models by distance to the independence copula, log-likelihood,
 * AIC and BIC, and ranks them per criterion.
 */

#include "distance.hpp"
#include "fit.hpp"
#include "parallel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace vinedist {

enum class Criterion { Distance, LogLik, Aic, Bic };

inline std::string_view criterion_name(Criterion c)
{
    switch (c) {
    case Criterion::Distance: return "distance";
    case Criterion::LogLik: return "loglik";
    case Criterion::Aic: return "aic";
    case Criterion::Bic: return "bic";
    }
    return "?";
}

struct ScoreRow {
    std::string name;
    int num_parameters = 0;
    double distance = 0.0;  // to the independence copula
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    DistanceMethod method = DistanceMethod::Dkl;
    int N = 0;

    double value(int row, Criterion c) const
    {
        const auto& r = rows[row];
        switch (c) {
        case Criterion::Distance: return r.distance;
        case Criterion::LogLik: return r.loglik;
        case Criterion::Aic: return r.aic;
        case Criterion::Bic: return r.bic;
        }
        return 0.0;
    }

    /// Row indices best first: distance and logLik descending, AIC and BIC ascending.
    std::vector<int> ranking(Criterion c) const
    {
        std::vector<int> idx(rows.size());
        std::iota(idx.begin(), idx.end(), 0);
        const bool larger_better = c == Criterion::Distance || c == Criterion::LogLik;
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return larger_better ? value(a, c) > value(b, c) : value(a, c) < value(b, c);
        });
        return idx;
    }

    /// 1-based rank of each row.
    std::vector<int> ranks(Criterion c) const
    {
        const auto order = ranking(c);
        std::vector<int> r(rows.size());
        for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = static_cast<int>(k) + 1;
        return r;
    }
};

struct Candidate {
    std::string name;
    RVineModel model;
};

inline ScoreRow score_row(std::string name, int num_parameters, double distance, double loglik, int N)
{
    ScoreRow r;
    r.name = std::move(name);
    r.num_parameters = num_parameters;
    r.distance = distance;
    r.loglik = loglik;
    r.aic = -2.0 * loglik + 2.0 * num_parameters;
    r.bic = -2.0 * loglik + std::log(static_cast<double>(N)) * num_parameters;
    return r;
}

inline ScoreTable score_models(const Matrix& data, const std::vector<Candidate>& candidates)
{
    const int d = static_cast<int>(data.cols());
    for (const auto& c : candidates)
        if (c.model.dim() != d) throw DimensionError("candidate '" + c.name + "' does not match the data dimension");
    ScoreTable t;
    t.N = static_cast<int>(data.rows());
    t.method = d < 10 ? DistanceMethod::Dkl : DistanceMethod::Sdkl;
    t.rows.resize(candidates.size());
    const auto ind = RVineModel::independence(d);
    parallel_for(static_cast<int>(candidates.size()), [&](int k) {
        const auto& m = candidates[k].model;
        t.rows[k] = score_row(candidates[k].name, m.num_parameters(), default_distance(m, ind).value, m.loglik(data), t.N);
    });
    return t;
}

/// Fits the named model classes (gaussian, tcopula, cvine, dvine, rvine).
inline std::vector<Candidate> fit_candidates(const Matrix& data, const std::vector<std::string>& names,
                                             const std::vector<Family>& familyset = default_familyset())
{
    std::vector<Candidate> out;
    for (const auto& n : names) {
        FitConfig cfg;
        cfg.familyset = familyset;
        cfg.structure_class = structure_class_from_name(n);
        out.push_back({n, fit_model(data, cfg)});
    }
    return out;
}

/// Sample standard deviation over |mean|; 0 for constant input, infinity for a zero mean.
inline double noise_to_signal(const std::vector<double>& x)
{
    if (x.size() < 2) throw ModelError("noise-to-signal needs at least two repetitions");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) return 0.0;
    if (mean == 0.0) return std::numeric_limits<double>::infinity();
    return sd / std::abs(mean);
}

struct NoiseToSignal {
    std::string name;
    double num_parameters, distance, loglik, aic, bic;
};

/// Per-model ratios over repeated score tables with the same candidate list.
inline std::vector<NoiseToSignal> noise_to_signal(const std::vector<ScoreTable>& reps)
{
    if (reps.size() < 2) throw ModelError("noise-to-signal needs at least two repetitions");
    const std::size_t k = reps.front().rows.size();
    for (const auto& t : reps)
        if (t.rows.size() != k) throw ModelError("score tables list different candidates");
    std::vector<NoiseToSignal> out;
    for (std::size_t i = 0; i < k; ++i) {
        auto col = [&](auto field) {
            std::vector<double> v;
            for (const auto& t : reps) v.push_back(static_cast<double>(t.rows[i].*field));
            return noise_to_signal(v);
        };
        out.push_back({reps.front().rows[i].name, col(&ScoreRow::num_parameters), col(&ScoreRow::distance),
                       col(&ScoreRow::loglik), col(&ScoreRow::aic), col(&ScoreRow::bic)});
    }
    return out;
}

}  // namespace vinedist

#endif
