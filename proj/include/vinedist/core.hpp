#ifndef VINEDIST_CORE_HPP
#define VINEDIST_CORE_HPP

/** @file
 * Error types, clamping and basic aliases shared by every module.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vinedist {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower clamp applied to every copula-scale argument.
inline constexpr double kClamp = 1e-10;

struct ParameterDomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline double clamp_unit(double u) noexcept
{
    if (!(u >= kClamp)) return kClamp;  // also catches NaN
    if (u > 1.0 - kClamp) return 1.0 - kClamp;
    return u;
}

/// Checks that all entries lie in (0,1); names the first offending cell.
inline void check_copula_data(const Matrix& data, int min_rows = 1)
{
    if (data.rows() < min_rows)
        throw DataError("need at least " + std::to_string(min_rows) +
                        " observations, got " + std::to_string(data.rows()));
    for (Eigen::Index j = 0; j < data.cols(); ++j)
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double x = data(i, j);
            if (!(x > 0.0 && x < 1.0))
                throw DataError("value outside (0,1) at row " + std::to_string(i + 1) +
                                ", column " + std::to_string(j + 1));
        }
}

}  // namespace vinedist

#endif
