// Small dense linear-algebra helpers shared across the library.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sympflow {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violated input contract (bad arguments, unmet preconditions).
struct PreconditionError : Error {
    using Error::Error;
};

/// An iterative computation failed to converge or detected divergence.
struct ConvergenceError : Error {
    using Error::Error;
};

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

/// Operator 2-norm (largest singular value).
inline double op_norm(const Mat& m) {
    return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

/// A matrix stored as m * exp(log_scale), so long products never overflow.
struct ScaledMatrix {
    Mat m;
    double log_scale = 0.0;

    /// Rescale so that max|entry| == 1; the scale moves into log_scale.
    void normalize() {
        double s = max_abs(m);
        if (s <= 0.0 || !std::isfinite(s))
            throw ConvergenceError("ScaledMatrix: non-finite or zero matrix during renormalization");
        m /= s;
        log_scale += std::log(s);
    }

    /// log of the operator norm of the represented matrix.
    double log_norm() const { return std::log(op_norm(m)) + log_scale; }

    /// Dense value; only safe when |log_scale| is moderate.
    Mat dense() const { return m * std::exp(log_scale); }
};

}  // namespace sympflow
