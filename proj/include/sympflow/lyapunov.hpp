// Lyapunov exponent estimation: top exponent with convergence checkpoints,
// full spectra by QR deflation, volume-averaged exponents, exact
// periodic-orbit oracles, circle-restricted exponents over compact center
// leaves, and finite-time Oseledets-type splittings from singular vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sympflow/base_dynamics.hpp"
#include "sympflow/cocycle.hpp"
#include "sympflow/linalg.hpp"
#include "sympflow/symplectic.hpp"

namespace sympflow {

struct ExponentEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long long n = 0;
    int n_samples = 1;

    /// Statistical positivity verdict: value > 3 sigma.
    bool positive() const { return value > 3.0 * std_error; }
};

struct LyapunovSpectrum {
    std::vector<double> exponents;  // sorted descending, 2d entries
    double pairing_residual = 0.0;  // max_i |l_i + l_{2d+1-i}|
    double sum_abs = 0.0;           // |sum of exponents|
    long long n = 0;
    std::vector<std::pair<long long, std::vector<double>>> convergence;
};

namespace detail {

inline double checkpoint_stddev(const std::vector<double>& vals) {
    if (vals.size() < 2) return 1e-12;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size() - 1);
    return std::max(std::sqrt(var), 1e-12);
}

inline std::vector<long long> checkpoints(long long n) {
    std::vector<long long> cps{n / 4, n / 2, (3 * n) / 4, n};
    for (auto& c : cps) c = std::max<long long>(c, 1);
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    return cps;
}

}  // namespace detail

/// (1/n) log ||A^n(p)|| with checkpoints at n/4, n/2, 3n/4, n; the reported
/// std_error is the dispersion of the checkpoint estimates.
inline ExponentEstimate top_exponent(const CocycleField& a, const SuspensionPoint& p, long long n) {
    if (n < 1) throw PreconditionError("top_exponent: n must be >= 1");
    const auto cps = detail::checkpoints(n);
    std::vector<double> cp_vals;
    Mat acc = Mat::Identity(2 * a.d, 2 * a.d);
    double log_scale = 0.0;
    SuspensionPoint cur = a.model.normalize(p);
    std::size_t cp_idx = 0;
    for (long long k = 0; k < n; ++k) {
        if (k > 0) cur = a.model.time_one(cur);
        acc = a.evaluate(cur).m * acc;
        if ((k + 1) % 25 == 0) detail::renormalize_product(acc, log_scale, 2 * a.d);
        while (cp_idx < cps.size() && k + 1 == cps[cp_idx]) {
            if (!acc.allFinite())
                throw ConvergenceError("top_exponent: non-finite evaluation along orbit");
            cp_vals.push_back((std::log(op_norm(acc)) + log_scale) /
                              static_cast<double>(cps[cp_idx]));
            ++cp_idx;
        }
    }
    ExponentEstimate est;
    est.value = cp_vals.back();
    est.std_error = detail::checkpoint_stddev(cp_vals);
    est.n = n;
    est.n_samples = 1;
    return est;
}

/// All 2d exponents by QR deflation: propagate an orthonormal frame, QR with
/// positive diagonal, accumulate log |R_ii|.
inline LyapunovSpectrum full_spectrum(const CocycleField& a, const SuspensionPoint& p,
                                      long long n) {
    if (n < 1) throw PreconditionError("full_spectrum: n must be >= 1");
    const int two_d = 2 * a.d;
    const auto cps = detail::checkpoints(n);
    Mat q = Mat::Identity(two_d, two_d);
    Vec logs = Vec::Zero(two_d);
    LyapunovSpectrum spec;
    spec.n = n;
    SuspensionPoint cur = a.model.normalize(p);
    std::size_t cp_idx = 0;
    for (long long k = 0; k < n; ++k) {
        if (k > 0) cur = a.model.time_one(cur);
        Mat w = a.evaluate(cur).m * q;
        Eigen::HouseholderQR<Mat> qr(w);
        q = qr.householderQ() * Mat::Identity(two_d, two_d);
        Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < two_d; ++i) {
            double rii = r(i, i);
            if (rii < 0.0) {
                q.col(i) = -q.col(i);
                rii = -rii;
            }
            logs(i) += std::log(std::max(rii, 1e-300));
        }
        if (cp_idx < cps.size() && k + 1 == cps[cp_idx]) {
            std::vector<double> snap(two_d);
            for (int i = 0; i < two_d; ++i) snap[i] = logs(i) / static_cast<double>(k + 1);
            std::sort(snap.begin(), snap.end(), std::greater<double>());
            spec.convergence.emplace_back(k + 1, std::move(snap));
            ++cp_idx;
        }
        if (!q.allFinite())
            throw ConvergenceError("full_spectrum: non-finite frame along orbit");
    }
    spec.exponents.resize(two_d);
    double sum = 0.0;
    for (int i = 0; i < two_d; ++i) {
        spec.exponents[i] = logs(i) / static_cast<double>(n);
        sum += spec.exponents[i];
    }
    std::sort(spec.exponents.begin(), spec.exponents.end(), std::greater<double>());
    spec.sum_abs = std::abs(sum);
    spec.pairing_residual = 0.0;
    for (int i = 0; i < two_d; ++i)
        spec.pairing_residual = std::max(
            spec.pairing_residual, std::abs(spec.exponents[i] + spec.exponents[two_d - 1 - i]));
    return spec;
}

/// Volume average of the top exponent over sample points; std_error combines
/// Monte-Carlo dispersion and per-orbit convergence dispersion.
///
/// Over the constant roof the time-one map preserves the height, so lambda+
/// genuinely varies across height levels; the sample mean estimates the
/// volume integral L(A, mu) and the Monte-Carlo term carries that spread.
inline ExponentEstimate integrated_exponent(const CocycleField& a,
                                            const std::vector<SuspensionPoint>& samples,
                                            long long n) {
    if (samples.empty()) throw PreconditionError("integrated_exponent: no sample points");
    std::vector<double> values;
    values.reserve(samples.size());
    double orbit_se = 0.0;
    for (const auto& p : samples) {
        ExponentEstimate e = top_exponent(a, p, n);
        values.push_back(e.value);
        orbit_se += e.std_error;
    }
    orbit_se /= static_cast<double>(samples.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
    const double root_n = std::sqrt(static_cast<double>(values.size()));
    ExponentEstimate est;
    est.value = mean;
    // The per-orbit convergence error is a systematic finite-n bias, shared
    // across sample points, so it is not reduced by averaging.
    est.std_error = std::max({std::sqrt(var) / root_n, orbit_se, 1e-12});
    est.n = n;
    est.n_samples = static_cast<int>(samples.size());
    return est;
}

/// Exact oracle on a compact center leaf over the constant roof: leaf points
/// satisfy f^T(p) = p, so the exponents are (1/T) log |eig(A^T(p))|.
inline std::vector<double> periodic_exponents(const CocycleField& a, const PeriodicLeaf& leaf,
                                              const SuspensionPoint& p) {
    if (!a.model.roof.constant)
        throw PreconditionError("periodic_exponents: requires the constant roof (integer period)");
    const long long T = leaf.k;
    const SuspensionPoint q = a.model.normalize(p);
    const SuspensionPoint back = a.model.iterate_map(q, T);
    if (a.model.dist(back, q) > 1e-9)
        throw PreconditionError("periodic_exponents: point is not f^T-periodic");
    CocycleIterate it = iterate(a, q, T);
    Eigen::EigenSolver<Mat> eig(it.matrix);
    std::vector<double> out(static_cast<std::size_t>(2 * a.d));
    for (int i = 0; i < 2 * a.d; ++i)
        out[static_cast<std::size_t>(i)] =
            (std::log(std::max(std::abs(eig.eigenvalues()(i)), 1e-300)) + it.log_scale) /
            static_cast<double>(T);
    std::sort(out.begin(), out.end(), std::greater<double>());
    return out;
}

/// Leaf-averaged exponent: Lebesgue quadrature over equidistant circle starts.
inline ExponentEstimate circle_cocycle_exponent(const CircleCocycle& cc, int grid_size,
                                                long long n) {
    if (grid_size < 1) throw PreconditionError("circle_cocycle_exponent: empty grid");
    const auto cps = detail::checkpoints(n);
    std::vector<double> values;
    double orbit_se = 0.0;
    for (int g = 0; g < grid_size; ++g) {
        const double s0 = cc.leaf.T * (static_cast<double>(g) + 0.5) / static_cast<double>(grid_size);
        Mat acc = Mat::Identity(2 * cc.field.d, 2 * cc.field.d);
        double log_scale = 0.0;
        std::vector<double> cp_vals;
        std::size_t cp_idx = 0;
        for (long long k = 0; k < n; ++k) {
            acc = cc.matrix_at(s0 + static_cast<double>(k)) * acc;
            if ((k + 1) % 25 == 0) detail::renormalize_product(acc, log_scale, 2 * cc.field.d);
            if (cp_idx < cps.size() && k + 1 == cps[cp_idx]) {
                cp_vals.push_back((std::log(op_norm(acc)) + log_scale) /
                                  static_cast<double>(k + 1));
                ++cp_idx;
            }
        }
        values.push_back(cp_vals.back());
        orbit_se += detail::checkpoint_stddev(cp_vals);
    }
    orbit_se /= static_cast<double>(grid_size);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
    const double root_g = std::sqrt(static_cast<double>(grid_size));
    ExponentEstimate est;
    est.value = mean;
    // Finite-n convergence error is systematic across starts; keep it whole.
    est.std_error = std::max({std::sqrt(var) / root_g, orbit_se, 1e-12});
    est.n = n;
    est.n_samples = grid_size;
    return est;
}

struct ThetaScanEntry {
    double theta = 0.0;
    ExponentEstimate estimate;
};

struct ThetaScanResult {
    std::vector<ThetaScanEntry> entries;
    int argmax = -1;
    bool positive_found = false;

    const ThetaScanEntry& best() const { return entries.at(static_cast<std::size_t>(argmax)); }
};

/// Leaf exponent of rotation_block(theta) * A for each theta in the grid.
inline ThetaScanResult theta_scan(const CocycleField& a, const PeriodicLeaf& leaf,
                                  const std::vector<double>& theta_grid, int grid_size,
                                  long long n) {
    if (theta_grid.empty()) throw PreconditionError("theta_scan: empty theta grid");
    ThetaScanResult result;
    double best = -1e300;
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        CocycleField pert = perturb_global_rotation(a, theta_grid[i]);
        ExponentEstimate est =
            circle_cocycle_exponent(restrict_to_center_leaf(pert, leaf), grid_size, n);
        if (est.value > best) {
            best = est.value;
            result.argmax = static_cast<int>(i);
        }
        result.positive_found = result.positive_found || est.positive();
        result.entries.push_back({theta_grid[i], est});
    }
    return result;
}

struct FiniteTimeSplitting {
    Subspace expanding;    // span of the top-i right singular vectors of A^n(p)
    Subspace contracting;  // orthogonal complement within the singular frame
    std::vector<double> finite_time_exponents;  // (log sigma_j + scale)/n, descending
    double gap = 0.0;
    double gap_se = 0.0;
};

namespace detail {

/// Core of the splitting computation over any product provider n -> A^n.
/// Singular values of a symplectic matrix pair into reciprocals, so the
/// trailing half is completed algebraically from the leading half.
template <typename ProductFn>
FiniteTimeSplitting splitting_from_products(ProductFn&& product, int d, long long n,
                                            int gap_index) {
    const int two_d = 2 * d;
    if (gap_index < 1 || gap_index >= two_d)
        throw PreconditionError("finite_time_splitting: gap index out of range");
    auto exponents_at = [&](long long steps, Eigen::JacobiSVD<Mat>* svd_out) {
        CocycleIterate it = product(steps);
        Eigen::JacobiSVD<Mat> svd(it.matrix, Eigen::ComputeFullV);
        Vec sv = svd.singularValues();
        if (sv(d - 1) < 1e-14 * sv(0))
            throw ConvergenceError(
                "finite_time_splitting: leading singular values unresolved; lower n");
        std::vector<double> evs(static_cast<std::size_t>(two_d));
        for (int j = 0; j < d; ++j) {
            const double lg = std::log(sv(j)) + it.log_scale;
            evs[static_cast<std::size_t>(j)] = lg / static_cast<double>(steps);
            evs[static_cast<std::size_t>(two_d - 1 - j)] = -lg / static_cast<double>(steps);
        }
        std::sort(evs.begin(), evs.end(), std::greater<double>());
        if (svd_out) *svd_out = svd;
        return evs;
    };

    Eigen::JacobiSVD<Mat> svd;
    std::vector<double> evs = exponents_at(n, &svd);
    std::vector<double> evs_half = exponents_at(std::max<long long>(n / 2, 1), nullptr);
    const double gap = evs[static_cast<std::size_t>(gap_index - 1)] -
                       evs[static_cast<std::size_t>(gap_index)];
    const double gap_half = evs_half[static_cast<std::size_t>(gap_index - 1)] -
                            evs_half[static_cast<std::size_t>(gap_index)];
    const double se = std::max(std::abs(gap - gap_half), 1e-12);
    if (!(gap > 5.0 * se))
        throw ConvergenceError("finite_time_splitting: no spectral gap detected at index " +
                               std::to_string(gap_index));
    FiniteTimeSplitting out;
    const Mat v = svd.matrixV();
    out.expanding = Subspace{v.leftCols(gap_index)};
    out.contracting = Subspace{v.rightCols(two_d - gap_index)};
    out.finite_time_exponents = std::move(evs);
    out.gap = gap;
    out.gap_se = se;
    return out;
}

}  // namespace detail

/// Finite-time Oseledets splitting at index i from the right singular frame
/// of A^n(p).
inline FiniteTimeSplitting finite_time_splitting(const CocycleField& a, const SuspensionPoint& p,
                                                 long long n, int gap_index) {
    return detail::splitting_from_products(
        [&](long long steps) { return iterate(a, p, steps); }, a.d, n, gap_index);
}

/// Splitting along a compact center leaf at circle coordinate s, using the
/// leaf-exact orbit (floating orbits leave an unstable periodic leaf after
/// ~log(1/eps)/log|mu| steps, which would corrupt long products).
inline FiniteTimeSplitting finite_time_splitting_circle(const CircleCocycle& cc, double s,
                                                        long long n, int gap_index) {
    return detail::splitting_from_products(
        [&](long long steps) { return cc.iterate(s, steps); }, cc.field.d, n, gap_index);
}

}  // namespace sympflow
