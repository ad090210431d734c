// Projective fiber-measure estimation and numerical su / su-c invariance
// probes.
//
// Fiber measures are weighted atom clouds on RP^{2d-1}, estimated by pushing
// a fixed low-discrepancy cloud forward along the orbit from f^{-n}(x).
// Transport defects are 1-Wasserstein distances between holonomy-pushed
// measures; every defect is reported both raw and centered against the
// estimator's own noise floor (the distance between two independent
// re-estimates of the same fiber), since atom-count noise would otherwise
// dominate the zero-defect regime.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sympflow/base_dynamics.hpp"
#include "sympflow/cocycle.hpp"
#include "sympflow/holonomy.hpp"
#include "sympflow/linalg.hpp"
#include "sympflow/lyapunov.hpp"
#include "sympflow/rng.hpp"
#include "sympflow/symplectic.hpp"

namespace sympflow {

constexpr double kPi = 3.14159265358979323846;

/// Weighted atom cloud on projective space; weights are positive and sum to 1.
struct FiberMeasure {
    std::vector<ProjectivePoint> atoms;
    std::vector<double> weights;

    static FiberMeasure make(std::vector<ProjectivePoint> atoms, std::vector<double> weights) {
        if (atoms.empty() || atoms.size() != weights.size())
            throw PreconditionError("FiberMeasure: atom/weight size mismatch");
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw PreconditionError("FiberMeasure: weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw PreconditionError("FiberMeasure: weights must sum to 1");
        return {std::move(atoms), std::move(weights)};
    }

    static FiberMeasure uniform(std::vector<ProjectivePoint> atoms) {
        std::vector<double> w(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
        return {std::move(atoms), std::move(w)};
    }

    int n_atoms() const { return static_cast<int>(atoms.size()); }
};

/// Push-forward under a linear map: atoms move, weights stay.
inline FiberMeasure push_measure(const Mat& b, const FiberMeasure& m) {
    FiberMeasure out = m;
    for (auto& atom : out.atoms) atom = projective_act(b, atom);
    return out;
}

namespace detail {

/// Exact 1-Wasserstein distance between weighted atom sets on a circle of
/// given circumference: minimize int |F_mu - F_nu - c| over the shift c
/// (weighted median of the CDF difference).
inline double w1_circle(std::vector<std::pair<double, double>> ev, double circumference) {
    std::sort(ev.begin(), ev.end());
    std::vector<double> g_vals, seg_len;
    double g = 0.0;
    for (std::size_t i = 0; i < ev.size();) {
        const double x = ev[i].first;
        while (i < ev.size() && ev[i].first == x) {
            g += ev[i].second;
            ++i;
        }
        const double next_x = i < ev.size() ? ev[i].first : ev.front().first + circumference;
        g_vals.push_back(g);
        seg_len.push_back(next_x - x);
    }
    std::vector<std::size_t> order(g_vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return g_vals[a] < g_vals[b]; });
    const double half = 0.5 * circumference;
    double cum = 0.0, median = g_vals[order.back()];
    for (std::size_t idx : order) {
        cum += seg_len[idx];
        if (cum >= half) {
            median = g_vals[idx];
            break;
        }
    }
    double w1 = 0.0;
    for (std::size_t i = 0; i < g_vals.size(); ++i)
        w1 += seg_len[i] * std::abs(g_vals[i] - median);
    return w1;
}

/// Exact 1-d W1 on the line between weighted point sets (CDF difference).
inline double w1_line(std::vector<std::pair<double, double>> ev) {
    std::sort(ev.begin(), ev.end());
    double w1 = 0.0, g = 0.0;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
        g += ev[i].second;
        w1 += std::abs(g) * (ev[i + 1].first - ev[i].first);
    }
    return w1;
}

}  // namespace detail

/// Sliced 1-Wasserstein approximation: atoms are projected to their acute
/// angle against each of n_dirs fixed random directions, the 1-d transport
/// costs are averaged, and the Dirac-pair response S = D (1 - D/pi) of the
/// folded slice is inverted so that Dirac pairs come out exact on RP^1.
inline double projective_distance_sliced(const FiberMeasure& m1, const FiberMeasure& m2,
                                         int n_dirs = 32) {
    const long dim = m1.atoms.front().v.size();
    Rng rng(0x51cedd);
    const double offset = rng.uniform(0.0, kPi);
    double mean = 0.0;
    for (int k = 0; k < n_dirs; ++k) {
        Vec u(dim);
        if (dim == 2) {
            // Stratified directions on the circle: the slice average is a
            // quadrature, not a Monte-Carlo draw.
            const double beta = offset + kPi * (static_cast<double>(k) + 0.5) / n_dirs;
            u << std::cos(beta), std::sin(beta);
        } else {
            for (long i = 0; i < dim; ++i) u(i) = rng.normal();
            u.normalize();
        }
        std::vector<std::pair<double, double>> ev;
        ev.reserve(m1.atoms.size() + m2.atoms.size());
        for (std::size_t i = 0; i < m1.atoms.size(); ++i)
            ev.emplace_back(std::acos(std::clamp(std::abs(u.dot(m1.atoms[i].v)), 0.0, 1.0)),
                            m1.weights[i]);
        for (std::size_t i = 0; i < m2.atoms.size(); ++i)
            ev.emplace_back(std::acos(std::clamp(std::abs(u.dot(m2.atoms[i].v)), 0.0, 1.0)),
                            -m2.weights[i]);
        mean += detail::w1_line(std::move(ev));
    }
    mean /= n_dirs;
    if (mean >= kPi / 4.0) return kPi / 2.0;
    return (kPi - std::sqrt(kPi * kPi - 4.0 * kPi * mean)) / 2.0;
}

/// 1-Wasserstein distance for the ground metric d([u],[v]) = acute angle.
/// Exact by circular sorting on RP^1; the sliced approximation for d >= 2.
inline double projective_distance(const FiberMeasure& m1, const FiberMeasure& m2) {
    if (m1.atoms.empty() || m2.atoms.empty())
        throw PreconditionError("projective_distance: empty measure");
    const long dim = m1.atoms.front().v.size();
    if (dim != m2.atoms.front().v.size())
        throw PreconditionError("projective_distance: dimension mismatch");

    // Bitwise-identical measures are exactly at distance zero.
    if (m1.atoms.size() == m2.atoms.size()) {
        bool identical = true;
        for (std::size_t i = 0; identical && i < m1.atoms.size(); ++i)
            identical = m1.weights[i] == m2.weights[i] && m1.atoms[i].v == m2.atoms[i].v;
        if (identical) return 0.0;
    }

    if (dim == 2) {
        std::vector<std::pair<double, double>> ev;
        ev.reserve(m1.atoms.size() + m2.atoms.size());
        for (std::size_t i = 0; i < m1.atoms.size(); ++i)
            ev.emplace_back(rp1_angle(m1.atoms[i]), m1.weights[i]);
        for (std::size_t i = 0; i < m2.atoms.size(); ++i)
            ev.emplace_back(rp1_angle(m2.atoms[i]), -m2.weights[i]);
        return detail::w1_circle(std::move(ev), kPi);
    }
    return projective_distance_sliced(m1, m2);
}

struct EstimatorParams {
    int n_transient = 64;    // shallowest transient depth
    int depth_window = 16;   // number of averaged depths (Krylov-Bogolyubov)
    int n_atoms = 512;       // total atoms across all depth slices
    std::uint64_t seed = 1;
};

/// Backward-orbit push-forward estimate of the fiber measure m_x.
///
/// A low-discrepancy cloud slice (equidistant on RP^1, seeded directions for
/// d >= 2) is pushed through A^{n}(f^{-n} x) for each depth n in
/// [n_transient, n_transient + depth_window); the slices are pooled with
/// equal weight.  The depth average matters in the zero-exponent regime,
/// where a single-depth push never converges (it keeps rotating) -- averaged
/// pushes converge to an invariant measure in the time-average sense.  All
/// depths are computed in one backward pass.
///
/// One shared seeded cloud feeds every depth slice.  That makes the family
/// F_A-equivariance-consistent by construction: pushing m_x by A(x)
/// reproduces the depth slices of m_{f(x)} except at the two window
/// boundaries, since both walk the same backward orbit with the same cloud.
inline FiberMeasure estimate_fiber_measure(const CocycleField& a, const SuspensionPoint& x,
                                           const EstimatorParams& params) {
    const int window = std::max(params.depth_window, 1);
    const int per_slice = std::max(params.n_atoms / window, 1);
    Rng rng(sub_seed(0xf1be50, params.seed));

    std::vector<ProjectivePoint> cloud;
    cloud.reserve(static_cast<std::size_t>(per_slice));
    if (a.d == 1) {
        const double offset = rng.uniform(0.0, kPi);
        for (int k = 0; k < per_slice; ++k) {
            const double ang =
                offset + kPi * (static_cast<double>(k) + 0.5) / static_cast<double>(per_slice);
            cloud.push_back(ProjectivePoint::from(Vec{{std::cos(ang), std::sin(ang)}}));
        }
    } else {
        for (int k = 0; k < per_slice; ++k) {
            Vec v(2 * a.d);
            for (int i = 0; i < 2 * a.d; ++i) v(i) = rng.normal();
            cloud.push_back(ProjectivePoint::from(std::move(v)));
        }
    }

    // A^{depth+1}(f^{-(depth+1)} x) = A^{depth}(f^{-depth} x) A(f^{-(depth+1)} x):
    // deeper pushes append factors on the right, so all depths come from one
    // backward walk extending the depth-n_transient product.
    SuspensionPoint deep = a.model.iterate_map(a.model.normalize(x), -params.n_transient);
    CocycleIterate acc = iterate(a, deep, params.n_transient);
    std::vector<ProjectivePoint> atoms;
    atoms.reserve(static_cast<std::size_t>(per_slice * window));
    for (int w = 0; w < window; ++w) {
        if (w > 0) {
            deep = a.model.flow(deep, -1.0);
            acc.matrix = acc.matrix * a.evaluate(deep).m;
            if (w % 25 == 0) {
                const double s = max_abs(acc.matrix);
                if (s > 1e100 || s < 1e-100) {
                    acc.matrix /= s;
                    acc.log_scale += std::log(s);
                }
            }
        }
        for (const auto& atom : cloud) atoms.push_back(projective_act(acc.matrix, atom));
    }
    return FiberMeasure::uniform(std::move(atoms));
}

inline std::vector<FiberMeasure> estimate_fiber_measures(const CocycleField& a,
                                                         const std::vector<SuspensionPoint>& xs,
                                                         const EstimatorParams& params) {
    std::vector<FiberMeasure> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(estimate_fiber_measure(a, x, params));
    return out;
}

/// Independent re-estimate of the same fiber used to measure the estimator's
/// own noise floor: same depth range, re-seeded cloud.
inline FiberMeasure estimate_fiber_measure_twin(const CocycleField& a, const SuspensionPoint& x,
                                                const EstimatorParams& params) {
    EstimatorParams twin = params;
    twin.seed = sub_seed(params.seed, 0x7717);
    return estimate_fiber_measure(a, x, twin);
}

inline double bootstrap_se(const std::vector<double>& values, int n_boot, std::uint64_t seed) {
    if (values.size() < 2) return 1e-12;
    Rng rng(sub_seed(0xb007, seed));
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += values[rng.index(values.size())];
        means.push_back(m / static_cast<double>(values.size()));
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(means.size() - 1);
    return std::max(std::sqrt(var), 1e-12);
}

/// Transport defect statistics over a family of pairs.  mean_defect is the
/// noise-centered excess (clamped at zero); raw_mean and noise_floor retain
/// the uncentered magnitudes for before/after comparisons.
struct DefectReport {
    double mean_defect = 0.0;
    double raw_mean = 0.0;
    double noise_floor = 0.0;
    double bootstrap_se = 0.0;
    int n_pairs = 0;
    std::string side;  // "s", "u", "su", or "suc"
    std::string transport_metric = "W1-projective";
    std::vector<double> per_pair_raw;
    std::vector<double> per_pair_floor;
};

struct DefectPair {
    SuspensionPoint y, z;
    char side = 's';  // z on the local stable ('s') or unstable ('u') leaf of y
};

/// Same-local-leaf pairs sampled from volume, leaf parameter in
/// [0.2 a_max, a_max] with random sign.
inline std::vector<DefectPair> sample_leaf_pairs(const SuspensionFlow& model, char side, int count,
                                                 double a_max, std::uint64_t seed) {
    auto ys = model.volume_sample(count, sub_seed(seed, side == 's' ? 11u : 13u));
    std::vector<DefectPair> out;
    out.reserve(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
        Rng rng(sub_seed(seed, 1000 + i));
        double mag = rng.uniform(0.2 * a_max, a_max);
        if (rng.uniform01() < 0.5) mag = -mag;
        DefectPair pair;
        pair.y = ys[i];
        pair.z = side == 's' ? model.stable_leaf_point(ys[i], mag)
                             : model.unstable_leaf_point(ys[i], mag);
        pair.side = side;
        out.push_back(pair);
    }
    return out;
}

namespace detail {

inline DefectReport assemble_defect_report(std::vector<double> raw, std::vector<double> floor,
                                           const std::string& side, std::uint64_t seed) {
    DefectReport rep;
    rep.n_pairs = static_cast<int>(raw.size());
    rep.side = side;
    std::vector<double> excess(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        rep.raw_mean += raw[i];
        rep.noise_floor += floor[i];
        excess[i] = raw[i] - floor[i];
    }
    if (!raw.empty()) {
        rep.raw_mean /= static_cast<double>(raw.size());
        rep.noise_floor /= static_cast<double>(raw.size());
    }
    double mean_excess = 0.0;
    for (double e : excess) mean_excess += e;
    if (!excess.empty()) mean_excess /= static_cast<double>(excess.size());
    rep.mean_defect = std::max(0.0, mean_excess);
    rep.bootstrap_se = bootstrap_se(excess, 200, seed);
    rep.per_pair_raw = std::move(raw);
    rep.per_pair_floor = std::move(floor);
    return rep;
}

}  // namespace detail

/// Holonomy transport defect over same-leaf pairs:
/// W1((H_{y,z})_* m_y, m_z), centered against the re-estimation noise floor.
inline DefectReport holonomy_transport_defect(const CocycleField& a,
                                              const std::vector<DefectPair>& pairs,
                                              const EstimatorParams& params, double tol = 1e-10,
                                              int n_max = 200) {
    std::vector<double> raw, floor;
    raw.reserve(pairs.size());
    floor.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const FiberMeasure my = estimate_fiber_measure(a, pair.y, params);
        const FiberMeasure mz = estimate_fiber_measure(a, pair.z, params);
        const LinearHolonomy h = pair.side == 's' ? stable_holonomy(a, pair.y, pair.z, tol, n_max)
                                                  : unstable_holonomy(a, pair.y, pair.z, tol, n_max);
        raw.push_back(projective_distance(push_measure(h.matrix, my), mz));
        const FiberMeasure mz_twin = estimate_fiber_measure_twin(a, pair.z, params);
        floor.push_back(projective_distance(mz_twin, mz));
    }
    return detail::assemble_defect_report(std::move(raw), std::move(floor),
                                          pairs.empty() ? "" : std::string(1, pairs.front().side),
                                          params.seed);
}

struct SuDefectResult {
    DefectReport pooled, stable, unstable;
};

/// su-invariance probe: stable and unstable transport defects pooled, with
/// per-side sub-reports.
inline SuDefectResult su_defect(const CocycleField& a, const std::vector<DefectPair>& stable_pairs,
                                const std::vector<DefectPair>& unstable_pairs,
                                const EstimatorParams& params, double tol = 1e-10,
                                int n_max = 200) {
    SuDefectResult out;
    out.stable = holonomy_transport_defect(a, stable_pairs, params, tol, n_max);
    out.unstable = holonomy_transport_defect(a, unstable_pairs, params, tol, n_max);
    std::vector<double> raw = out.stable.per_pair_raw;
    raw.insert(raw.end(), out.unstable.per_pair_raw.begin(), out.unstable.per_pair_raw.end());
    std::vector<double> floor = out.stable.per_pair_floor;
    floor.insert(floor.end(), out.unstable.per_pair_floor.begin(),
                 out.unstable.per_pair_floor.end());
    out.pooled = detail::assemble_defect_report(std::move(raw), std::move(floor), "su",
                                                sub_seed(params.seed, 3));
    return out;
}

/// su/c-invariance probe along the homoclinic loop: compares (H^j_t)_* m_t
/// with m_{h^j(t)} over an equidistant circle grid (t = 0 excluded by the
/// grid offset; the loop map is undefined there).
inline DefectReport suc_defect(const CocycleField& a, const HomoclinicLoop& loop, int j,
                               int grid_size, const EstimatorParams& params) {
    std::vector<double> raw, floor;
    raw.reserve(static_cast<std::size_t>(grid_size));
    for (int g = 0; g < grid_size; ++g) {
        const double t =
            loop.leaf.T * (static_cast<double>(g) + 0.5) / static_cast<double>(grid_size);
        const SuspensionPoint pt = loop.leaf.point_at(t);
        const FiberMeasure mt = estimate_fiber_measure(a, pt, params);
        auto [ht_coord, ht] = loop.iterate(j, t);
        const SuspensionPoint pht = loop.leaf.point_at(ht_coord);
        const FiberMeasure mht = estimate_fiber_measure(a, pht, params);
        raw.push_back(projective_distance(push_measure(ht, mt), mht));
        const FiberMeasure twin = estimate_fiber_measure_twin(a, pht, params);
        floor.push_back(projective_distance(twin, mht));
    }
    return detail::assemble_defect_report(std::move(raw), std::move(floor), "suc",
                                          sub_seed(params.seed, 4));
}

struct ZeroExponentReport {
    bool zero = false;
    double tol = 0.0;
    ExponentEstimate estimate;
};

/// Gate for the invariance-principle hypothesis: |integrated top exponent| < tol.
inline ZeroExponentReport zero_exponent_check(const CocycleField& a,
                                              const std::vector<SuspensionPoint>& samples,
                                              long long n, double tol) {
    ZeroExponentReport rep;
    rep.tol = tol;
    rep.estimate = integrated_exponent(a, samples, n);
    rep.zero = std::abs(rep.estimate.value) < tol;
    return rep;
}

}  // namespace sympflow
