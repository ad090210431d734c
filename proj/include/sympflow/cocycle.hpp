// Holder cocycle fields over the suspension flow, built from a small closed
// family of generator terms (constants, rotation and diagonal one-parameter
// subgroups driven by trig-polynomial scalar fields, and compactly supported
// bump factors).  The family is closed under every perturbation performed by
// the experiments and evaluates to exactly symplectic matrices up to rounding.

#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sympflow/base_dynamics.hpp"
#include "sympflow/linalg.hpp"
#include "sympflow/rng.hpp"
#include "sympflow/symplectic.hpp"

namespace sympflow {

/// Scalar trig polynomial on the suspension manifold.  Base modes are
/// multiplied by the seam window sin^2(pi u), u = t / r(x), so the field is
/// continuous through the roof identification (x, r(x)) ~ (F x, 0); height
/// modes are periodic in u and need no window.
struct ScalarField {
    struct BaseMode {
        int k1 = 0, k2 = 0;
        double c = 0.0, s = 0.0;
    };
    struct HeightMode {
        int m = 1;
        double c = 0.0, s = 0.0;
    };

    double c0 = 0.0;
    std::vector<BaseMode> base_modes;
    std::vector<HeightMode> height_modes;

    static ScalarField constant(double v) {
        ScalarField f;
        f.c0 = v;
        return f;
    }

    bool is_constant() const { return base_modes.empty() && height_modes.empty(); }

    double eval(const SuspensionFlow& model, const SuspensionPoint& p) const {
        constexpr double two_pi = 6.283185307179586476925287;
        constexpr double pi = 3.14159265358979323846;
        double v = c0;
        if (is_constant()) return v;
        const double u = p.t / model.roof.value(p.x);
        if (!base_modes.empty()) {
            const double w = std::sin(pi * u) * std::sin(pi * u);
            for (const auto& m : base_modes) {
                const double phase = two_pi * (m.k1 * p.x(0) + m.k2 * p.x(1));
                v += w * (m.c * std::cos(phase) + m.s * std::sin(phase));
            }
        }
        for (const auto& m : height_modes) {
            const double phase = two_pi * m.m * u;
            v += m.c * std::cos(phase) + m.s * std::sin(phase);
        }
        return v;
    }

    /// sup |field| upper bound from coefficient magnitudes.
    double sup_bound() const {
        double b = std::abs(c0);
        for (const auto& m : base_modes) b += std::hypot(m.c, m.s);
        for (const auto& m : height_modes) b += std::hypot(m.c, m.s);
        return b;
    }
};

/// Smooth bump profile: 1 at 0, 0 at u >= 1, C^infinity.
inline double bump_profile(double u) {
    const double u2 = u * u;
    if (u2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u2));
}

/// One ordered factor of a cocycle field.
struct GeneratorTerm {
    enum class Kind { Constant, Rotation, Diagonal, Bump };

    Kind kind = Kind::Constant;

    Mat constant;  // Constant: fixed symplectic factor

    ScalarField field;    // Rotation: angle field; Diagonal: rate field
    int base_offset = 0;  // field arguments taken at f^offset(P)

    SuspensionPoint site;  // Bump: center of the support ball
    double rho = 0.0;      // Bump: support radius
    double theta0 = 0.0;   // Bump: sigma = rotation_block(theta0)

    static GeneratorTerm make_constant(const SymplecticMatrix& b) {
        GeneratorTerm t;
        t.kind = Kind::Constant;
        t.constant = b.m;
        return t;
    }
    static GeneratorTerm make_rotation(ScalarField f, int offset = 0) {
        GeneratorTerm t;
        t.kind = Kind::Rotation;
        t.field = std::move(f);
        t.base_offset = offset;
        return t;
    }
    static GeneratorTerm make_diagonal(ScalarField f, int offset = 0) {
        GeneratorTerm t;
        t.kind = Kind::Diagonal;
        t.field = std::move(f);
        t.base_offset = offset;
        return t;
    }
    static GeneratorTerm make_bump(SuspensionPoint q, double rho, double theta0) {
        GeneratorTerm t;
        t.kind = Kind::Bump;
        t.site = q;
        t.rho = rho;
        t.theta0 = theta0;
        return t;
    }
};

/// Holder norm estimate from sampled pairs: running maxima of the sup norm
/// and of ||A(x)-A(y)|| / dist(x,y)^alpha, nondecreasing in n_pairs.
struct HolderEstimate {
    double sup_norm = 0.0;
    double seminorm = 0.0;
    double alpha = 1.0;
    int n_pairs = 0;

    double total() const { return sup_norm + seminorm; }
};

/// Ordered-product Holder map from the suspension manifold into Sp(2d, R).
struct CocycleField {
    SuspensionFlow model;
    int d = 1;
    double alpha = 1.0;
    std::vector<GeneratorTerm> terms;

    static CocycleField make(SuspensionFlow m, int d, double alpha,
                             std::vector<GeneratorTerm> terms = {}) {
        if (d < 1) throw PreconditionError("CocycleField: d must be >= 1");
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw PreconditionError("CocycleField: alpha must lie in (0,1]");
        return {std::move(m), d, alpha, std::move(terms)};
    }

    Mat term_value(const GeneratorTerm& t, const SuspensionPoint& p) const {
        switch (t.kind) {
            case GeneratorTerm::Kind::Constant:
                return t.constant;
            case GeneratorTerm::Kind::Rotation: {
                const SuspensionPoint q =
                    t.base_offset == 0 ? p : model.flow(p, static_cast<double>(t.base_offset));
                return rotation_block(t.field.eval(model, q), d).m;
            }
            case GeneratorTerm::Kind::Diagonal: {
                const SuspensionPoint q =
                    t.base_offset == 0 ? p : model.flow(p, static_cast<double>(t.base_offset));
                return diagonal_block(t.field.eval(model, q), d).m;
            }
            case GeneratorTerm::Kind::Bump: {
                const double u = model.dist(p, t.site) / t.rho;
                if (u >= 1.0) return Mat::Identity(2 * d, 2 * d);
                return rotation_block(bump_profile(u) * t.theta0, d).m;
            }
        }
        throw Error("CocycleField: unreachable term kind");
    }

    /// Ordered product of the factor terms at p, repaired if the symplectic
    /// defect drifted above 1e-10.
    SymplecticMatrix evaluate(const SuspensionPoint& p_in) const {
        const SuspensionPoint p = model.normalize(p_in);
        Mat acc = Mat::Identity(2 * d, 2 * d);
        for (const auto& t : terms) acc = acc * term_value(t, p);
        double def = sym_defect(acc);
        if (def > 1e-10) return symplectify(acc);
        return {d, std::move(acc), def};
    }
};

/// Result of iterating a cocycle: matrix * exp(log_scale) equals A^n(p).
struct CocycleIterate {
    Mat matrix;
    double log_scale = 0.0;
    long long n = 0;

    Mat dense() const { return matrix * std::exp(log_scale); }
    double log_norm() const { return std::log(op_norm(matrix)) + log_scale; }
};

namespace detail {

inline void renormalize_product(Mat& acc, double& log_scale, int two_d) {
    const double s = max_abs(acc);
    if (!std::isfinite(s) || s == 0.0)
        throw ConvergenceError("iterate: overflow despite renormalization");
    if (s > 1e100 || s < 1e-100) {
        acc /= s;
        log_scale += std::log(s);
    } else if (log_scale == 0.0 && s < 1e3) {
        // Still well scaled: keep the running product on the group.
        double def = sym_defect(acc);
        if (def > 1e-12 && def < 0.1) acc = symplectify(acc).m;
    }
    (void)two_d;
}

}  // namespace detail

/// A^n(p): forward ordered product for n > 0, identity for n = 0, product of
/// inverse factors along the backward orbit for n < 0.  Renormalized every 25
/// steps; the removed scale accumulates in log_scale.
inline CocycleIterate iterate(const CocycleField& a, const SuspensionPoint& p, long long n) {
    const int two_d = 2 * a.d;
    CocycleIterate out{Mat::Identity(two_d, two_d), 0.0, n};
    if (n == 0) return out;
    SuspensionPoint cur = a.model.normalize(p);
    if (n > 0) {
        for (long long k = 0; k < n; ++k) {
            if (k > 0) cur = a.model.time_one(cur);
            out.matrix = a.evaluate(cur).m * out.matrix;
            if ((k + 1) % 25 == 0) detail::renormalize_product(out.matrix, out.log_scale, two_d);
        }
    } else {
        for (long long k = 1; k <= -n; ++k) {
            cur = a.model.flow(cur, -1.0);
            out.matrix = symplectic_inverse(a.evaluate(cur).m) * out.matrix;
            if (k % 25 == 0) detail::renormalize_product(out.matrix, out.log_scale, two_d);
        }
    }
    if (!out.matrix.allFinite())
        throw ConvergenceError("iterate: overflow despite renormalization");
    return out;
}

/// Monte-Carlo lower estimate of ||A||_alpha = sup + Holder seminorm.  Pairs
/// are drawn at log-uniform separations so the seminorm sup is approached by
/// nearby pairs; per-index sub-seeds make the estimate nondecreasing in
/// n_pairs (nested maxima).
inline HolderEstimate holder_norm(const CocycleField& a, int n_pairs, std::uint64_t seed) {
    HolderEstimate est;
    est.alpha = a.alpha;
    est.n_pairs = n_pairs;
    const double rmax = a.model.roof.upper_bound();
    for (int i = 0; i < n_pairs; ++i) {
        Rng rng(sub_seed(seed, static_cast<std::uint64_t>(i)));
        SuspensionPoint p;
        for (;;) {
            p.x = Eigen::Vector2d(rng.uniform01(), rng.uniform01());
            p.t = rng.uniform01() * rmax;
            if (p.t < a.model.roof.value(p.x)) break;
        }
        const Mat ap = a.evaluate(p).m;
        est.sup_norm = std::max(est.sup_norm, op_norm(ap));

        const double delta = std::exp(rng.uniform(std::log(1e-6), std::log(0.25)));
        Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
        if (dir.norm() < 1e-12) dir = Eigen::Vector3d(1, 0, 0);
        dir.normalize();
        SuspensionPoint q;
        q.x = mod1(Eigen::Vector2d(p.x + delta * Eigen::Vector2d(dir(0), dir(1))));
        q.t = p.t + delta * dir(2);
        q = a.model.normalize(q);
        const double dd = a.model.dist(p, q);
        if (dd < 1e-12) continue;
        const double ratio = op_norm(ap - a.evaluate(q).m) / std::pow(dd, a.alpha);
        est.seminorm = std::max(est.seminorm, ratio);
    }
    return est;
}

/// A_theta(x) = rotation_block(theta) * A(x); theta = 0 returns A unchanged.
inline CocycleField perturb_global_rotation(const CocycleField& a, double theta) {
    if (theta == 0.0) return a;
    CocycleField out = a;
    out.terms.insert(out.terms.begin(),
                     GeneratorTerm::make_rotation(ScalarField::constant(theta)));
    return out;
}

/// Bump perturbation at site q: A_hat(x) = sigma^{phi(dist(x,q)/rho)} A(x)
/// with sigma = rotation_block(theta0).  Requires the site's orbit to clear
/// its own support ball: dist(f^n q, q) > 2 rho for 1 <= |n| <= orbit_window.
inline CocycleField perturb_bump(const CocycleField& a, const SuspensionPoint& site, double rho,
                                 double theta0, int orbit_window) {
    if (!(rho > 0.0)) throw PreconditionError("perturb_bump: rho must be positive");
    const SuspensionPoint q = a.model.normalize(site);
    for (int n = 1; n <= orbit_window; ++n) {
        for (int sign : {1, -1}) {
            const SuspensionPoint fq = a.model.iterate_map(q, sign * n);
            const double dd = a.model.dist(fq, q);
            if (dd <= 2.0 * rho)
                throw PreconditionError(
                    "perturb_bump: orbit separation violated at n = " + std::to_string(sign * n) +
                    " (dist " + std::to_string(dd) + " <= 2 rho)");
        }
    }
    CocycleField out = a;
    out.terms.insert(out.terms.begin(), GeneratorTerm::make_bump(q, rho, theta0));
    return out;
}

/// The cocycle restricted to a compact center leaf: a circle cocycle over the
/// rotation s -> s + 1 (flow-time coordinates mod T).
struct CircleCocycle {
    PeriodicLeaf leaf;
    CocycleField field;

    double rotation() const { return leaf.rotation(); }

    Mat matrix_at(double s) const { return field.evaluate(leaf.point_at(s)).m; }

    /// Product of n factors along the circle orbit starting at s.
    CocycleIterate iterate(double s, long long n) const {
        const int two_d = 2 * field.d;
        CocycleIterate out{Mat::Identity(two_d, two_d), 0.0, n};
        if (n >= 0) {
            for (long long k = 0; k < n; ++k) {
                out.matrix = matrix_at(s + static_cast<double>(k)) * out.matrix;
                if ((k + 1) % 25 == 0)
                    detail::renormalize_product(out.matrix, out.log_scale, two_d);
            }
        } else {
            for (long long k = 1; k <= -n; ++k) {
                out.matrix =
                    symplectic_inverse(matrix_at(s - static_cast<double>(k))) * out.matrix;
                if (k % 25 == 0) detail::renormalize_product(out.matrix, out.log_scale, two_d);
            }
        }
        if (!out.matrix.allFinite())
            throw ConvergenceError("CircleCocycle::iterate: overflow despite renormalization");
        return out;
    }
};

inline CircleCocycle restrict_to_center_leaf(const CocycleField& a, const PeriodicLeaf& leaf) {
    return {leaf, a};
}

}  // namespace sympflow
