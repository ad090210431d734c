// Desk-scale Anosov flow models: hyperbolic toral automorphisms, suspension
// flows over constant or trig-polynomial roofs, the induced time-one map,
// strong stable/unstable leaves (constant roof), periodic and homoclinic
// data, hyperbolicity constants and volume sampling.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sympflow/linalg.hpp"
#include "sympflow/rng.hpp"

namespace sympflow {

/// Reduce to [0,1) with a 1e-12 snap at the seam so points that should be
/// equal compare equal after round trips through the identification.
inline double mod1(double v) {
    double r = v - std::floor(v);
    if (r >= 1.0) r -= 1.0;
    if (r < 0.0) r += 1.0;
    if (1.0 - r < 1e-12) r = 0.0;
    return r;
}

inline Eigen::Vector2d mod1(const Eigen::Vector2d& v) {
    return {mod1(v(0)), mod1(v(1))};
}

/// Flat geodesic distance on the 2-torus.
inline double torus_dist(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
        double d = std::abs(mod1(a(i)) - mod1(b(i)));
        d = std::min(d, 1.0 - d);
        s += d * d;
    }
    return std::sqrt(s);
}

/// A hyperbolic element of GL(2, Z): |det| = 1 and |trace| > 2, with its
/// expanding/contracting eigendata precomputed (2x2 closed form).
struct TorusAutomorphism {
    Eigen::Matrix<long long, 2, 2> m;
    double mu_expanding = 0.0;    // |mu| > 1
    double mu_contracting = 0.0;  // |mu| < 1
    Eigen::Vector2d v_u;          // unit expanding eigenvector
    Eigen::Vector2d v_s;          // unit contracting eigenvector

    static TorusAutomorphism from_matrix(long long a, long long b, long long c, long long d) {
        TorusAutomorphism f;
        f.m << a, b, c, d;
        const long long det = a * d - b * c;
        const long long tr = a + d;
        if (det != 1 && det != -1)
            throw PreconditionError("TorusAutomorphism: |det| must be 1, got " + std::to_string(det));
        if (std::llabs(tr) <= 2)
            throw PreconditionError("TorusAutomorphism: |trace| must exceed 2 for hyperbolicity");
        const double disc = std::sqrt(static_cast<double>(tr * tr - 4 * det));
        const double mu1 = (static_cast<double>(tr) + disc) / 2.0;
        const double mu2 = (static_cast<double>(tr) - disc) / 2.0;
        if (std::abs(mu1) >= std::abs(mu2)) {
            f.mu_expanding = mu1;
            f.mu_contracting = mu2;
        } else {
            f.mu_expanding = mu2;
            f.mu_contracting = mu1;
        }
        f.v_u = eigenvector(f, f.mu_expanding);
        f.v_s = eigenvector(f, f.mu_contracting);
        return f;
    }

    static TorusAutomorphism cat_map() { return from_matrix(2, 1, 1, 1); }

    long long det() const { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }
    long long trace() const { return m(0, 0) + m(1, 1); }

    TorusAutomorphism inverse() const {
        const long long s = det();  // +-1, and 1/det == det
        return from_matrix(s * m(1, 1), -s * m(0, 1), -s * m(1, 0), s * m(0, 0));
    }

    /// Integer power, k >= 1.  Entries grow like |mu|^k; keep k moderate.
    TorusAutomorphism power(int k) const {
        if (k < 1) throw PreconditionError("TorusAutomorphism::power: k must be >= 1");
        Eigen::Matrix<long long, 2, 2> acc = m;
        for (int i = 1; i < k; ++i) acc = acc * m;
        return from_matrix(acc(0, 0), acc(0, 1), acc(1, 0), acc(1, 1));
    }

    Eigen::Vector2d apply(const Eigen::Vector2d& x) const {
        Eigen::Vector2d y;
        y(0) = static_cast<double>(m(0, 0)) * x(0) + static_cast<double>(m(0, 1)) * x(1);
        y(1) = static_cast<double>(m(1, 0)) * x(0) + static_cast<double>(m(1, 1)) * x(1);
        return mod1(y);
    }

    Eigen::Vector2d apply_inverse(const Eigen::Vector2d& x) const {
        const double s = static_cast<double>(det());
        Eigen::Vector2d y;
        y(0) = s * (static_cast<double>(m(1, 1)) * x(0) - static_cast<double>(m(0, 1)) * x(1));
        y(1) = s * (-static_cast<double>(m(1, 0)) * x(0) + static_cast<double>(m(0, 0)) * x(1));
        return mod1(y);
    }

  private:
    static Eigen::Vector2d eigenvector(const TorusAutomorphism& f, double mu) {
        const double a = static_cast<double>(f.m(0, 0));
        const double b = static_cast<double>(f.m(0, 1));
        const double c = static_cast<double>(f.m(1, 0));
        const double d = static_cast<double>(f.m(1, 1));
        // Kernel of (F - mu I); pick the better conditioned row.
        Eigen::Vector2d v1(b, mu - a), v2(mu - d, c);
        Eigen::Vector2d v = v1.norm() >= v2.norm() ? v1 : v2;
        v.normalize();
        if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
        Eigen::Vector2d residual(a * v(0) + b * v(1) - mu * v(0),
                                 c * v(0) + d * v(1) - mu * v(1));
        if (residual.norm() > 1e-12 * std::max(1.0, std::abs(mu)))
            throw ConvergenceError("TorusAutomorphism: eigenvector residual too large");
        return v;
    }
};

/// Roof of the suspension: r == 1, or a trig polynomial with positive lower
/// bound.  Variable roofs are only used where closed-form leaf geometry is
/// not required (flow, volume, center Jacobian).
struct RoofFunction {
    struct Mode {
        int k1 = 0, k2 = 0;
        double c = 0.0, s = 0.0;
    };

    bool constant = true;
    double c0 = 1.0;
    std::vector<Mode> modes;

    static RoofFunction unit() { return {}; }

    static RoofFunction trig(double c0, std::vector<Mode> modes) {
        RoofFunction r;
        r.constant = false;
        r.c0 = c0;
        r.modes = std::move(modes);
        if (!(r.lower_bound() > 0.0))
            throw PreconditionError("RoofFunction: lower bound must be positive");
        return r;
    }

    double value(const Eigen::Vector2d& x) const {
        if (constant) return 1.0;
        double v = c0;
        for (const auto& m : modes) {
            const double phase = 6.283185307179586476925287 * (m.k1 * x(0) + m.k2 * x(1));
            v += m.c * std::cos(phase) + m.s * std::sin(phase);
        }
        return v;
    }

    double lower_bound() const {
        if (constant) return 1.0;
        double b = c0;
        for (const auto& m : modes) b -= std::abs(m.c) + std::abs(m.s);
        return b;
    }

    double upper_bound() const {
        if (constant) return 1.0;
        double b = c0;
        for (const auto& m : modes) b += std::abs(m.c) + std::abs(m.s);
        return b;
    }
};

/// Point of the suspension manifold: torus coordinates plus height under the
/// roof, with the identification (x, r(x)) ~ (F x, 0).
struct SuspensionPoint {
    Eigen::Vector2d x{0.0, 0.0};
    double t = 0.0;
};

struct HyperbolicityConstants {
    double lambda = 0.0;  // contraction per unit flow time, in (0,1)
    double gamma = 1.0;   // center bound, 1 for constant roof
};

struct PeriodicLeaf;

/// Suspension flow of a hyperbolic toral automorphism and its time-one map.
struct SuspensionFlow {
    TorusAutomorphism F;
    RoofFunction roof;

    static SuspensionFlow make(TorusAutomorphism f, RoofFunction r) {
        return {std::move(f), std::move(r)};
    }

    static SuspensionFlow cat_unit_roof() {
        return {TorusAutomorphism::cat_map(), RoofFunction::unit()};
    }

    SuspensionPoint normalize(SuspensionPoint p) const {
        p.x = mod1(p.x);
        double r = roof.value(p.x);
        int guard = 0;
        while (p.t >= r) {
            p.t -= r;
            p.x = F.apply(p.x);
            r = roof.value(p.x);
            if (++guard > 1000000)
                throw ConvergenceError("SuspensionFlow::normalize: runaway height");
        }
        while (p.t < 0.0) {
            p.x = F.apply_inverse(p.x);
            r = roof.value(p.x);
            p.t += r;
            if (++guard > 1000000)
                throw ConvergenceError("SuspensionFlow::normalize: runaway height");
        }
        return p;
    }

    /// Unit-speed motion in the height with roof identification.  Integral
    /// times over the unit roof keep the height bit-exact.
    SuspensionPoint flow(SuspensionPoint p, double s) const {
        p = normalize(p);
        if (roof.constant && s == std::floor(s) && std::abs(s) < 1e9) {
            long long n = static_cast<long long>(s);
            for (; n > 0; --n) p.x = F.apply(p.x);
            for (; n < 0; ++n) p.x = F.apply_inverse(p.x);
            return p;
        }
        p.t += s;
        return normalize(p);
    }

    SuspensionPoint time_one(const SuspensionPoint& p) const { return flow(p, 1.0); }

    SuspensionPoint iterate_map(SuspensionPoint p, long long n) const {
        for (; n > 0; --n) p = flow(p, 1.0);
        for (; n < 0; ++n) p = flow(p, -1.0);
        return p;
    }

    /// Metric on the suspension: product metric minimized over the identity
    /// and the two one-level roof unwindings on either argument.  The chart
    /// transition F distorts lengths by up to |mu|, so this is a quasi-metric:
    /// the triangle inequality holds up to that bounded factor (exactly within
    /// a single chart).
    double dist(const SuspensionPoint& pin, const SuspensionPoint& qin) const {
        SuspensionPoint p = normalize(pin), q = normalize(qin);
        auto cand = [](double base, double dh) { return std::hypot(base, dh); };
        double best = cand(torus_dist(p.x, q.x), p.t - q.t);
        // q one level down through the roof: (F x_q, t_q - r(x_q))
        best = std::min(best, cand(torus_dist(p.x, F.apply(q.x)),
                                   p.t - (q.t - roof.value(q.x))));
        // q one level up: (F^{-1} x_q, t_q + r(F^{-1} x_q))
        {
            Eigen::Vector2d xq = F.apply_inverse(q.x);
            best = std::min(best, cand(torus_dist(p.x, xq), p.t - (q.t + roof.value(xq))));
        }
        best = std::min(best, cand(torus_dist(q.x, F.apply(p.x)),
                                   q.t - (p.t - roof.value(p.x))));
        {
            Eigen::Vector2d xp = F.apply_inverse(p.x);
            best = std::min(best, cand(torus_dist(q.x, xp), q.t - (p.t + roof.value(xp))));
        }
        return best;
    }

    /// Point on the strong stable leaf of p at signed leaf parameter a.
    /// Exact leaves are only available over the constant roof.
    SuspensionPoint stable_leaf_point(const SuspensionPoint& p, double a) const {
        require_constant_roof("stable_leaf_point");
        SuspensionPoint q = normalize(p);
        q.x = mod1(Eigen::Vector2d(q.x + a * F.v_s));
        return q;
    }

    SuspensionPoint unstable_leaf_point(const SuspensionPoint& p, double a) const {
        require_constant_roof("unstable_leaf_point");
        SuspensionPoint q = normalize(p);
        q.x = mod1(Eigen::Vector2d(q.x + a * F.v_u));
        return q;
    }

    HyperbolicityConstants constants() const {
        HyperbolicityConstants c;
        c.lambda = std::pow(1.0 / std::abs(F.mu_expanding), 1.0 / roof.upper_bound());
        c.gamma = roof.constant ? 1.0 : roof.lower_bound() / roof.upper_bound();
        if (!(c.lambda < c.gamma))
            throw ConvergenceError("hyperbolicity constants degenerate: lambda >= gamma");
        return c;
    }

    /// i.i.d. points for the normalized volume dx dt under the roof,
    /// deterministic per (seed, index) so batching cannot change results.
    std::vector<SuspensionPoint> volume_sample(int n, std::uint64_t seed) const {
        std::vector<SuspensionPoint> out;
        out.reserve(n);
        const double rmax = roof.upper_bound();
        for (int i = 0; i < n; ++i) {
            Rng rng(sub_seed(seed, static_cast<std::uint64_t>(i)));
            for (;;) {
                Eigen::Vector2d x(rng.uniform01(), rng.uniform01());
                double h = rng.uniform01() * rmax;
                if (h < roof.value(x)) {
                    out.push_back({x, h});
                    break;
                }
            }
        }
        return out;
    }

    PeriodicLeaf center_leaf_circle(const Eigen::Vector2d& p, int k) const;

  private:
    void require_constant_roof(const char* who) const {
        if (!roof.constant)
            throw PreconditionError(std::string(who) +
                                    ": strong leaves are only available in closed form over the constant roof");
    }
};

/// Compact center leaf over an F-periodic base point: a circle of flow length
/// T on which the time-one map acts as the rotation by 1/T.
///
/// Periodic base points are rationals with denominator |det(F^k - I)|, so the
/// base orbit is tracked in exact integer arithmetic: floating iteration
/// would leave the (unstable) leaf after roughly log(1/eps)/log|mu| steps.
struct PeriodicLeaf {
    SuspensionFlow model;
    Eigen::Vector2d base_point{0.0, 0.0};
    int k = 1;       // F-period of the base point
    double T = 1.0;  // flow period (== k over the constant roof)
    long long ix = 0, iy = 0, den = 1;  // base_point = (ix, iy) / den exactly

    SuspensionPoint anchor() const { return {base_point, 0.0}; }

    /// Exact base point after m applications of F (integer arithmetic mod den).
    Eigen::Vector2d base_at(long long m) const {
        long long x = ix, y = iy;
        auto rem = [this](long long v) { return ((v % den) + den) % den; };
        for (long long i = 0; i < m; ++i) {
            const long long nx = rem(model.F.m(0, 0) * x + model.F.m(0, 1) * y);
            const long long ny = rem(model.F.m(1, 0) * x + model.F.m(1, 1) * y);
            x = nx;
            y = ny;
        }
        return {static_cast<double>(x) / static_cast<double>(den),
                static_cast<double>(y) / static_cast<double>(den)};
    }

    /// Leaf point at circle coordinate s (flow-time parametrization mod T).
    SuspensionPoint point_at(double s) const {
        s -= T * std::floor(s / T);
        if (model.roof.constant) {
            double m = std::floor(s);
            SuspensionPoint p{base_at(static_cast<long long>(m) % k), s - m};
            return model.normalize(p);
        }
        return model.flow(anchor(), s);
    }

    /// The time-one map in normalized circle coordinates is t -> t + 1/T.
    double rotation() const { return 1.0 / T; }
};

inline PeriodicLeaf SuspensionFlow::center_leaf_circle(const Eigen::Vector2d& p, int k) const {
    if (k < 1) throw PreconditionError("center_leaf_circle: k must be >= 1");
    Eigen::Vector2d x = mod1(p);
    Eigen::Vector2d y = x;
    double T = 0.0;
    for (int i = 0; i < k; ++i) {
        T += roof.value(y);
        y = F.apply(y);
    }
    if (torus_dist(y, x) > 1e-10)
        throw PreconditionError("center_leaf_circle: base point is not F^k-periodic");

    PeriodicLeaf leaf{*this, x, k, T, 0, 0, 1};
    // Exact rational coordinates over the |det(F^k - I)| lattice.
    const TorusAutomorphism fk = F.power(k);
    const long long det =
        (fk.m(0, 0) - 1) * (fk.m(1, 1) - 1) - fk.m(0, 1) * fk.m(1, 0);
    leaf.den = std::llabs(det);
    leaf.ix = std::llround(x(0) * static_cast<double>(leaf.den));
    leaf.iy = std::llround(x(1) * static_cast<double>(leaf.den));
    const double err = std::hypot(x(0) - static_cast<double>(leaf.ix) / leaf.den,
                                  x(1) - static_cast<double>(leaf.iy) / leaf.den);
    if (err > 1e-9)
        throw PreconditionError(
            "center_leaf_circle: base point is not on the periodic lattice");
    leaf.base_point = {static_cast<double>(leaf.ix) / leaf.den,
                       static_cast<double>(leaf.iy) / leaf.den};
    return leaf;
}

/// All solutions of (F^k - I) x in Z^2 inside [0,1)^2, computed exactly over
/// the rational lattice with denominator |det(F^k - I)|.
inline std::vector<Eigen::Vector2d> periodic_points(const TorusAutomorphism& F, int k) {
    if (k < 1) throw PreconditionError("periodic_points: k must be >= 1");
    const TorusAutomorphism Fk = F.power(k);
    const long long m00 = Fk.m(0, 0) - 1, m01 = Fk.m(0, 1);
    const long long m10 = Fk.m(1, 0), m11 = Fk.m(1, 1) - 1;
    const long long det = m00 * m11 - m01 * m10;
    if (det == 0)
        throw PreconditionError("periodic_points: F^k - I is singular");
    const long long q = std::llabs(det);
    auto rem = [q](long long v) { return ((v % q) + q) % q; };
    std::vector<Eigen::Vector2d> out;
    for (long long i = 0; i < q; ++i)
        for (long long j = 0; j < q; ++j)
            if (rem(m00 * i + m01 * j) == 0 && rem(m10 * i + m11 * j) == 0)
                out.push_back({static_cast<double>(i) / static_cast<double>(q),
                               static_cast<double>(j) / static_cast<double>(q)});
    return out;
}

/// Transverse homoclinic point of a fixed point p0: z = p0 + a v_u with
/// a v_u = m + b v_s over integer vectors m.  (a, b) solve a 2x2 system per m.
struct HomoclinicPoint {
    Eigen::Vector2d z;
    double a = 0.0;  // unstable leaf parameter from p0
    double b = 0.0;  // stable leaf parameter from p0 (mod Z^2)
    long long m1 = 0, m2 = 0;
};

inline std::vector<HomoclinicPoint> homoclinic_points(const TorusAutomorphism& F,
                                                      const Eigen::Vector2d& p0, int window) {
    if (torus_dist(F.apply(p0), mod1(p0)) > 1e-10)
        throw PreconditionError("homoclinic_points: p0 is not a fixed point of F");
    std::vector<HomoclinicPoint> out;
    Eigen::Matrix2d lhs;
    lhs.col(0) = F.v_u;
    lhs.col(1) = -F.v_s;
    for (long long m1 = -window; m1 <= window; ++m1) {
        for (long long m2 = -window; m2 <= window; ++m2) {
            if (m1 == 0 && m2 == 0) continue;
            Eigen::Vector2d rhs(static_cast<double>(m1), static_cast<double>(m2));
            Eigen::Vector2d ab = lhs.fullPivLu().solve(rhs);
            Eigen::Vector2d residual = lhs * ab - rhs;
            if (residual.norm() > 1e-10)
                throw ConvergenceError("homoclinic_points: singular eigenbasis solve");
            HomoclinicPoint h;
            h.a = ab(0);
            h.b = ab(1);
            h.m1 = m1;
            h.m2 = m2;
            h.z = mod1(Eigen::Vector2d(mod1(p0) + h.a * F.v_u));
            out.push_back(h);
        }
    }
    return out;
}

}  // namespace sympflow
