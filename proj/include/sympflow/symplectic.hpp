// Symplectic linear algebra: the standard form J, membership tests and repair,
// rotation blocks, seeded near-identity elements, subspace transversality, and
// the projective action.  All checks are tolerance-based; repaired matrices
// carry their measured defect.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "sympflow/linalg.hpp"
#include "sympflow/rng.hpp"

namespace sympflow {

constexpr double kSymplecticTol = 1e-10;

/// The standard antisymmetric form J = [[0, I_d], [-I_d, 0]].
struct StandardForm {
    int d = 1;
    Mat matrix;
};

inline StandardForm standard_form(int d) {
    if (d < 1) throw PreconditionError("standard_form: d must be >= 1");
    Mat j = Mat::Zero(2 * d, 2 * d);
    j.block(0, d, d, d) = Mat::Identity(d, d);
    j.block(d, 0, d, d) = -Mat::Identity(d, d);
    return {d, std::move(j)};
}

/// max|entry| of B^T J B - J, the distance-to-group diagnostic.
inline double sym_defect(const Mat& b) {
    const long n = b.rows();
    if (b.cols() != n || n % 2 != 0 || n == 0)
        throw PreconditionError("sym_defect: matrix must be square of even dimension");
    const Mat j = standard_form(static_cast<int>(n / 2)).matrix;
    return max_abs(b.transpose() * j * b - j);
}

inline bool is_symplectic(const Mat& b, double tol) {
    return sym_defect(b) <= tol;
}

/// Inverse of a symplectic matrix via B^{-1} = J^{-1} B^T J = -J B^T J.
/// Exact up to rounding, no factorization needed.
inline Mat symplectic_inverse(const Mat& b) {
    const Mat j = standard_form(static_cast<int>(b.rows() / 2)).matrix;
    return -j * b.transpose() * j;
}

/// A validated element of Sp(2d, R); carries the measured defect.
struct SymplecticMatrix {
    int d = 1;
    Mat m;
    double defect = 0.0;

    static SymplecticMatrix checked(Mat b, double tol = kSymplecticTol) {
        const long n = b.rows();
        if (b.cols() != n || n % 2 != 0 || n == 0)
            throw PreconditionError("SymplecticMatrix: dimension must be even and positive");
        double def = sym_defect(b);
        if (def > tol)
            throw PreconditionError("SymplecticMatrix: defect " + std::to_string(def) +
                                    " exceeds tolerance " + std::to_string(tol));
        return {static_cast<int>(n / 2), std::move(b), def};
    }

    Mat inverse() const { return symplectic_inverse(m); }
};

/// Project a near-symplectic matrix back onto the group with Newton steps on
/// the defect E = B^T J B - J: B <- B (I + (1/2) J E).  Quadratic convergence;
/// a fixed point for symplectic input.
inline SymplecticMatrix symplectify(const Mat& b_in) {
    const long n = b_in.rows();
    if (b_in.cols() != n || n % 2 != 0 || n == 0)
        throw PreconditionError("symplectify: matrix must be square of even dimension");
    const int d = static_cast<int>(n / 2);
    const Mat j = standard_form(d).matrix;

    Mat b = b_in;
    double def = max_abs(b.transpose() * j * b - j);
    if (!std::isfinite(def) || def >= 0.1)
        throw PreconditionError("symplectify: input too far from Sp(2d) (defect " +
                                std::to_string(def) + ")");
    for (int it = 0; it < 30 && def > 1e-15; ++it) {
        Mat e = b.transpose() * j * b - j;
        Mat candidate = b + 0.5 * b * (j * e);
        double cand_def = max_abs(candidate.transpose() * j * candidate - j);
        if (!(cand_def < def)) break;
        b = std::move(candidate);
        def = cand_def;
    }
    return {d, std::move(b), def};
}

/// exp(theta J) = [[cos t I, sin t I], [-sin t I, cos t I]]; a one-parameter
/// rotation subgroup of Sp(2d): R(a) R(b) = R(a+b).
inline SymplecticMatrix rotation_block(double theta, int d) {
    if (d < 1) throw PreconditionError("rotation_block: d must be >= 1");
    const double c = std::cos(theta), s = std::sin(theta);
    Mat r = Mat::Zero(2 * d, 2 * d);
    r.block(0, 0, d, d) = c * Mat::Identity(d, d);
    r.block(d, d, d, d) = c * Mat::Identity(d, d);
    r.block(0, d, d, d) = s * Mat::Identity(d, d);
    r.block(d, 0, d, d) = -s * Mat::Identity(d, d);
    return {d, std::move(r), 0.0};
}

/// diag(e^s I_d, e^{-s} I_d), the diagonal one-parameter subgroup.
inline SymplecticMatrix diagonal_block(double s, int d) {
    if (d < 1) throw PreconditionError("diagonal_block: d must be >= 1");
    Mat m = Mat::Zero(2 * d, 2 * d);
    m.block(0, 0, d, d) = std::exp(s) * Mat::Identity(d, d);
    m.block(d, d, d, d) = std::exp(-s) * Mat::Identity(d, d);
    return {d, std::move(m), 0.0};
}

/// Seeded random sigma in Sp(2d) with ||sigma - I||_max <= eps: exponential of
/// a small random Hamiltonian matrix (H = J S, S symmetric), then repaired.
inline SymplecticMatrix random_symplectic_near_identity(double eps, int d, std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0))
        throw PreconditionError("random_symplectic_near_identity: eps must lie in (0,1)");
    if (d < 1) throw PreconditionError("random_symplectic_near_identity: d must be >= 1");
    Rng rng(sub_seed(0x5ca1ab1e00000001ull, seed));
    const int n = 2 * d;
    Mat s(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) s(i, k) = s(k, i) = rng.uniform(-1.0, 1.0);
    const Mat j = standard_form(d).matrix;
    Mat h = j * s;
    double tau = eps / (2.0 * op_norm(h));
    h *= tau;

    // Taylor series of exp(h); ||h|| <= eps/2 < 1/2 so 14 terms are exact to
    // double precision.
    Mat result = Mat::Identity(n, n);
    Mat term = Mat::Identity(n, n);
    for (int k = 1; k <= 14; ++k) {
        term = term * h / static_cast<double>(k);
        result += term;
    }
    SymplecticMatrix out = symplectify(result);
    if (max_abs(out.m - Mat::Identity(n, n)) > eps)
        throw ConvergenceError("random_symplectic_near_identity: size bound violated");
    return out;
}

/// A linear subspace of R^{2d} stored as an orthonormal column frame.
struct Subspace {
    Mat frame;  // (2d) x k, orthonormal columns

    static Subspace from_span(const Mat& span) {
        if (span.cols() < 1) throw PreconditionError("Subspace: empty spanning set");
        Eigen::HouseholderQR<Mat> qr(span);
        Mat q = qr.householderQ() * Mat::Identity(span.rows(), span.cols());
        // Guard against rank-deficient spans.
        Mat r = qr.matrixQR().topRows(span.cols()).triangularView<Eigen::Upper>();
        for (long i = 0; i < span.cols(); ++i)
            if (std::abs(r(i, i)) < 1e-12 * std::max(1.0, max_abs(span)))
                throw PreconditionError("Subspace: spanning set is rank deficient");
        return {std::move(q)};
    }

    int dim() const { return static_cast<int>(frame.cols()); }
    int ambient() const { return static_cast<int>(frame.rows()); }
};

/// dim(V cap W) from the rank of the stacked frames; singular values below
/// tol * sigma_max count as zero.
inline int subspace_intersection_dim(const Subspace& v, const Subspace& w, double tol = 1e-8) {
    if (v.ambient() != w.ambient())
        throw PreconditionError("subspace_intersection_dim: ambient dimensions differ");
    Mat stacked(v.ambient(), v.dim() + w.dim());
    stacked.leftCols(v.dim()) = v.frame;
    stacked.rightCols(w.dim()) = w.frame;
    Vec sv = Eigen::JacobiSVD<Mat>(stacked).singularValues();
    const double cutoff = tol * sv(0);
    int rank = 0;
    for (long i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    return v.dim() + w.dim() - rank;
}

inline Subspace apply_to_subspace(const Mat& b, const Subspace& s) {
    return Subspace::from_span(b * s.frame);
}

/// Largest principal angle between two subspaces of equal dimension.
inline double principal_angle_max(const Subspace& u, const Subspace& v) {
    if (u.dim() != v.dim() || u.ambient() != v.ambient())
        throw PreconditionError("principal_angle_max: incompatible subspaces");
    Vec sv = Eigen::JacobiSVD<Mat>(Mat(u.frame.transpose() * v.frame)).singularValues();
    double c = std::clamp(sv(sv.size() - 1), -1.0, 1.0);
    return std::acos(c);
}

enum class TransverseFamily { General, Rotation };

/// Find sigma in Sp(2d) with ||sigma - I|| <= eps putting every pair (V_j, W_j)
/// in generic position: dim(sigma V_j cap W_j) = max(0, dim V + dim W - 2d).
/// The identity is tried first; then seeded random candidates, optionally
/// restricted to the rotation subgroup (whose fractional powers are exact).
inline SymplecticMatrix make_transverse(const std::vector<std::pair<Subspace, Subspace>>& pairs,
                                        double eps, std::uint64_t seed, int max_tries,
                                        TransverseFamily family = TransverseFamily::General,
                                        double rank_tol = 1e-8) {
    if (pairs.empty()) throw PreconditionError("make_transverse: no pairs given");
    const int two_d = pairs.front().first.ambient();
    if (two_d % 2 != 0) throw PreconditionError("make_transverse: odd ambient dimension");
    const int d = two_d / 2;

    auto generic = [&](const Mat& sigma) {
        for (const auto& [v, w] : pairs) {
            int target = std::max(0, v.dim() + w.dim() - two_d);
            if (subspace_intersection_dim(apply_to_subspace(sigma, v), w, rank_tol) != target)
                return false;
        }
        return true;
    };

    SymplecticMatrix identity{d, Mat::Identity(two_d, two_d), 0.0};
    if (generic(identity.m)) return identity;

    Rng rng(sub_seed(0x7ca95fell, seed));
    for (int attempt = 1; attempt <= max_tries; ++attempt) {
        SymplecticMatrix sigma =
            family == TransverseFamily::Rotation
                ? rotation_block(rng.uniform(-eps, eps), d)
                : random_symplectic_near_identity(eps, d, rng.next_u64());
        if (generic(sigma.m)) return sigma;
    }
    throw ConvergenceError("make_transverse: exhausted " + std::to_string(max_tries) +
                           " tries at eps " + std::to_string(eps) +
                           "; raise eps or max_tries");
}

/// A point of RP^{2d-1}: unit representative with the first coordinate above
/// threshold made positive, so equal points compare equal.
struct ProjectivePoint {
    Vec v;

    static ProjectivePoint from(Vec raw) {
        double n = raw.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw PreconditionError("ProjectivePoint: zero or non-finite vector");
        if (std::abs(n - 1.0) > 4e-16) raw /= n;  // keep unit inputs bit-stable
        for (long i = 0; i < raw.size(); ++i) {
            if (std::abs(raw(i)) > 1e-12) {
                if (raw(i) < 0.0) raw = -raw;
                break;
            }
        }
        return {std::move(raw)};
    }
};

inline ProjectivePoint projective_act(const Mat& b, const ProjectivePoint& p) {
    return ProjectivePoint::from(b * p.v);
}

/// Distance on projective space: the acute angle between the two lines.
/// Computed through atan2 of the orthogonal component so that tiny angles do
/// not saturate at sqrt(machine epsilon).
inline double projective_angle(const ProjectivePoint& p, const ProjectivePoint& q) {
    double dot = p.v.dot(q.v);
    Vec q_aligned = dot >= 0.0 ? q.v : Vec(-q.v);
    dot = std::abs(dot);
    const double perp = (q_aligned - dot * p.v).norm();
    return std::atan2(perp, dot);
}

/// Angle coordinate of a point of RP^1, in [0, pi).
inline double rp1_angle(const ProjectivePoint& p) {
    double a = std::atan2(p.v(1), p.v(0));
    if (a < 0.0) a += 3.14159265358979323846;
    if (a >= 3.14159265358979323846) a -= 3.14159265358979323846;
    return a;
}

}  // namespace sympflow
