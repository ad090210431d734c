#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <vector>

#include "sympflow/base_dynamics.hpp"

using namespace sympflow;

namespace {

// Frozen eigenvalue oracle for the cat map [[2,1],[1,1]]: mu = (3 +- sqrt 5)/2.
constexpr double kCatMuMax = 2.618033988749895;
constexpr double kCatLambda = 0.3819660112501051;

// Independent determinant oracle: |det(F^k - I)| via integer arithmetic kept
// separate from the library's power/solve path.
long long det_fk_minus_i(long long a, long long b, long long c, long long d, int k) {
    long long m[2][2] = {{1, 0}, {0, 1}};
    for (int i = 0; i < k; ++i) {
        long long n00 = m[0][0] * a + m[0][1] * c;
        long long n01 = m[0][0] * b + m[0][1] * d;
        long long n10 = m[1][0] * a + m[1][1] * c;
        long long n11 = m[1][0] * b + m[1][1] * d;
        m[0][0] = n00;
        m[0][1] = n01;
        m[1][0] = n10;
        m[1][1] = n11;
    }
    return std::llabs((m[0][0] - 1) * (m[1][1] - 1) - m[0][1] * m[1][0]);
}

SuspensionFlow cat() { return SuspensionFlow::cat_unit_roof(); }

RoofFunction wavy_roof() { return RoofFunction::trig(1.0, {{1, 0, 0.1, 0.0}}); }

}  // namespace

TEST_CASE("cat map eigendata matches the closed form") {
    TorusAutomorphism f = TorusAutomorphism::cat_map();
    CHECK(f.det() == 1);
    CHECK(f.mu_expanding == doctest::Approx(kCatMuMax).epsilon(1e-14));
    CHECK(f.mu_contracting == doctest::Approx(kCatLambda).epsilon(1e-14));
    CHECK(f.v_u.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.v_s.norm() == doctest::Approx(1.0).epsilon(1e-14));

    // Eigen residuals are enforced at construction; check F-equivariance here.
    Eigen::Vector2d fu(2.0 * f.v_u(0) + f.v_u(1), f.v_u(0) + f.v_u(1));
    CHECK((fu - f.mu_expanding * f.v_u).norm() <= 1e-12);

    CHECK_THROWS_AS(TorusAutomorphism::from_matrix(2, 0, 0, 1), PreconditionError);  // det 2
    CHECK_THROWS_AS(TorusAutomorphism::from_matrix(0, 1, -1, 0), PreconditionError); // trace 0
}

TEST_CASE("flow: height motion, group law, roof crossing") {
    SuspensionFlow m = cat();

    SUBCASE("below the roof it only moves the height") {
        SuspensionPoint p{{0.2, 0.7}, 0.3};
        SuspensionPoint q = m.flow(p, 0.5);
        CHECK(q.x(0) == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(q.x(1) == doctest::Approx(0.7).epsilon(1e-14));
        CHECK(q.t == doctest::Approx(0.8).epsilon(1e-14));
    }

    SUBCASE("s = 0 is the identity") {
        SuspensionPoint p{{0.31, 0.64}, 0.11};
        SuspensionPoint q = m.flow(p, 0.0);
        CHECK(m.dist(p, q) == 0.0);
    }

    SUBCASE("one crossing equals two half-steps") {
        SuspensionPoint p{{0.31, 0.64}, 0.5};
        SuspensionPoint one = m.flow(p, 1.0);
        SuspensionPoint two = m.flow(m.flow(p, 0.5), 0.5);
        CHECK(m.dist(one, two) <= 1e-12);
        // (x, t) -> (F x, t) for the unit roof.
        SuspensionPoint expect{m.F.apply(p.x), 0.5};
        CHECK(m.dist(one, expect) <= 1e-12);
    }

    SUBCASE("group law on random triples") {
        Rng rng(12);
        for (int i = 0; i < 1000; ++i) {
            SuspensionPoint p{{rng.uniform01(), rng.uniform01()}, rng.uniform01()};
            const double s1 = rng.uniform(-4.0, 4.0), s2 = rng.uniform(-4.0, 4.0);
            SuspensionPoint a = m.flow(m.flow(p, s1), s2);
            SuspensionPoint b = m.flow(p, s1 + s2);
            CHECK(m.dist(a, b) <= 1e-9);
        }
    }

    SUBCASE("variable roof group law") {
        SuspensionFlow w = SuspensionFlow::make(TorusAutomorphism::cat_map(), wavy_roof());
        Rng rng(13);
        for (int i = 0; i < 300; ++i) {
            SuspensionPoint p{{rng.uniform01(), rng.uniform01()}, 0.0};
            p.t = rng.uniform01() * w.roof.value(p.x);
            const double s1 = rng.uniform(-3.0, 3.0), s2 = rng.uniform(-3.0, 3.0);
            CHECK(w.dist(w.flow(w.flow(p, s1), s2), w.flow(p, s1 + s2)) <= 1e-9);
        }
    }
}

TEST_CASE("time_one composition and inverse") {
    SuspensionFlow m = cat();
    SuspensionPoint p{{0.123, 0.456}, 0.789};

    SuspensionPoint ten_fold = p;
    for (int i = 0; i < 10; ++i) ten_fold = m.time_one(ten_fold);
    CHECK(m.dist(ten_fold, m.flow(p, 10.0)) <= 1e-9);

    CHECK(m.dist(m.flow(m.time_one(p), -1.0), p) <= 1e-10);

    // Constant roof: height is preserved exactly by the integer-time branch.
    CHECK(m.time_one(p).t == p.t);
}

TEST_CASE("stable and unstable leaf points contract at the eigenvalue rate") {
    SuspensionFlow m = cat();
    SuspensionPoint p{{0.37, 0.58}, 0.21};

    SUBCASE("a = 0 returns the point") {
        CHECK(m.dist(m.stable_leaf_point(p, 0.0), p) == 0.0);
    }

    SUBCASE("contraction over 10 steps") {
        SuspensionPoint q = m.stable_leaf_point(p, 0.1);
        SuspensionPoint fp = p, fq = q;
        for (int i = 0; i < 10; ++i) {
            fp = m.time_one(fp);
            fq = m.time_one(fq);
        }
        const double expected = 0.1 * std::pow(kCatLambda, 10);  // ~6.6e-6
        CHECK(m.dist(fp, fq) <= expected * (1.0 + 1e-6));
        CHECK(m.dist(fp, fq) >= expected * (1.0 - 1e-6));
    }

    SUBCASE("stepwise ratio stays below lambda") {
        SuspensionPoint fp = p, fq = m.stable_leaf_point(p, 0.05);
        double prev = m.dist(fp, fq);
        for (int i = 0; i < 12; ++i) {
            fp = m.time_one(fp);
            fq = m.time_one(fq);
            const double cur = m.dist(fp, fq);
            CHECK(cur / prev <= kCatLambda + 1e-6);
            prev = cur;
        }
    }

    SUBCASE("leaf parameters add") {
        SuspensionPoint two_step = m.stable_leaf_point(m.stable_leaf_point(p, 0.03), 0.04);
        SuspensionPoint one_step = m.stable_leaf_point(p, 0.07);
        CHECK(m.dist(two_step, one_step) <= 1e-12);
    }

    SUBCASE("unstable mirror under the inverse map") {
        SuspensionPoint q = m.unstable_leaf_point(p, 0.1);
        SuspensionPoint fp = p, fq = q;
        for (int i = 0; i < 10; ++i) {
            fp = m.flow(fp, -1.0);
            fq = m.flow(fq, -1.0);
        }
        CHECK(m.dist(fp, fq) <= 0.1 * std::pow(kCatLambda, 10) * (1.0 + 1e-6));
    }

    SUBCASE("variable roof leaves are rejected") {
        SuspensionFlow w = SuspensionFlow::make(TorusAutomorphism::cat_map(), wavy_roof());
        CHECK_THROWS_AS(w.stable_leaf_point(p, 0.1), PreconditionError);
        CHECK_THROWS_AS(w.unstable_leaf_point(p, 0.1), PreconditionError);
    }
}

TEST_CASE("suspension metric: flat base, seam continuity, metric axioms") {
    SuspensionFlow m = cat();

    CHECK(m.dist({{0.4, 0.9}, 0.3}, {{0.4, 0.9}, 0.3}) == 0.0);
    CHECK(m.dist({{0.0, 0.0}, 0.0}, {{0.5, 0.0}, 0.0}) == doctest::Approx(0.5).epsilon(1e-14));

    SUBCASE("identification continuity at the roof") {
        const Eigen::Vector2d x(0.27, 0.81);
        for (double delta : {1e-2, 1e-4, 1e-6}) {
            SuspensionPoint below{x, 1.0 - delta};
            SuspensionPoint above{m.F.apply(x), delta};
            CHECK(m.dist(below, above) <= 2.0 * delta + 1e-12);
        }
    }

    SUBCASE("symmetry and quasi-triangle inequality on random triples") {
        // Exact symmetry; the triangle inequality holds up to the bounded
        // chart distortion of the roof identification (|mu| stretch), with
        // exact violations rare and small.
        Rng rng(31);
        int violations = 0;
        for (int i = 0; i < 1000; ++i) {
            SuspensionPoint a{{rng.uniform01(), rng.uniform01()}, rng.uniform01()};
            SuspensionPoint b{{rng.uniform01(), rng.uniform01()}, rng.uniform01()};
            SuspensionPoint c{{rng.uniform01(), rng.uniform01()}, rng.uniform01()};
            CHECK(m.dist(a, b) == m.dist(b, a));
            const double legs = m.dist(a, b) + m.dist(b, c);
            const double dac = m.dist(a, c);
            CHECK(dac <= kCatMuMax * legs + 1e-12);
            if (dac > legs * (1.0 + 1e-12)) {
                ++violations;
                CHECK(dac <= 1.5 * legs);
            }
        }
        CHECK(violations <= 10);
    }
}

TEST_CASE("periodic points: exact counts and fixed-point membership") {
    TorusAutomorphism f = TorusAutomorphism::cat_map();

    SUBCASE("k = 1 gives only the origin") {
        auto pts = periodic_points(f, 1);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0](0) == 0.0);
        CHECK(pts[0](1) == 0.0);
    }

    SUBCASE("k = 2 gives five points; brute-force oracle agrees") {
        auto pts = periodic_points(f, 2);
        CHECK(pts.size() == 5);
        // Brute force over the denominator-5 lattice (det(F^2 - I) = -5).
        int found = 0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                Eigen::Vector2d x(i / 5.0, j / 5.0);
                Eigen::Vector2d y = f.apply(f.apply(x));
                if (torus_dist(y, x) < 1e-12) {
                    bool in_list = false;
                    for (const auto& p : pts)
                        if (torus_dist(p, x) < 1e-12) in_list = true;
                    CHECK(in_list);
                    ++found;
                }
            }
        CHECK(found == 5);
    }

    SUBCASE("counts match |det(F^k - I)| for k = 1..6") {
        const long long expected[] = {1, 5, 16, 45, 121, 320};
        for (int k = 1; k <= 6; ++k) {
            CHECK(det_fk_minus_i(2, 1, 1, 1, k) == expected[k - 1]);
            CHECK(static_cast<long long>(periodic_points(f, k).size()) == expected[k - 1]);
        }
    }

    SUBCASE("the origin appears for every k, and every point is F^k-periodic") {
        for (int k = 1; k <= 5; ++k) {
            auto pts = periodic_points(f, k);
            bool has_origin = false;
            for (const auto& p : pts) {
                Eigen::Vector2d y = p;
                for (int i = 0; i < k; ++i) y = f.apply(y);
                CHECK(torus_dist(y, p) <= 1e-9);
                if (p.norm() == 0.0) has_origin = true;
            }
            CHECK(has_origin);
        }
    }
}

TEST_CASE("homoclinic points of the origin") {
    TorusAutomorphism f = TorusAutomorphism::cat_map();
    const Eigen::Vector2d origin(0.0, 0.0);

    SUBCASE("window 0 is empty") {
        CHECK(homoclinic_points(f, origin, 0).empty());
    }

    SUBCASE("m = (1,0): unique parameters, orbit converges both ways") {
        auto all = homoclinic_points(f, origin, 1);
        const HomoclinicPoint* h10 = nullptr;
        for (const auto& h : all)
            if (h.m1 == 1 && h.m2 == 0) h10 = &h;
        REQUIRE(h10 != nullptr);

        // Defining relation a v_u = m + b v_s.
        Eigen::Vector2d lhs = h10->a * f.v_u;
        Eigen::Vector2d rhs = Eigen::Vector2d(1.0, 0.0) + h10->b * f.v_s;
        CHECK((lhs - rhs).norm() <= 1e-12);

        Eigen::Vector2d fwd = h10->z, bwd = h10->z;
        for (int i = 0; i < 15; ++i) {
            fwd = f.apply(fwd);
            bwd = f.apply_inverse(bwd);
        }
        CHECK(torus_dist(fwd, origin) <= 1e-4);
        CHECK(torus_dist(bwd, origin) <= 1e-4);
    }

    SUBCASE("count is nondecreasing in the window") {
        std::size_t prev = 0;
        for (int w = 0; w <= 3; ++w) {
            auto pts = homoclinic_points(f, origin, w);
            CHECK(pts.size() >= prev);
            prev = pts.size();
        }
    }

    SUBCASE("non-fixed base point is rejected") {
        CHECK_THROWS_AS(homoclinic_points(f, Eigen::Vector2d(0.3, 0.3), 1), PreconditionError);
    }
}

TEST_CASE("orientation-reversing automorphism (det = -1)") {
    // [[3,1],[1,0]]: det -1, trace 3; eigenvalues of opposite signs.
    TorusAutomorphism f = TorusAutomorphism::from_matrix(3, 1, 1, 0);
    CHECK(f.det() == -1);
    CHECK(std::abs(f.mu_expanding) > 1.0);
    CHECK(std::abs(f.mu_contracting) < 1.0);
    CHECK(f.mu_expanding * f.mu_contracting == doctest::Approx(-1.0).epsilon(1e-12));

    // Inverse round trip and periodic counts from the determinant formula.
    Eigen::Vector2d x(0.31, 0.62);
    CHECK(torus_dist(f.apply_inverse(f.apply(x)), x) <= 1e-12);
    for (int k = 1; k <= 4; ++k) {
        const long long expect = det_fk_minus_i(3, 1, 1, 0, k);
        CHECK(static_cast<long long>(periodic_points(f, k).size()) == expect);
    }

    // Leaf contraction still follows |mu_s| (the sign alternates direction).
    SuspensionFlow m = SuspensionFlow::make(f, RoofFunction::unit());
    SuspensionPoint p{{0.37, 0.58}, 0.21};
    SuspensionPoint q = m.stable_leaf_point(p, 0.05);
    SuspensionPoint fp = p, fq = q;
    for (int i = 0; i < 8; ++i) {
        fp = m.time_one(fp);
        fq = m.time_one(fq);
    }
    const double rate = std::pow(std::abs(f.mu_contracting), 8);
    CHECK(m.dist(fp, fq) == doctest::Approx(0.05 * rate).epsilon(1e-6));
}

TEST_CASE("hyperbolicity constants") {
    SuspensionFlow m = cat();
    HyperbolicityConstants c = m.constants();
    CHECK(c.lambda == doctest::Approx(kCatLambda).epsilon(1e-12));
    CHECK(c.gamma == 1.0);
    CHECK(c.lambda < c.gamma);

    // lambda(F) = lambda(F^{-1}): reciprocal eigenvalue pair.
    SuspensionFlow mi = SuspensionFlow::make(m.F.inverse(), RoofFunction::unit());
    CHECK(mi.constants().lambda == doctest::Approx(c.lambda).epsilon(1e-12));

    SuspensionFlow w = SuspensionFlow::make(TorusAutomorphism::cat_map(), wavy_roof());
    HyperbolicityConstants cw = w.constants();
    CHECK(cw.lambda == doctest::Approx(std::pow(1.0 / kCatMuMax, 1.0 / 1.1)).epsilon(1e-12));
    CHECK(cw.gamma == doctest::Approx(0.9 / 1.1).epsilon(1e-12));
    CHECK(cw.lambda < cw.gamma);
}

TEST_CASE("volume sampling: means, determinism, invariance") {
    SuspensionFlow m = cat();

    SUBCASE("constant roof mean height is 1/2 within 3 SE") {
        auto pts = m.volume_sample(100000, 4242);
        double mean = 0.0;
        for (const auto& p : pts) mean += p.t;
        mean /= static_cast<double>(pts.size());
        const double se = std::sqrt(1.0 / 12.0) / std::sqrt(static_cast<double>(pts.size()));
        CHECK(std::abs(mean - 0.5) <= 3.0 * se);
    }

    SUBCASE("trig roof mean height matches the closed form") {
        SuspensionFlow w = SuspensionFlow::make(TorusAutomorphism::cat_map(), wavy_roof());
        auto pts = w.volume_sample(100000, 99);
        double mean = 0.0;
        for (const auto& p : pts) mean += p.t;
        mean /= static_cast<double>(pts.size());
        // E[t] = (int r^2 / 2) / (int r) = (c0^2 + a^2/2) / (2 c0).
        const double expect = (1.0 + 0.1 * 0.1 / 2.0) / 2.0;
        const double se = 0.35 / std::sqrt(static_cast<double>(pts.size()));
        CHECK(std::abs(mean - expect) <= 3.0 * se);
    }

    SUBCASE("seed determinism and batching independence") {
        auto a = m.volume_sample(100, 7);
        auto b = m.volume_sample(100, 7);
        auto c = m.volume_sample(50, 7);  // prefix of the same stream
        for (int i = 0; i < 100; ++i) CHECK(m.dist(a[i], b[i]) == 0.0);
        for (int i = 0; i < 50; ++i) CHECK(m.dist(a[i], c[i]) == 0.0);
    }

    SUBCASE("volume of a box is preserved by the time-one map") {
        auto pts = m.volume_sample(100000, 5150);
        auto in_box = [](const SuspensionPoint& p) {
            return p.x(0) < 0.5 && p.x(1) < 0.5 && p.t < 0.5;
        };
        int before = 0, after = 0;
        for (const auto& p : pts) {
            if (in_box(p)) ++before;
            if (in_box(m.time_one(p))) ++after;
        }
        const double n = static_cast<double>(pts.size());
        const double se = std::sqrt(0.125 * 0.875 / n);
        CHECK(std::abs(before / n - after / n) <= 3.0 * std::sqrt(2.0) * se);
    }
}

TEST_CASE("compact center leaves and the leaf rotation") {
    SuspensionFlow m = cat();

    SUBCASE("fixed point gives T = 1") {
        PeriodicLeaf leaf = m.center_leaf_circle({0.0, 0.0}, 1);
        CHECK(leaf.T == 1.0);
        CHECK(leaf.rotation() == 1.0);
        CHECK(m.dist(leaf.point_at(0.25), SuspensionPoint{{0.0, 0.0}, 0.25}) <= 1e-12);
    }

    SUBCASE("period-2 orbit gives T = 2 and rotation 1/2") {
        auto pts = periodic_points(m.F, 2);
        const Eigen::Vector2d* p2 = nullptr;
        for (const auto& p : pts)
            if (p.norm() > 0.0) p2 = &p;
        REQUIRE(p2 != nullptr);
        PeriodicLeaf leaf = m.center_leaf_circle(*p2, 2);
        CHECK(leaf.T == 2.0);
        CHECK(leaf.rotation() == 0.5);

        // Following the flow for time 1 from circle coordinate s lands at s+1.
        SuspensionPoint ps = leaf.point_at(0.7);
        CHECK(m.dist(m.time_one(ps), leaf.point_at(1.7)) <= 1e-10);
    }

    SUBCASE("f^T fixes leaf points") {
        auto pts = periodic_points(m.F, 3);
        for (const auto& p : pts) {
            PeriodicLeaf leaf = m.center_leaf_circle(p, 3);
            SuspensionPoint q = leaf.point_at(1.37);
            CHECK(m.dist(m.flow(q, leaf.T), q) <= 1e-10);
        }
    }

    SUBCASE("variable roof period is the Birkhoff sum of the roof") {
        SuspensionFlow w = SuspensionFlow::make(TorusAutomorphism::cat_map(), wavy_roof());
        auto pts = periodic_points(w.F, 2);
        for (const auto& p : pts) {
            if (p.norm() == 0.0) continue;
            PeriodicLeaf leaf = w.center_leaf_circle(p, 2);
            const double expect = w.roof.value(p) + w.roof.value(w.F.apply(p));
            CHECK(leaf.T == doctest::Approx(expect).epsilon(1e-14));
        }
    }

    SUBCASE("non-periodic base point is rejected") {
        CHECK_THROWS_AS(m.center_leaf_circle({0.3, 0.4}, 2), PreconditionError);
    }
}
