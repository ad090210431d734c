#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "sympflow/symplectic.hpp"

using namespace sympflow;

namespace {

// For d = 1, B^T J B = det(B) J, so membership reduces to det(B) = 1.
// Used as the independent oracle for the 2x2 cases.
bool symplectic_2x2_oracle(const Mat& b, double tol) {
    return std::abs(b.determinant() - 1.0) <= tol;
}

Mat diag2(double a, double b) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

}  // namespace

TEST_CASE("standard_form matches the block layout") {
    StandardForm j1 = standard_form(1);
    CHECK(j1.matrix(0, 0) == 0.0);
    CHECK(j1.matrix(0, 1) == 1.0);
    CHECK(j1.matrix(1, 0) == -1.0);
    CHECK(j1.matrix(1, 1) == 0.0);

    // J^2 = -I
    CHECK(max_abs(j1.matrix * j1.matrix + Mat::Identity(2, 2)) == 0.0);

    StandardForm j2 = standard_form(2);
    CHECK(max_abs(j2.matrix.block(0, 2, 2, 2) - Mat::Identity(2, 2)) == 0.0);
    CHECK(max_abs(j2.matrix.block(2, 0, 2, 2) + Mat::Identity(2, 2)) == 0.0);
    CHECK(max_abs(j2.matrix.block(0, 0, 2, 2)) == 0.0);
    CHECK(max_abs(j2.matrix + j2.matrix.transpose()) == 0.0);

    CHECK_THROWS_AS(standard_form(0), PreconditionError);
}

TEST_CASE("is_symplectic agrees with the 2x2 determinant oracle") {
    CHECK(is_symplectic(Mat::Identity(2, 2), 1e-12));
    CHECK(is_symplectic(Mat::Identity(4, 4), 1e-12));

    Mat b = diag2(2.0, 0.5);
    CHECK(symplectic_2x2_oracle(b, 1e-12));
    CHECK(is_symplectic(b, 1e-12));

    Mat bad = diag2(2.0, 2.0);
    CHECK_FALSE(symplectic_2x2_oracle(bad, 1e-8));
    CHECK_FALSE(is_symplectic(bad, 1e-8));

    // Random d=1 matrices: library verdict matches the determinant oracle.
    Rng rng(321);
    for (int i = 0; i < 200; ++i) {
        Mat m(2, 2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) m(r, c) = rng.uniform(-2.0, 2.0);
        const double det = m.determinant();
        if (std::abs(det) < 0.1) continue;
        const bool oracle = std::abs(det - 1.0) <= 1e-9;
        CHECK(is_symplectic(m, 1e-9) == oracle);
    }

    CHECK_THROWS_AS(is_symplectic(Mat::Identity(3, 3), 1e-9), PreconditionError);
}

TEST_CASE("symplectify is a tolerant projection onto the group") {
    SUBCASE("fixed point on symplectic input") {
        Mat b = (rotation_block(0.7, 1).m * diag2(1.5, 1.0 / 1.5));
        SymplecticMatrix repaired = symplectify(b);
        CHECK(max_abs(repaired.m - b) <= 1e-12);
    }

    SUBCASE("small dilation is repaired below 1e-10") {
        Mat b = (1.0 + 1e-6) * Mat::Identity(2, 2);
        SymplecticMatrix repaired = symplectify(b);
        CHECK(is_symplectic(repaired.m, 1e-10));
        CHECK(max_abs(repaired.m - b) <= 1e-5);
    }

    SUBCASE("long random product with periodic repair stays on the group") {
        Mat acc = Mat::Identity(2, 2);
        for (int i = 0; i < 1000; ++i) {
            acc = random_symplectic_near_identity(0.05, 1, 1000 + i).m * acc;
            if ((i + 1) % 25 == 0) acc = symplectify(acc).m;
        }
        acc = symplectify(acc).m;
        CHECK(sym_defect(acc) <= 1e-10);
    }

    SUBCASE("far-from-group input is rejected") {
        CHECK_THROWS_AS(symplectify(diag2(3.0, 3.0)), PreconditionError);
    }
}

TEST_CASE("rotation_block is the rotation one-parameter subgroup") {
    CHECK(max_abs(rotation_block(0.0, 1).m - Mat::Identity(2, 2)) == 0.0);
    CHECK(max_abs(rotation_block(0.0, 3).m - Mat::Identity(6, 6)) == 0.0);

    // theta = pi/2 gives J itself.
    const Mat j = standard_form(1).matrix;
    CHECK(max_abs(rotation_block(1.5707963267948966, 1).m - j) <= 1e-15);

    CHECK(max_abs(rotation_block(0.3, 1).m * rotation_block(0.4, 1).m -
                  rotation_block(0.7, 1).m) <= 1e-12);

    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
        const int d = 1 + static_cast<int>(rng.index(2));
        CHECK(max_abs(rotation_block(a, d).m * rotation_block(b, d).m -
                      rotation_block(a + b, d).m) <= 1e-12);
        CHECK(is_symplectic(rotation_block(a, d).m, 1e-12));
    }
}

TEST_CASE("random_symplectic_near_identity honors size, seed, and membership") {
    for (int d : {1, 2}) {
        SymplecticMatrix s = random_symplectic_near_identity(1e-3, d, 42);
        CHECK(is_symplectic(s.m, 1e-10));
        CHECK(max_abs(s.m - Mat::Identity(2 * d, 2 * d)) <= 1e-3);
    }

    SymplecticMatrix a = random_symplectic_near_identity(1e-3, 1, 7);
    SymplecticMatrix b = random_symplectic_near_identity(1e-3, 1, 7);
    CHECK(max_abs(a.m - b.m) == 0.0);

    // No collisions across 100 seeds.
    std::set<double> signatures;
    for (int seed = 0; seed < 100; ++seed)
        signatures.insert(random_symplectic_near_identity(1e-3, 1, seed).m(0, 1));
    CHECK(signatures.size() == 100);

    CHECK_THROWS_AS(random_symplectic_near_identity(0.0, 1, 1), PreconditionError);
    CHECK_THROWS_AS(random_symplectic_near_identity(1.5, 1, 1), PreconditionError);
}

TEST_CASE("subspace_intersection_dim matches construction oracles") {
    Rng rng(5150);
    auto random_vec = [&](int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = rng.normal();
        return v;
    };

    SUBCASE("V = W gives dim V") {
        Mat span(4, 2);
        span.col(0) = random_vec(4);
        span.col(1) = random_vec(4);
        Subspace v = Subspace::from_span(span);
        CHECK(subspace_intersection_dim(v, v) == 2);
    }

    SUBCASE("coordinate axes in R^2 are transverse") {
        Subspace e1 = Subspace::from_span(Vec{{1.0, 0.0}});
        Subspace e2 = Subspace::from_span(Vec{{0.0, 1.0}});
        CHECK(subspace_intersection_dim(e1, e2) == 0);
    }

    SUBCASE("pairs built with a known shared subspace") {
        for (int rep = 0; rep < 20; ++rep) {
            Vec shared = random_vec(4);
            Mat mv(4, 2), mw(4, 2);
            mv.col(0) = shared;
            mv.col(1) = random_vec(4);
            mw.col(0) = shared;
            mw.col(1) = random_vec(4);
            CHECK(subspace_intersection_dim(Subspace::from_span(mv), Subspace::from_span(mw)) == 1);

            // Generic re-draw of both second columns: expected intersection 0.
            Mat mv2(4, 2), mw2(4, 2);
            mv2.col(0) = random_vec(4);
            mv2.col(1) = random_vec(4);
            mw2.col(0) = random_vec(4);
            mw2.col(1) = random_vec(4);
            CHECK(subspace_intersection_dim(Subspace::from_span(mv2), Subspace::from_span(mw2)) ==
                  0);
        }
    }
}

TEST_CASE("make_transverse reaches generic position") {
    SUBCASE("already transverse pair returns the identity") {
        Subspace v = Subspace::from_span(Vec{{1.0, 0.0}});
        Subspace w = Subspace::from_span(Vec{{0.0, 1.0}});
        SymplecticMatrix sigma = make_transverse({{v, w}}, 0.1, 1, 50);
        CHECK(max_abs(sigma.m - Mat::Identity(2, 2)) == 0.0);
    }

    SUBCASE("coincident lines in R^2 are separated by a small sigma") {
        Subspace v = Subspace::from_span(Vec{{1.0, 0.0}});
        SymplecticMatrix sigma = make_transverse({{v, v}}, 0.1, 2, 100);
        CHECK(max_abs(sigma.m - Mat::Identity(2, 2)) <= 0.1);
        CHECK(subspace_intersection_dim(apply_to_subspace(sigma.m, v), v) == 0);
    }

    SUBCASE("three Lagrangian-plane pairs in R^4") {
        // Lagrangian planes: span(e1, e2) type frames (J maps one to the other).
        Mat l1(4, 2), l2(4, 2), l3(4, 2);
        l1.setZero();
        l1(0, 0) = 1;
        l1(1, 1) = 1;  // span(e1, e2)
        l2.setZero();
        l2(2, 0) = 1;
        l2(3, 1) = 1;  // span(e3, e4)
        l3.setZero();
        l3(0, 0) = 1;
        l3(2, 1) = 1;  // span(e1, e3)
        std::vector<std::pair<Subspace, Subspace>> pairs = {
            {Subspace{l1}, Subspace{l1}}, {Subspace{l2}, Subspace{l2}}, {Subspace{l3}, Subspace{l3}}};
        SymplecticMatrix sigma = make_transverse(pairs, 0.05, 3, 20);
        for (const auto& [v, w] : pairs)
            CHECK(subspace_intersection_dim(apply_to_subspace(sigma.m, v), w) == 0);
        CHECK(max_abs(sigma.m - Mat::Identity(4, 4)) <= 0.05);
    }

    SUBCASE("rotation family also works for lines in the plane") {
        Subspace v = Subspace::from_span(Vec{{1.0, 0.0}});
        SymplecticMatrix sigma =
            make_transverse({{v, v}}, 0.1, 4, 100, TransverseFamily::Rotation);
        CHECK(subspace_intersection_dim(apply_to_subspace(sigma.m, v), v) == 0);
    }

    SUBCASE("non-complementary dimensions reach the generic sum dimension") {
        // dim V + dim W != 2d: generic position means
        // dim(sigma V + W) = dim V + dim W, i.e. intersection max(0, v+w-2d).
        Rng rng(808);
        auto rand_span = [&](int rows, int cols) {
            Mat m(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
            return m;
        };
        Mat shared = rand_span(4, 1);
        Mat v_span(4, 1);
        v_span.col(0) = shared.col(0);
        Mat w_span(4, 3);
        w_span.col(0) = shared.col(0);
        w_span.col(1) = rand_span(4, 1);
        w_span.col(2) = rand_span(4, 1);
        Subspace v = Subspace::from_span(v_span);   // line inside W
        Subspace w = Subspace::from_span(w_span);   // 3-space, shares the line
        REQUIRE(subspace_intersection_dim(v, w) == 1);
        SymplecticMatrix sigma = make_transverse({{v, w}}, 0.05, 5, 100);
        // 1 + 3 = 4 = 2d, so generic intersection is 0.
        CHECK(subspace_intersection_dim(apply_to_subspace(sigma.m, v), w) == 0);

        Subspace v2 = Subspace::from_span(rand_span(4, 1));
        Subspace w2 = Subspace::from_span(rand_span(4, 1));
        SymplecticMatrix sigma2 = make_transverse({{v2, w2}}, 0.05, 6, 100);
        CHECK(subspace_intersection_dim(apply_to_subspace(sigma2.m, v2), w2) == 0);
    }
}

TEST_CASE("projective action: canonical representatives and group action") {
    ProjectivePoint e1 = ProjectivePoint::from(Vec{{1.0, 0.0}});

    SUBCASE("identity fixes points") {
        ProjectivePoint p = projective_act(Mat::Identity(2, 2), e1);
        CHECK(max_abs(p.v - e1.v) == 0.0);
    }

    SUBCASE("[v] and [-v] are the same point") {
        ProjectivePoint plus = ProjectivePoint::from(Vec{{0.3, -0.8}});
        ProjectivePoint minus = ProjectivePoint::from(Vec{{-0.3, 0.8}});
        CHECK(max_abs(plus.v - minus.v) == 0.0);
    }

    SUBCASE("J maps [e1] to [e2]") {
        // J (1,0) = (0,-1), canonicalized to (0,1).
        ProjectivePoint img = projective_act(standard_form(1).matrix, e1);
        CHECK(img.v(0) == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(img.v(1) == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("group action and inverse consistency on random triples") {
        Rng rng(99);
        for (int i = 0; i < 100; ++i) {
            const int d = 1 + static_cast<int>(rng.index(2));
            Mat b1 = (random_symplectic_near_identity(0.4, d, 2 * i).m *
                      rotation_block(rng.uniform(-2.0, 2.0), d).m);
            Mat b2 = (diagonal_block(rng.uniform(-0.5, 0.5), d).m *
                      random_symplectic_near_identity(0.4, d, 2 * i + 1).m);
            Vec raw(2 * d);
            for (int k = 0; k < 2 * d; ++k) raw(k) = rng.normal();
            ProjectivePoint p = ProjectivePoint::from(raw);

            ProjectivePoint lhs = projective_act(b1 * b2, p);
            ProjectivePoint rhs = projective_act(b1, projective_act(b2, p));
            CHECK(projective_angle(lhs, rhs) <= 1e-10);

            ProjectivePoint round = projective_act(b1, projective_act(symplectic_inverse(b1), p));
            CHECK(projective_angle(round, p) <= 1e-10);
        }
    }
}

TEST_CASE("every constructor output passes is_symplectic at the default tolerance") {
    Rng rng(2024);
    for (int i = 0; i < 50; ++i) {
        const int d = 1 + static_cast<int>(rng.index(2));
        CHECK(is_symplectic(rotation_block(rng.uniform(-3, 3), d).m, kSymplecticTol));
        CHECK(is_symplectic(diagonal_block(rng.uniform(-1, 1), d).m, kSymplecticTol));
        CHECK(is_symplectic(random_symplectic_near_identity(0.3, d, i).m, kSymplecticTol));
    }
}
