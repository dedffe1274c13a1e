#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"

using namespace qtherm;
using qtherm::test::random_hermitian;
using qtherm::test::random_matrix;

TEST(Eigen, ReconstructsRandomHermitian) {
    std::mt19937_64 g(1);
    for (int d = 1; d <= 8; ++d) {
        for (int rep = 0; rep < 20; ++rep) {
            Matrix m = random_hermitian(g, d);
            auto comps = hermitian_eigendecomposition(m);
            Matrix sum = Matrix::Zero(d, d);
            for (const auto& c : comps) sum += c.value * c.projector;
            EXPECT_LT(max_abs(sum - m), 1e-10);
            for (std::size_t i = 0; i < comps.size(); ++i) {
                EXPECT_LT(max_abs(comps[i].projector * comps[i].projector - comps[i].projector), 1e-10);
                for (std::size_t j = i + 1; j < comps.size(); ++j)
                    EXPECT_LT(max_abs(comps[i].projector * comps[j].projector), 1e-10);
            }
        }
    }
}

TEST(Eigen, DescendingAndDegenerateGrouped) {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 2.0;
    m(1, 1) = 2.0;
    m(2, 2) = -1.0;
    auto comps = hermitian_eigendecomposition(m);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_NEAR(comps[0].value, 2.0, 1e-14);
    EXPECT_EQ(comps[0].rank, 2);
    EXPECT_NEAR(comps[1].value, -1.0, 1e-14);
}

TEST(Eigen, RejectsNonHermitian) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    try {
        hermitian_eigendecomposition(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonHermitianInput);
    }
    EXPECT_THROW(hermitian_eigendecomposition(Matrix::Zero(2, 3)), Error);
}

TEST(Linalg, AdjointIsInvolution) {
    std::mt19937_64 g(2);
    for (int i = 0; i < 1000; ++i) {
        Matrix m = random_matrix(g, 1 + i % 6);
        EXPECT_EQ(adjoint(adjoint(m)), m);
    }
}

TEST(Linalg, TraceDistanceTriangle) {
    std::mt19937_64 g(3);
    for (int i = 0; i < 300; ++i) {
        int d = 2 + i % 4;
        Matrix a = qtherm::test::random_density(g, d), b = qtherm::test::random_density(g, d),
               c = qtherm::test::random_density(g, d);
        EXPECT_LE(trace_distance(a, c), trace_distance(a, b) + trace_distance(b, c) + 1e-12);
        EXPECT_NEAR(trace_distance(a, a), 0.0, 1e-14);
        EXPECT_LE(trace_distance(a, b), 1.0 + 1e-12);
    }
}

TEST(Linalg, TraceDistanceOrthogonalPureStates) {
    Matrix a = pure_density(basis_vector(2, 0)), b = pure_density(basis_vector(2, 1));
    EXPECT_NEAR(trace_distance(a, b), 1.0, 1e-15);
}

TEST(Linalg, MixedStateCheck) {
    EXPECT_TRUE(check_mixed_state(identity(3) / 3.0).ok());
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = 1.5;
    bad(1, 1) = -0.5;
    EXPECT_FALSE(check_mixed_state(bad).ok());
    EXPECT_FALSE(check_mixed_state(identity(2)).ok());
}

TEST(Linalg, HermitianLogFloors) {
    Matrix r = Matrix::Zero(2, 2);
    r(0, 0) = 1.0;
    bool floored = false;
    Matrix l = hermitian_log(r, 1e-14, &floored);
    EXPECT_TRUE(floored);
    EXPECT_NEAR(l(0, 0).real(), 0.0, 1e-14);
    EXPECT_NEAR(l(1, 1).real(), std::log(1e-14), 1e-10);
}

TEST(Linalg, ResolveRankOneIsOrthonormal) {
    Matrix p = identity(3);
    p(2, 2) = 0.0;
    auto vs = resolve_rank_one(p, 2);
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_NEAR(std::abs(vs[0].dot(vs[1])), 0.0, 1e-14);
    EXPECT_LT(max_abs(vs[0] * vs[0].adjoint() + vs[1] * vs[1].adjoint() - p), 1e-12);
}

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Rng, PhiloxKnownAnswers) {
    using B = Philox4x32::Block;
    EXPECT_EQ(Philox4x32::generate(B{0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::generate(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::generate(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    Rng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        seen.insert(x);
        seen.insert(c.next_u64());
        seen.insert(d.next_u64());
    }
    EXPECT_EQ(seen.size(), 300u);
}

TEST(Rng, HighStreamBitsSeparate) {
    Rng a(1, 5), b(1, 5 + (std::uint64_t{1} << 32));
    EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(9, 0);
    const int n = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        su2 += u * u;
        double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(su2 / n - std::pow(su / n, 2), 1.0 / 12, 2e-3);
    EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
    EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}
