#include <gtest/gtest.h>

#include "oacsplit/channel.hpp"
#include "oacsplit/linalg.hpp"

using namespace oacsplit;

namespace {

double reconstruction_error(const CMatrix& m, const Svd& f) {
  return (m - f.U * f.S.cast<cplx>().asDiagonal() * f.V.adjoint()).norm() / m.norm();
}

bool orthonormal_columns(const CMatrix& q, double tol) {
  return (q.adjoint() * q - CMatrix::Identity(q.cols(), q.cols())).norm() < tol;
}

}  // namespace

TEST(Svd, IdentityIsItsOwnFactorization) {
  const Svd f = svd(CMatrix::Identity(3, 3));
  EXPECT_TRUE(f.S.isApprox(RVector::Ones(3)));
  // Up to column phase; the phase rule makes the first entry real-positive.
  EXPECT_LT((f.U * f.V.adjoint() - CMatrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(Svd, RankOneOuterProduct) {
  Rng rng(3);
  const CMatrix a = random_complex(5, 1, rng), b = random_complex(4, 1, rng);
  const Svd f = svd(a * b.adjoint());
  int above = 0;
  for (Index i = 0; i < f.S.size(); ++i) above += f.S(i) > 1e-10;
  EXPECT_EQ(above, 1);
}

TEST(Svd, SparseChannelHasRankEqualToPathCount) {
  Rng rng(11);
  const ChannelState ch = sample_channel(16, 16, 4, rng);
  EXPECT_EQ(numerical_rank(ch.H(), 1e-8), 4);
}

TEST(Svd, RoundTripUpTo128) {
  Rng rng(5);
  for (Index n : {1, 2, 7, 16, 33, 64, 128}) {
    for (Index m : {n, n / 2 + 1}) {
      const CMatrix a = random_complex(n, m, rng);
      const Svd f = svd(a);
      EXPECT_LT(reconstruction_error(a, f), 1e-10) << n << "x" << m;
      EXPECT_TRUE(orthonormal_columns(f.U, 1e-10));
      EXPECT_TRUE(orthonormal_columns(f.V, 1e-10));
      for (Index i = 1; i < f.S.size(); ++i) EXPECT_GE(f.S(i - 1), f.S(i));
      EXPECT_GE(f.S.minCoeff(), 0.0);
    }
  }
}

TEST(Svd, PhaseConventionFirstEntryRealPositive) {
  Rng rng(8);
  const Svd f = svd(random_complex(6, 6, rng));
  for (Index j = 0; j < 6; ++j) {
    EXPECT_NEAR(f.U(0, j).imag(), 0.0, 1e-14);
    EXPECT_GT(f.U(0, j).real(), 0.0);
  }
}

TEST(Svd, RejectsNonFinite) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 1) = cplx(std::nan(""), 0.0);
  EXPECT_THROW(svd(m), DecompositionError);
}

TEST(Pinv, InvertibleMatchesInverse) {
  CMatrix m(2, 2);
  m << cplx(1, 2), cplx(0, 1), cplx(3, 0), cplx(-1, 1);
  EXPECT_LT((pinv(m) - m.inverse()).norm(), 1e-10);
}

TEST(Pinv, ZeroMatrix) { EXPECT_EQ(pinv(CMatrix::Zero(3, 4)), CMatrix::Zero(4, 3)); }

TEST(Pinv, FullRowRankRightInverse) {
  Rng rng(9);
  const CMatrix m = random_complex(4, 6, rng);
  const CMatrix p = pinv(m);
  EXPECT_LT((m * p - CMatrix::Identity(4, 4)).norm(), 1e-8);
  EXPECT_LT((m * p * m - m).norm() / m.norm(), 1e-8);
}

TEST(Pinv, Idempotent) {
  Rng rng(10);
  for (int i = 0; i < 10; ++i) {
    const CMatrix m = random_complex(5, 3, rng);
    EXPECT_LT((pinv(pinv(m)) - m).norm() / m.norm(), 1e-8);
  }
}

TEST(Kron, IdentityGivesBlockDiagonal) {
  Rng rng(12);
  const CMatrix m = random_complex(2, 3, rng);
  const CMatrix k = kron(CMatrix::Identity(2, 2), m);
  ASSERT_EQ(k.rows(), 4);
  ASSERT_EQ(k.cols(), 6);
  EXPECT_EQ(k.block(0, 0, 2, 3), m);
  EXPECT_EQ(k.block(2, 3, 2, 3), m);
  EXPECT_EQ(k.block(0, 3, 2, 3), CMatrix::Zero(2, 3));
}

TEST(Kron, ScalarScales) {
  Rng rng(13);
  const CMatrix m = random_complex(3, 3, rng);
  EXPECT_EQ(kron(CMatrix::Constant(1, 1, 2.0), m), 2.0 * m);
}

TEST(Kron, MixedProduct) {
  Rng rng(14);
  const CMatrix a = random_complex(2, 2, rng), b = random_complex(2, 2, rng);
  const CMatrix c = random_complex(2, 2, rng), d = random_complex(2, 2, rng);
  EXPECT_LT((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-12);
}

TEST(Rng, DeterministicStreams) {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 1'000'000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, ComplexNormalVariance) {
  Rng rng(1);
  double re = 0.0, im = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const cplx z = rng.complex_normal(2.0);
    re += z.real() * z.real();
    im += z.imag() * z.imag();
  }
  EXPECT_NEAR(re / n, 1.0, 0.02);
  EXPECT_NEAR(im / n, 1.0, 0.02);
}
