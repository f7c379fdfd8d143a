#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include "gpkf/kernels.hpp"
#include "gpkf/numerics.hpp"
#include "oracles.hpp"

using namespace gpkf;

namespace {

const KernelFamily kFamilies[] = {KernelFamily::White, KernelFamily::RBF, KernelFamily::Exponential,
                                  KernelFamily::Matern32, KernelFamily::Matern52};

std::vector<TimeIndex> iota_times(TimeIndex first, std::size_t count) {
  std::vector<TimeIndex> t(count);
  std::iota(t.begin(), t.end(), first);
  return t;
}

}  // namespace

TEST(Kernel, DiagonalIsVariance) {
  EXPECT_DOUBLE_EQ(eval_kernel({KernelFamily::Exponential, 1.0, 5.0}, 3, 3), 1.0);
}

TEST(Kernel, WhiteOffDiagonalIsZero) {
  EXPECT_EQ(eval_kernel({KernelFamily::White, 2.5, 7.0}, 0, 1), 0.0);
  EXPECT_EQ(KernelSpec(KernelFamily::White, 2.5, 7.0).lengthscale(), 1.0);
}

TEST(Kernel, FittedExponentialAtOneLengthscale) {
  const double want = 1.2e-3 * std::exp(-1.0);
  EXPECT_NEAR(eval_kernel({KernelFamily::Exponential, 1.2e-3, 135.0}, 0, 135), want, 1e-18);
  EXPECT_NEAR(want, 4.4146e-4, 1e-8);
}

TEST(Kernel, MatchesClosedFormProfiles) {
  for (int f = 0; f < 5; ++f) {
    for (double l : {0.5, 1.0, 5.0, 135.0}) {
      const KernelSpec spec(kFamilies[f], 1.7, l);
      const double ls = f == 0 ? 1.0 : l;
      for (TimeIndex r = 0; r < 40; ++r)
        EXPECT_NEAR(spec(0, r), 1.7 * oracle::correlation(f, static_cast<double>(r), ls), 1e-15);
    }
  }
}

TEST(Kernel, RejectsInvalidHyperparameters) {
  EXPECT_THROW(KernelSpec(KernelFamily::RBF, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(KernelSpec(KernelFamily::RBF, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(KernelSpec(KernelFamily::Matern32, std::nan(""), 1.0), std::invalid_argument);
}

TEST(Kernel, FamilyNamesRoundTrip) {
  for (auto f : kFamilies) EXPECT_EQ(parse_kernel_family(to_string(f)), f);
  EXPECT_FALSE(parse_kernel_family("matern12").has_value());
}

TEST(Kernel, SymmetricAndStationary) {
  for (auto f : kFamilies) {
    const KernelSpec spec(f, 0.8, 3.0);
    for (TimeIndex t = -7; t < 8; ++t)
      for (TimeIndex s = -7; s < 8; ++s) {
        EXPECT_EQ(spec(t, s), spec(s, t));
        EXPECT_EQ(spec(t, s), spec(0, std::abs(t - s)));
      }
  }
}

TEST(Kernel, StrictlyDecreasingAndVanishing) {
  for (auto f : kFamilies) {
    if (f == KernelFamily::White) continue;
    const KernelSpec spec(f, 1.0, 4.0);
    for (TimeIndex r = 0; r < 60; ++r) EXPECT_LT(spec(0, r + 1), spec(0, r)) << to_string(f) << " r=" << r;
    EXPECT_LT(spec(0, 1000), 1e-12);
  }
}

TEST(Gram, WhiteIsScaledIdentity) {
  const auto t = iota_times(0, 3);
  EXPECT_EQ(gram({KernelFamily::White, 3.0}, t), 3.0 * Matrix::Identity(3, 3));
}

TEST(Gram, ExponentialTwoPoints) {
  const auto t = iota_times(0, 2);
  const Matrix k = gram({KernelFamily::Exponential, 1.0, 1.0}, t);
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_NEAR(k(0, 1), std::exp(-1.0), 1e-16);
  EXPECT_EQ(k(0, 1), k(1, 0));
}

TEST(Gram, RbfFirstRowAndToeplitz) {
  const Matrix k = gram_consecutive({KernelFamily::RBF, 1.0, 5.0}, 10);
  for (int r = 0; r < 10; ++r) EXPECT_DOUBLE_EQ(k(0, r), std::exp(-r * r / 50.0));
  for (int i = 1; i < 10; ++i)
    for (int j = 1; j < 10; ++j) EXPECT_EQ(k(i, j), k(i - 1, j - 1));
  EXPECT_EQ(k, k.transpose());
}

TEST(Gram, ConsecutiveTimesGiveSymmetricToeplitz) {
  for (auto f : kFamilies)
    for (double l : {1.0, 5.0, 50.0}) {
      const auto t = iota_times(-4, 30);
      const Matrix k = gram({f, 2.0, l}, t);
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        EXPECT_EQ(k(i, i), 2.0);
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
          EXPECT_EQ(k(i, j), k(j, i));
          if (i > 0 && j > 0) EXPECT_EQ(k(i, j), k(i - 1, j - 1));
        }
      }
    }
}

TEST(Gram, PsdAfterJitterPolicy) {
  for (auto f : kFamilies)
    for (double l : {0.5, 5.0, 135.0})
      for (std::size_t n : {2u, 10u, 50u}) {
        const KernelSpec spec(f, 1.0, l);
        const Matrix k = gram_consecutive(spec, n);
        const PsdFactor factor = psd_factor(k);
        const Matrix jittered = k + factor.jitter_used() * Matrix::Identity(k.rows(), k.cols());
        const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(jittered).eigenvalues()(0);
        EXPECT_GE(min_eig, -1e-10 * spec.variance()) << to_string(f) << " l=" << l << " n=" << n;
      }
}

TEST(Gram, ParallelMatchesSerial) {
  std::vector<TimeIndex> t;
  for (TimeIndex i = 0; i < 300; ++i) t.push_back((i * 37) % 311 - 50);
  for (auto f : kFamilies) {
    const KernelSpec spec(f, 1.3, 7.0);
    EXPECT_EQ(gram(spec, t), gram_serial(spec, t));
  }
}

TEST(Gram, AutocovarianceIsFirstRow) {
  const KernelSpec spec(KernelFamily::Matern52, 0.4, 3.0);
  const auto r = autocovariance(spec, 12);
  const Matrix k = gram_consecutive(spec, 12);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(r[i], k(0, i));
}
