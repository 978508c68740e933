#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "infofair/oracle.hpp"

using namespace infofair;

namespace {

// Independent route to MI: H(a) + H(b) - H(a, b).
double mi_by_entropies(const DiscreteJoint& j) {
  const auto pa = j.marginal_a(), pb = j.marginal_b();
  return entropy(pa) + entropy(pb) - entropy(j.p);
}

}  // namespace

TEST(MutualInformation, ProductTableIsZero) {
  const DiscreteJoint j{2, 3, {0.5 * 0.2, 0.5 * 0.3, 0.5 * 0.5, 0.5 * 0.2, 0.5 * 0.3, 0.5 * 0.5}};
  EXPECT_NEAR(brute_mi(j), 0.0, 1e-15);
}

TEST(MutualInformation, DiagonalTableIsLn2) {
  const DiscreteJoint j{2, 2, {0.5, 0.0, 0.0, 0.5}};
  EXPECT_NEAR(brute_mi(j), std::log(2.0), 1e-15);
}

TEST(MutualInformation, AgreesWithEntropyIdentityAndIsSymmetric) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto j = random_joint(rng, 5, 7);
    const double mi = brute_mi(j);
    EXPECT_GE(mi, -1e-15);
    EXPECT_NEAR(mi, mi_by_entropies(j), 1e-12);
    EXPECT_NEAR(mi, brute_mi(j.transposed()), 1e-12);
  }
}

TEST(MutualInformation, RejectsInvalidTables) {
  EXPECT_THROW(brute_mi({2, 2, {0.5, 0.5, 0.5, 0.5}}), PreconditionError);
  EXPECT_THROW(brute_mi({2, 2, {1.5, -0.5, 0.0, 0.0}}), PreconditionError);
  EXPECT_THROW(brute_mi({2, 2, {1.0}}), PreconditionError);
}

TEST(Decomposition, ExactPosteriorMakesTheRatioTermZero) {
  const DiscreteJoint j{2, 2, {0.4, 0.1, 0.2, 0.3}};
  // q(b | a) = P(b | a)
  const std::vector<double> q{0.8, 0.2, 0.4, 0.6};
  const auto t = variational_decomposition(j, q);
  EXPECT_NEAR(t.log_ratio, 0.0, 1e-15);
  EXPECT_NEAR(t.total, brute_mi(j), 1e-15);
  EXPECT_NEAR(t.entropy_s, -(0.6 * std::log(0.6) + 0.4 * std::log(0.4)), 1e-15);
}

TEST(Decomposition, UniformQOnIndependentTable) {
  const DiscreteJoint j{1, 4, {0.1, 0.2, 0.3, 0.4}};
  const std::vector<double> q(4, 0.25);
  const auto t = variational_decomposition(j, q);
  EXPECT_NEAR(t.log_lik, std::log(0.25), 1e-15);
  EXPECT_NEAR(t.total, 0.0, 1e-15);
}

TEST(Decomposition, HoldsForRandomTablesAndConditionals) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto j = random_joint(rng, 4, 6);
    const auto q = random_conditional(rng, j.A, j.B);
    const auto t = variational_decomposition(j, q);
    EXPECT_NEAR(t.total, mi_by_entropies(j), 1e-10);
    EXPECT_LE(t.log_lik, 1e-15);
  }
}

TEST(Decomposition, ZeroQWhereTheJointHasMassIsRejected) {
  const DiscreteJoint j{2, 2, {0.5, 0.0, 0.0, 0.5}};
  EXPECT_THROW(variational_decomposition(j, std::vector<double>{0.0, 1.0, 0.5, 0.5}), PreconditionError);
  // zero q on a zero-mass cell is fine
  EXPECT_NO_THROW(variational_decomposition(j, std::vector<double>{1.0, 0.0, 0.5, 0.5}));
  EXPECT_THROW(variational_decomposition(j, std::vector<double>{0.6, 0.6, 0.5, 0.5}), PreconditionError);
  EXPECT_THROW(variational_decomposition(j, std::vector<double>{1.0}), PreconditionError);
}

TEST(SubsetMonotonicity, ProjectionsNeverExceedTheJointAttribute) {
  // a = b1 xor b2: each attribute alone carries nothing, the pair everything
  DiscreteJoint3 t{2, 2, 2, std::vector<double>(8, 0.0)};
  for (std::size_t b1 = 0; b1 < 2; ++b1)
    for (std::size_t b2 = 0; b2 < 2; ++b2) t.p[((b1 ^ b2) * 2 + b1) * 2 + b2] = 0.25;
  const auto m = subset_mi_monotone(t);
  EXPECT_NEAR(m.first, 0.0, 1e-15);
  EXPECT_NEAR(m.second, 0.0, 1e-15);
  EXPECT_NEAR(m.joint, std::log(2.0), 1e-15);
  EXPECT_TRUE(m.monotone);
}

TEST(SubsetMonotonicity, CopyOfOneAttribute) {
  // a = b1, b2 independent noise: I(a; b1) = I(a; (b1, b2))
  DiscreteJoint3 t{2, 2, 3, std::vector<double>(12, 0.0)};
  for (std::size_t b1 = 0; b1 < 2; ++b1)
    for (std::size_t b2 = 0; b2 < 3; ++b2) t.p[(b1 * 2 + b1) * 3 + b2] = 0.5 / 3.0;
  const auto m = subset_mi_monotone(t);
  EXPECT_NEAR(m.first, m.joint, 1e-12);
  EXPECT_NEAR(m.second, 0.0, 1e-12);
}

TEST(SubsetMonotonicity, RandomSuitePasses) {
  const auto r = monotonicity_suite(7, 300);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.worst, 1e-12);
}

TEST(Suites, DecompositionAndIndependencePass) {
  const auto d = decomposition_suite(3);
  EXPECT_TRUE(d.passed) << d.worst;
  EXPECT_EQ(d.cases, 100u);
  const auto i = independence_suite(3);
  EXPECT_TRUE(i.passed) << i.worst;
}

TEST(EmpiricalJoint, EightSampleHandExample) {
  const std::vector<int> pred{0, 0, 1, 1, 1, 0, 1, 1}, group{0, 1, 0, 1, 1, 0, 1, 1};
  const auto j = empirical_joint(pred, group, 2, 2);
  // counts: (0,0)=2, (0,1)=1, (1,0)=1, (1,1)=4
  EXPECT_EQ(j.p, (std::vector<double>{0.25, 0.125, 0.125, 0.5}));
  const double expected = 0.25 * std::log(0.25 / (0.375 * 0.375)) + 0.125 * std::log(0.125 / (0.375 * 0.625)) * 2 +
                          0.5 * std::log(0.5 / (0.625 * 0.625));
  EXPECT_NEAR(brute_mi(j), expected, 1e-15);
}

TEST(EmpiricalJoint, IndependentLabelsGiveZero) {
  std::vector<int> pred, group;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b) {
      pred.push_back(a);
      group.push_back(b);
    }
  EXPECT_NEAR(brute_mi(empirical_joint(pred, group, 3, 4)), 0.0, 1e-15);
}

TEST(EmpiricalJoint, ErrorPaths) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(empirical_joint(a, b, 2, 2), PreconditionError);
  EXPECT_THROW(empirical_joint(std::vector<int>{}, std::vector<int>{}, 2, 2), PreconditionError);
  EXPECT_THROW(empirical_joint(std::vector<int>{2}, std::vector<int>{0}, 2, 2), PreconditionError);
}

TEST(JointIo, RoundTripIsExact) {
  std::mt19937_64 rng(4);
  const auto j = random_joint(rng, 4, 6);
  std::stringstream ss;
  write_joint(ss, j);
  const auto back = read_joint(ss);
  EXPECT_EQ(back.A, j.A);
  EXPECT_EQ(back.B, j.B);
  EXPECT_EQ(back.p, j.p);
}

TEST(JointIo, MalformedInputIsRejected) {
  std::istringstream missing("2 2\n0.5 0.5\n");
  EXPECT_THROW(read_joint(missing), PreconditionError);
  std::istringstream header("x");
  EXPECT_THROW(read_joint(header), PreconditionError);
  std::istringstream mass("1 2\n0.5 0.6\n");
  EXPECT_THROW(read_joint(mass), PreconditionError);
}
