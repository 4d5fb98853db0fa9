#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "aevb/distributions.hpp"
#include "aevb/errors.hpp"
#include "test_util.hpp"

using namespace aevb;
using aevb::testing::gradient_error;
using aevb::testing::mean_se;
using aevb::testing::random_normal;
using aevb::testing::random_tensor;
using aevb::testing::simpson;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Independent density of N(mu, Sigma) via an explicit inverse.
double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd d = x - mu;
  const double quad = d.dot(cov.inverse() * d);
  return -0.5 * quad - 0.5 * std::log(cov.determinant()) - 0.5 * x.size() * std::log(2 * kPi);
}

Tensor positive(Shape s, SeededRng& rng) { return random_tensor(std::move(s), rng, 0.3, 2.0); }

}  // namespace

TEST(LogProb, StandardNormalAtOrigin) {
  EXPECT_NEAR(DiagGaussian::standard(2).log_prob(Tensor(Shape{2})).item(), -std::log(2 * kPi), 1e-12);
}

TEST(LogProb, UniformCategorical) {
  OneHotCategorical u = OneHotCategorical::uniform(10);
  for (std::size_t k = 0; k < 10; ++k)
    EXPECT_NEAR(u.log_prob(one_hot({k}, 10))[0], -std::log(10.0), 1e-12);
}

TEST(LogProb, ContinuousBernoulliAtHalf) {
  ContinuousBernoulliVec cb(Tensor::vector({0.5}));
  // Uniform density: the log 2 normalizer cancels 0.5 log 0.5 + 0.5 log 0.5.
  EXPECT_NEAR(cb.log_prob(Tensor::vector({0.5})).item(), 0.0, 1e-12);
  EXPECT_NEAR(cb_log_normalizer(Tensor::vector({0.5})).item(), std::log(2.0), 1e-12);
}

TEST(LogProb, FullGaussianMatchesExplicitInverse) {
  SeededRng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor u = random_normal({3, 3}, rng);
    for (std::size_t j = 0; j < 3; ++j) u.mutable_data()[j * 4] = 0.5 + std::abs(u.at(j, j));
    FullGaussianCholesky q(random_normal({4, 3}, rng), u);
    Tensor x = random_normal({4, 3}, rng);
    Eigen::Matrix3d um = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) um(i, j) = u.at(i, j);
    const Eigen::MatrixXd cov = um.transpose() * um;
    Tensor lp = q.log_prob(x);
    for (std::size_t r = 0; r < 4; ++r) {
      Eigen::Vector3d xv(x.at(r, 0), x.at(r, 1), x.at(r, 2));
      Eigen::Vector3d mv(q.mu.at(r, 0), q.mu.at(r, 1), q.mu.at(r, 2));
      EXPECT_NEAR(lp[r], gaussian_logpdf(xv, mv, cov), 1e-10);
    }
  }
}

TEST(LogProb, SupportViolationsNameTheCoordinate) {
  ContinuousBernoulliVec cb(Tensor::vector({0.3, 0.4}));
  try {
    cb.log_prob(Tensor::vector({0.5, 1.5}));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
  EXPECT_THROW(BernoulliVec(Tensor::vector({0.5})).log_prob(Tensor::vector({0.5})), DomainError);
  EXPECT_THROW(OneHotCategorical::uniform(3).log_prob(Tensor::vector({1, 1, 0})), DomainError);
  EXPECT_THROW(RelaxedOneHotCategorical(Tensor(Shape{2}), 0.5).log_prob(Tensor::vector({1.0, 0.0})),
               DomainError);
  EXPECT_THROW(DiagGaussian(Tensor::vector({0.0}), Tensor::vector({0.0})), DomainError);
  EXPECT_THROW(ContinuousBernoulliVec(Tensor::vector({1.0})), DomainError);
  EXPECT_THROW(RelaxedOneHotCategorical(Tensor(Shape{2}), 0.0), DomainError);
}

TEST(LogProb, GradientsMatchFiniteDifferences) {
  SeededRng rng(8);
  Tensor mu = random_normal({3, 4}, rng), sigma = positive({3, 4}, rng), x = random_normal({3, 4}, rng);
  EXPECT_LT(gradient_error([](auto& p) { return sum(DiagGaussian(p[0], p[1]).log_prob(p[2])); },
                           {mu, sigma, x}),
            1e-5);
  Tensor lam = random_tensor({3, 4}, rng, 0.05, 0.95), xs = random_tensor({3, 4}, rng, 0.0, 1.0);
  EXPECT_LT(gradient_error([](auto& p) { return sum(ContinuousBernoulliVec(p[0]).log_prob(p[1])); },
                           {lam, xs}),
            1e-5);
  Tensor logits = random_normal({3, 4}, rng);
  Tensor y = one_hot({0, 3, 1}, 4);
  EXPECT_LT(gradient_error([&](auto& p) { return sum(OneHotCategorical(p[0]).log_prob(y)); }, {logits}),
            1e-5);
  BatchRng bit_rng(3);
  Tensor bits = BernoulliVec(Tensor({3, 4}, 0.5)).sample(bit_rng);
  EXPECT_LT(gradient_error([&](auto& p) { return sum(BernoulliVec::from_logits(p[0]).log_prob(bits)); },
                           {logits}),
            1e-5);
  Tensor u = random_normal({3, 3}, rng);
  for (std::size_t j = 0; j < 3; ++j) u.mutable_data()[j * 4] = 1.0 + std::abs(u.at(j, j));
  EXPECT_LT(gradient_error([](auto& p) { return sum(FullGaussianCholesky(p[0], p[1]).log_prob(p[2])); },
                           {random_normal({2, 3}, rng), u, random_normal({2, 3}, rng)}),
            1e-5);
  Tensor yr = softmax(random_normal({3, 4}, rng));
  EXPECT_LT(gradient_error([](auto& p) { return sum(RelaxedOneHotCategorical(p[0], 0.7).log_prob_from_log(log(p[1]))); },
                           {logits, yr}),
            1e-5);
}

TEST(Rsample, DegenerateGaussianReturnsMean) {
  BatchRng rng(1);
  Tensor m = Tensor::vector({1.5, -2.0});
  Tensor z = DiagGaussian(m, Tensor({2}, 1e-300)).rsample(rng);
  EXPECT_NEAR(z[0], 1.5, 1e-12);
  EXPECT_NEAR(z[1], -2.0, 1e-12);
}

TEST(Rsample, IdentityCholeskyIsStandardNormal) {
  BatchRng rng(2);
  const std::size_t n = 100000;
  FullGaussianCholesky q(Tensor({n, 2}), Tensor::matrix({{1, 0}, {0, 1}}));
  Tensor z = q.rsample(rng);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) col[r] = z.at(r, c);
    auto s = mean_se(col);
    EXPECT_LT(std::abs(s.mean), 4 * s.se);
    EXPECT_NEAR(s.var, 1.0, 0.02);
  }
}

TEST(Rsample, RelaxedSamplesOnOpenSimplex) {
  BatchRng rng(3);
  RelaxedOneHotCategorical d(Tensor({1000, 3}), 0.5);
  Tensor y = d.rsample(rng);
  for (std::size_t r = 0; r < 1000; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_GT(y.at(r, c), 0.0);
      total += y.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Rsample, GradientOfExpectationMatchesFiniteDifferences) {
  // E[sum(tanh(z))] over 10^4 fixed-noise draws, differentiated w.r.t. the
  // location and scale parameters.
  SeededRng init(6);
  const std::size_t n = 10000;
  Tensor mu = random_normal({2}, init), sigma = positive({2}, init);
  auto diag = [&](const std::vector<Tensor>& p) {
    BatchRng rng(77);
    Tensor mus = p[0] * Tensor({n, 2}, 1.0);
    Tensor sig = p[1] * Tensor({n, 2}, 1.0);
    return mean(tanh(DiagGaussian(mus, sig).rsample(rng))) * 2.0;
  };
  EXPECT_LT(gradient_error(diag, {mu, sigma}, 1e-5), 1e-4);
  Tensor u = Tensor::matrix({{1.2, 0.3}, {0.0, 0.8}});
  auto full = [&](const std::vector<Tensor>& p) {
    BatchRng rng(78);
    Tensor mus = p[0] * Tensor({n, 2}, 1.0);
    return mean(tanh(FullGaussianCholesky(mus, p[1]).rsample(rng))) * 2.0;
  };
  EXPECT_LT(gradient_error(full, {mu, u}, 1e-5), 1e-4);
}

TEST(Sample, BernoulliCertain) {
  BatchRng rng(1);
  Tensor s = BernoulliVec(Tensor({50, 4}, 1.0)).sample(rng);
  for (double v : s.data()) EXPECT_EQ(v, 1.0);
}

TEST(Sample, DominantLogit) {
  BatchRng rng(2);
  Tensor s = OneHotCategorical(Tensor::matrix({{1e6, 0, 0}}) * Tensor({1000, 3}, 1.0)).sample(rng);
  for (std::size_t r = 0; r < 1000; ++r) EXPECT_EQ(s.at(r, 0), 1.0);
}

TEST(Sample, ContinuousBernoulliMean) {
  // Oracle: the mean by quadrature of x * density.
  const double lam = 0.9;
  const double z = simpson([&](double x) { return std::pow(lam, x) * std::pow(1 - lam, 1 - x); }, 0, 1, 10000);
  const double m = simpson([&](double x) { return x * std::pow(lam, x) * std::pow(1 - lam, 1 - x); }, 0, 1, 10000) / z;
  EXPECT_NEAR(cb_mean(lam), m, 1e-10);
  EXPECT_NEAR(cb_mean(0.5), 0.5, 1e-15);
  EXPECT_NEAR(cb_mean(0.50005), 0.5 + 0.00005 / 3.0, 1e-10);

  BatchRng rng(3);
  Tensor s = ContinuousBernoulliVec(Tensor({100000, 1}, lam)).sample(rng);
  auto st = mean_se(to_vec(s));
  EXPECT_LT(std::abs(st.mean - m), 4 * st.se);
  for (double v : s.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Sample, GumbelMaxFrequencies) {
  const std::size_t n = 100000;
  Tensor logits = Tensor::matrix({{0.5, -1.0, 1.2, 0.0}});
  Tensor p = softmax(logits);
  for (double tau : {0.0, 0.1, 0.5, 1.0}) {
    BatchRng rng(10);
    Tensor g = standard_gumbel({n, 4}, rng);
    Tensor wide = logits * Tensor({n, 4}, 1.0);
    std::vector<std::size_t> idx = tau == 0.0
        ? argmax_rows(OneHotCategorical(wide).sample_given(g))
        : argmax_rows(RelaxedOneHotCategorical(wide, tau).rsample_log_given(g));
    EXPECT_EQ(idx, argmax_rows(wide + g));
    std::vector<double> freq(4);
    for (auto i : idx) freq[i] += 1.0 / n;
    for (std::size_t c = 0; c < 4; ++c) EXPECT_LT(std::abs(freq[c] - p[c]), 0.01) << "tau " << tau;
  }
}

TEST(RelaxedDensity, IntegratesToOneAndMatchesArgmaxMass) {
  // Two classes: the density lives on y1 in (0, 1).
  for (double tau : {0.3, 0.7, 1.5}) {
    RelaxedOneHotCategorical d(Tensor::vector({0.8, -0.4}), tau);
    // Substitute y1 = sigmoid(t): dy1 = y1 y2 dt, with logs kept exact in the tails.
    auto f = [&](double t) {
      const double l1 = -std::log1p(std::exp(-t)), l2 = -std::log1p(std::exp(t));
      return std::exp(d.log_prob_from_log(Tensor::vector({l1, l2})).item() + l1 + l2);
    };
    EXPECT_NEAR(simpson(f, -60, 60, 20000), 1.0, 1e-6) << tau;
    const double mass = simpson(f, 0, 60, 20000);
    EXPECT_NEAR(mass, softmax(Tensor::vector({0.8, -0.4}))[0], 1e-6) << tau;
  }
}

TEST(KlDiag, Examples) {
  SeededRng init(1);
  DiagGaussian p(random_normal({3}, init), Tensor({3}, 0.7));
  EXPECT_LT(std::abs(kl_diag_gaussian(p, p).item()), 1e-12);
  DiagGaussian q(Tensor::vector({1, 0}), Tensor({2}, 1.0));
  EXPECT_NEAR(kl_diag_gaussian(q, DiagGaussian::standard(2)).item(), 0.5, 1e-15);
  EXPECT_THROW(kl_diag_gaussian(q, DiagGaussian::standard(3)), ShapeError);
}

TEST(KlDiag, MatchesMonteCarlo) {
  SeededRng init(21);
  const std::size_t n = 100000;
  int misses = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor mq = random_normal({3}, init), sq = positive({3}, init);
    Tensor mp = random_normal({3}, init), sp = positive({3}, init);
    DiagGaussian q(mq, sq), p(mp, sp);
    const double kl = kl_diag_gaussian(q, p).item();
    EXPECT_GE(kl, 0.0);
    BatchRng rng(static_cast<std::uint64_t>(trial));
    Tensor ones({n, 3}, 1.0);
    DiagGaussian qb(mq * ones, sq * ones);
    Tensor z = qb.rsample(rng);
    auto s = mean_se(to_vec(qb.log_prob(z) - DiagGaussian(mp * ones, sp * ones).log_prob(z)));
    if (std::abs(s.mean - kl) > 4 * s.se) ++misses;
  }
  EXPECT_EQ(misses, 0);
}

TEST(KlFull, Examples) {
  FullGaussianCholesky std2(Tensor({2}), Tensor::matrix({{1, 0}, {0, 1}}));
  EXPECT_LT(std::abs(kl_full_gaussian_vs_standard(std2).item()), 1e-12);

  FullGaussianCholesky q(Tensor({2}), Tensor::matrix({{2, 0}, {0, 1}}));
  const double kl = kl_full_gaussian_vs_standard(q).item();
  EXPECT_NEAR(kl, 0.5 * (5 - 2 - std::log(4.0)), 1e-12);
  BatchRng rng(4);
  FullGaussianCholesky qb(Tensor({1000000, 2}), q.chol_upper);
  Tensor z = qb.rsample(rng);
  Tensor lq = qb.log_prob(z);
  Tensor lp = DiagGaussian(Tensor({2}), Tensor({2}, 1.0)).log_prob(z);
  auto s = mean_se(to_vec(lq - lp));
  EXPECT_LT(std::abs(s.mean - kl), 4 * s.se);

  SeededRng init(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor mu = random_normal({4, 3}, init), sd = positive({3}, init);
    Tensor u({3, 3});
    for (std::size_t j = 0; j < 3; ++j) u.mutable_data()[j * 4] = sd[j];
    Tensor a = kl_full_gaussian_vs_standard(FullGaussianCholesky(mu, u));
    Tensor b = kl_diag_gaussian(DiagGaussian(mu, sd * Tensor({4, 3}, 1.0)), DiagGaussian::standard(3));
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(a[r], b[r], 1e-12);
  }
}

TEST(KlFull, MatchesMonteCarlo) {
  SeededRng init(31);
  const std::size_t n = 100000;
  int misses = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor mu = random_normal({3}, init);
    Tensor u = random_normal({3, 3}, init, 0.5);
    for (std::size_t j = 0; j < 3; ++j) u.mutable_data()[j * 4] = 0.4 + std::abs(u.at(j, j));
    FullGaussianCholesky q(mu, u);
    const double kl = kl_full_gaussian_vs_standard(q).item();
    EXPECT_GE(kl, 0.0);
    FullGaussianCholesky qb(mu * Tensor({n, 3}, 1.0), u);
    BatchRng rng(100 + static_cast<std::uint64_t>(trial));
    Tensor z = qb.rsample(rng);
    auto s = mean_se(to_vec(qb.log_prob(z) - DiagGaussian::standard(3).log_prob(z)));
    if (std::abs(s.mean - kl) > 4 * s.se) ++misses;
  }
  EXPECT_EQ(misses, 0);
}

TEST(KlCategorical, Examples) {
  auto u = OneHotCategorical::uniform(4);
  EXPECT_LT(std::abs(kl_categorical(u, u).item()), 1e-12);
  auto point = OneHotCategorical::from_probs(Tensor::vector({1.0, 0.0}));
  EXPECT_NEAR(kl_categorical(point, OneHotCategorical::uniform(2)).item(), std::log(2.0), 1e-12);
  EXPECT_THROW(kl_categorical(OneHotCategorical::uniform(2), point), DomainError);
  EXPECT_THROW(kl_categorical(OneHotCategorical::uniform(2), u), ShapeError);

  SeededRng init(2);
  for (int trial = 0; trial < 20; ++trial) {
    OneHotCategorical q(random_normal({6}, init, 2.0));
    const double lhs = kl_categorical(q, OneHotCategorical::uniform(6)).item();
    EXPECT_NEAR(lhs, std::log(6.0) - entropy_categorical(q).item(), 1e-12);
  }
}

TEST(KlCategorical, MatchesMonteCarlo) {
  SeededRng init(41);
  const std::size_t n = 100000;
  int misses = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor lq = random_normal({5}, init), lp = random_normal({5}, init);
    OneHotCategorical q(lq), p(lp);
    const double kl = kl_categorical(q, p).item();
    EXPECT_GE(kl, 0.0);
    BatchRng rng(200 + static_cast<std::uint64_t>(trial));
    Tensor ones({n, 5}, 1.0);
    Tensor y = OneHotCategorical(lq * ones).sample(rng);
    auto s = mean_se(to_vec(OneHotCategorical(lq * ones).log_prob(y) - OneHotCategorical(lp * ones).log_prob(y)));
    if (std::abs(s.mean - kl) > 4 * s.se) ++misses;
  }
  EXPECT_EQ(misses, 0);
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy_categorical(OneHotCategorical::uniform(10)).item(), std::log(10.0), 1e-12);
  EXPECT_NEAR(entropy_categorical(OneHotCategorical(Tensor::vector({1e6, 0, 0}))).item(), 0.0, 1e-12);
  auto q = OneHotCategorical::from_probs(Tensor::vector({0.9, 0.1}));
  const double h = -0.9 * std::log(0.9) - 0.1 * std::log(0.1);
  EXPECT_NEAR(entropy_categorical(q).item(), h, 1e-12);
  EXPECT_NEAR(h, 0.325083, 1e-6);
  EXPECT_NEAR(kl_categorical(q, OneHotCategorical::uniform(2)).item(), std::log(2.0) - h, 1e-12);
}

TEST(CbNormalizer, Examples) {
  EXPECT_NEAR(cb_log_normalizer(0.5), std::log(2.0), 1e-15);
  EXPECT_LT(std::abs(cb_log_normalizer(0.5 + 1e-3) - std::log(2.0)), 1e-5);
  EXPECT_LT(std::abs(cb_log_normalizer(0.5 - 1e-3) - std::log(2.0)), 1e-5);
  EXPECT_THROW(cb_log_normalizer(0.0), DomainError);
  EXPECT_THROW(cb_log_normalizer(1.2), DomainError);
}

TEST(CbNormalizer, DensityIntegratesToOne) {
  for (double lam : {1e-6, 0.01, 0.2, 0.49, 0.495, 0.4999, 0.5, 0.5001, 0.505, 0.51, 0.7, 0.99, 1 - 1e-6}) {
    ContinuousBernoulliVec d(Tensor::vector({lam}));
    const double logc = cb_log_normalizer(lam);
    auto f = [&](double x) { return std::exp(x * std::log(lam) + (1 - x) * std::log1p(-lam) + logc); };
    EXPECT_NEAR(simpson(f, 0, 1, 10000), 1.0, 1e-6) << lam;
    EXPECT_NEAR(std::exp(d.log_prob(Tensor::vector({0.3})).item()), f(0.3), 1e-12);
  }
}

TEST(CbNormalizer, BranchesAgreeAtTheSeam) {
  // Just inside and just outside the Taylor radius.
  for (double d : {0.0099, 0.0101}) {
    const double lam = 0.5 + d;
    const double u = 1 - 2 * lam;
    EXPECT_NEAR(cb_log_normalizer(lam), std::log(2 * std::atanh(u) / u), 1e-9);
  }
}
