#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "aevb/errors.hpp"
#include "aevb/model_gmvae.hpp"
#include "test_util.hpp"

using namespace aevb;
using namespace aevb::testing;

namespace {

constexpr double kPi = std::numbers::pi;

GmvaeModel tiny(std::uint64_t seed, std::size_t classes = 3) {
  SeededRng init(seed);
  GmvaeModel m(GmvaeConfig{6, 2, classes, 8, 0.5}, init);
  // Sharper classifier than Glorot gives, so q(y|x) is far from uniform.
  for (double& v : m.classifier.layers.back().w.mutable_data()) v *= 3.0;
  return m;
}

Tensor binary_row(std::uint64_t seed, std::size_t d = 6) {
  SeededRng rng(seed);
  Tensor x({1, d});
  for (double& v : x.mutable_data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return x;
}

Tensor rows(const Tensor& x, std::size_t n) { return x * Tensor({n, x.dim(1)}, 1.0); }

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.numel());
}

double log_sigmoid(double a) { return a >= 0 ? -std::log1p(std::exp(-a)) : a - std::log1p(std::exp(a)); }

// Per-example ELBO with y summed out exactly and z integrated per class on a grid.
double quadrature_elbo(const GmvaeModel& m, const Tensor& x) {
  const std::size_t c = m.config.classes;
  BatchRng unused(0);
  Tensor logits = m.logits(x, unused);
  double mx = -INFINITY;
  for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, logits[k]);
  double z_norm = 0.0;
  for (std::size_t k = 0; k < c; ++k) z_norm += std::exp(logits[k] - mx);
  double total = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double pk = std::exp(logits[k] - mx) / z_norm;
    total -= pk * std::log(pk * static_cast<double>(c));
    Tensor y = one_hot({k}, c);
    DiagGaussian q = m.encode(m.encoder_x_part(x), y, unused);
    DiagGaussian p = m.prior(y);
    const double qm0 = q.mu[0], qm1 = q.mu[1], qs0 = q.sigma[0], qs1 = q.sigma[1];
    const double pm0 = p.mu[0], pm1 = p.mu[1], ps0 = p.sigma[0], ps1 = p.sigma[1];
    auto f = [&](double a, double b) {
      const double lq = -0.5 * (std::pow((a - qm0) / qs0, 2) + std::pow((b - qm1) / qs1, 2)) - std::log(qs0 * qs1) -
                        std::log(2 * kPi);
      const double lp = -0.5 * (std::pow((a - pm0) / ps0, 2) + std::pow((b - pm1) / ps1, 2)) - std::log(ps0 * ps1) -
                        std::log(2 * kPi);
      Tensor out = m.decoder_logits(Tensor::matrix({{a, b}}), unused);
      double lik = 0.0;
      for (std::size_t j = 0; j < x.numel(); ++j) lik += x[j] * log_sigmoid(out[j]) + (1 - x[j]) * log_sigmoid(-out[j]);
      return std::exp(lq) * (lik + lp - lq);
    };
    total += pk * simpson2d(f, qm0 - 9 * qs0, qm0 + 9 * qs0, qm1 - 9 * qs1, qm1 + 9 * qs1, 160);
  }
  return total;
}

double sum_abs(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s;
}

}  // namespace

TEST(GmvaeMarginalized, SingleClassIsVaeStyleBracket) {
  GmvaeModel m = tiny(1, 1);
  SeededRng rng(2);
  Tensor x = random_tensor({4, 6}, rng, 0, 1);
  for (double& v : x.mutable_data()) v = v < 0.5 ? 0.0 : 1.0;
  BatchRng a = BatchRng::per_example(SeededRng(3), {0, 1, 2, 3});
  BatchRng b = BatchRng::per_example(SeededRng(3), {0, 1, 2, 3});
  Tensor est = gmvae_elbo_marginalized(m, x, a);
  Tensor bracket = gmvae_bracket(m, x, Tensor({4, 1}, 1.0), b);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(est[i], bracket[i], 1e-12);
}

TEST(GmvaeMarginalized, ExpectationMatchesPerClassQuadrature) {
  for (std::uint64_t seed : {4, 5}) {
    GmvaeModel m = tiny(seed);
    Tensor x = binary_row(10 + seed);
    const double oracle = quadrature_elbo(m, x);
    BatchRng rng(6);
    auto s = mean_se(values(gmvae_elbo_marginalized(m, rows(x, 100000), rng)));
    EXPECT_LT(std::abs(s.mean - oracle), 4 * s.se) << s.mean << " vs " << oracle;
  }
}

TEST(GmvaeMarginalized, RaoBlackwellizesSampledY) {
  GmvaeModel m = tiny(7);
  Tensor x = rows(binary_row(8), 10000);
  BatchRng r1(9), r2(10);
  auto marg = mean_se(values(gmvae_elbo_marginalized(m, x, r1)));
  auto sampled = mean_se(values(gmvae_elbo_sampled_y(m, x, r2)));
  EXPECT_LT(std::abs(marg.mean - sampled.mean), 4 * std::hypot(marg.se, sampled.se));
  EXPECT_LE(marg.var, sampled.var);
}

TEST(GmvaeMarginalized, NegativeCategoricalKlIsEntropyMinusLogC) {
  SeededRng rng(11);
  for (std::size_t c : {2, 3, 10}) {
    OneHotCategorical q(random_normal({5, c}, rng, 2.0));
    Tensor kl = kl_categorical(q, OneHotCategorical::uniform(c));
    Tensor h = entropy_categorical(q);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(-kl[i], h[i] - std::log(static_cast<double>(c)), 1e-12);
  }
}

TEST(GmvaeGumbel, LogprobFiniteAcrossTemperatures) {
  GmvaeModel m = tiny(12);
  SeededRng rng(13);
  Tensor x = random_tensor({1000, 6}, rng, 0, 1);
  for (double& v : x.mutable_data()) v = v < 0.5 ? 0.0 : 1.0;
  for (double tau : {0.1, 0.5, 1.0}) {
    BatchRng noise(14);
    const Tensor est = gmvae_elbo_gumbel_logprob(m, x, tau, noise);
    for (double v : est.data()) ASSERT_TRUE(std::isfinite(v)) << tau;
  }
}

TEST(GmvaeGumbel, LogprobGradientReachesClassifier) {
  GmvaeModel m = tiny(15);
  Tensor x = rows(binary_row(16), 8);
  Tape tape;
  Tape::Scope scope(tape);
  Linear& head = m.classifier.layers.back();
  tape.watch(head.w);
  tape.watch(head.b);
  BatchRng noise(17);
  Gradients g = tape.backward(sum(gmvae_elbo_gumbel_logprob(m, x, 0.5, noise)));
  EXPECT_GT(sum_abs(g.of(head.w)) + sum_abs(g.of(head.b)), 1e-6);
}

TEST(GmvaeGumbel, UniformClassifierHasNoCategoricalKl) {
  GmvaeModel m = tiny(18);
  Linear& head = m.classifier.layers.back();
  head.w = Tensor(head.w.shape());
  head.b = Tensor(head.b.shape());
  Tensor x = rows(binary_row(19), 5);
  BatchRng unused(0);
  Tensor kl = kl_categorical(OneHotCategorical(m.logits(x, unused)), OneHotCategorical::uniform(3));
  for (double v : kl.data()) EXPECT_EQ(v, 0.0);
}

TEST(GmvaeGumbel, EstimatorsCoincideAtSingleClass) {
  GmvaeModel m = tiny(20, 1);
  SeededRng rng(21);
  Tensor x = random_tensor({6, 6}, rng, 0, 1);
  for (double& v : x.mutable_data()) v = v < 0.5 ? 0.0 : 1.0;
  std::vector<std::uint64_t> ids(6);
  std::iota(ids.begin(), ids.end(), 0);
  BatchRng a = BatchRng::per_example(SeededRng(22), ids);
  BatchRng b = BatchRng::per_example(SeededRng(22), ids);
  Tensor marg = gmvae_elbo_marginalized(m, x, a);
  Tensor kl = gmvae_elbo_gumbel_kl(m, x, 0.5, b);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(marg[i], kl[i], 1e-12);

  // The full log ratio replaces the Gaussian KL by a one-sample estimate, so
  // it agrees in expectation only.
  Tensor big = rows(binary_row(23), 100000);
  BatchRng r1(24), r2(25);
  auto m1 = mean_se(values(gmvae_elbo_marginalized(m, big, r1)));
  auto m2 = mean_se(values(gmvae_elbo_gumbel_logprob(m, big, 0.5, r2)));
  EXPECT_LT(std::abs(m1.mean - m2.mean), 4 * std::hypot(m1.se, m2.se));
}

// Bias of the relaxed estimators against the exact marginalized ELBO. The
// analytic-KL variant's gap closes as tau falls. The full log-ratio variant
// keeps a tau-independent Concrete-vs-Concrete term, so its gap settles to
// a nonzero limit instead; there only the increments shrink.
TEST(GmvaeGumbel, BiasAgainstMarginalizedAcrossTau) {
  for (std::uint64_t seed : {1, 2}) {
    GmvaeModel m = tiny(seed);
    Tensor x = rows(binary_row(100 + seed), 100000);
    BatchRng r0(26);
    const double exact = mean_of(gmvae_elbo_marginalized(m, x, r0));
    std::vector<double> kl_gap, lp_gap;
    for (double tau : {1.0, 0.5, 0.1, 0.05}) {
      BatchRng a(27), b(27);
      kl_gap.push_back(std::abs(mean_of(gmvae_elbo_gumbel_kl(m, x, tau, a)) - exact));
      lp_gap.push_back(mean_of(gmvae_elbo_gumbel_logprob(m, x, tau, b)) - exact);
      std::printf("seed %llu tau %.2f kl_gap %.4f logprob_gap %.4f\n", static_cast<unsigned long long>(seed), tau,
                  kl_gap.back(), lp_gap.back());
    }
    EXPECT_GT(kl_gap[0], kl_gap[1]);
    EXPECT_GT(kl_gap[1], kl_gap[2]);
    EXPECT_GT(kl_gap[2], kl_gap[3]);
    EXPECT_LT(std::abs(lp_gap[3] - lp_gap[2]), std::abs(lp_gap[1] - lp_gap[0]));
  }
}

TEST(GmvaeEstimators, GradientsMatchFiniteDifferences) {
  GmvaeModel m = tiny(28);
  SeededRng rng(29);
  Tensor x = random_tensor({3, 6}, rng, 0, 1);
  for (double& v : x.mutable_data()) v = v < 0.5 ? 0.0 : 1.0;
  auto frozen = [] { return BatchRng::per_example(SeededRng(30), {0, 1, 2}); };
  EXPECT_LT(model_gradient_error(m, [&] {
              BatchRng r = frozen();
              return sum(gmvae_elbo_marginalized(m, x, r));
            }),
            1e-4);
  EXPECT_LT(model_gradient_error(m, [&] {
              BatchRng r = frozen();
              return sum(gmvae_elbo_gumbel_kl(m, x, 0.5, r));
            }),
            1e-4);
  EXPECT_LT(model_gradient_error(m, [&] {
              BatchRng r = frozen();
              return sum(gmvae_elbo_gumbel_logprob(m, x, 0.5, r));
            }),
            1e-4);
}

TEST(GmvaeCluster, ArgmaxWithLowestIndexTies) {
  GmvaeModel m = tiny(31);
  Linear& head = m.classifier.layers.back();
  head.w = Tensor(head.w.shape());
  head.b = Tensor::vector({3, 1, 1});
  Tensor x = rows(binary_row(32), 2);
  EXPECT_EQ(gmvae_cluster(m, x), (std::vector<std::size_t>{0, 0}));
  head.b = Tensor::vector({1, 3, 3});
  EXPECT_EQ(gmvae_cluster(m, x)[0], 1u);
  head.b = Tensor::vector({2, 2, 2});
  EXPECT_EQ(gmvae_cluster(m, x)[0], 0u);

  GmvaeModel fresh = tiny(33);
  SeededRng rng(34);
  Tensor xs = random_tensor({20, 6}, rng, 0, 1);
  EXPECT_EQ(gmvae_cluster(fresh, xs), gmvae_cluster(fresh, xs));
}

TEST(ClusteringAccuracy, Examples) {
  EXPECT_DOUBLE_EQ(clustering_accuracy({{5, 0, 0}, {0, 7, 0}, {0, 0, 2}}), 1.0);
  EXPECT_DOUBLE_EQ(clustering_accuracy({{4, 4, 4}, {4, 4, 4}, {4, 4, 4}}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(clustering_accuracy({{0, 3, 0}, {0, 0, 9}, {6, 0, 0}}), 1.0);
  EXPECT_DOUBLE_EQ(clustering_accuracy({{3, 1}, {2, 4}}), 7.0 / 10.0);
  EXPECT_THROW(clustering_accuracy({}), DomainError);
}

TEST(ClusteringAccuracy, ContingencyCountsAndPadding) {
  std::vector<std::size_t> clusters{0, 0, 1, 1, 1};
  std::vector<int> labels{2, 2, 0, 1, 0};
  ContingencyTable t = contingency_table(clusters, labels, 2, 3);
  double total = 0.0;
  for (const auto& row : t)
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
  EXPECT_EQ(total, 5.0);
  EXPECT_EQ(t[0][2], 2.0);
  EXPECT_EQ(t[1][0], 2.0);
  EXPECT_DOUBLE_EQ(clustering_accuracy(t), 4.0 / 5.0);
}

TEST(Assignment, MatchesBruteForce) {
  SeededRng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    CostMatrix m{n, std::vector<double>(n * n)};
    for (double& v : m.cost) v = static_cast<double>(rng.below(20));
    auto cost_of = [&](const std::vector<std::size_t>& p) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += m.at(r, p[r]);
      return s;
    };
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do best = std::min(best, cost_of(perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    std::vector<std::size_t> got = min_cost_assignment(m);
    std::vector<std::size_t> sorted = got;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < n; ++k) ASSERT_EQ(sorted[k], k);
    EXPECT_EQ(cost_of(got), best);
  }
}

TEST(GmvaeGenerate, BinaryDeterministicAndClassDependent) {
  GmvaeModel m = tiny(36);
  Tensor y = one_hot({0, 0, 1, 1, 2, 2}, 3);
  BatchRng a(37), b(37);
  GmvaeGeneration g1 = gmvae_generate(m, y, a), g2 = gmvae_generate(m, y, b);
  EXPECT_TRUE(g1.samples.same_values(g2.samples));
  for (double v : g1.samples.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_THROW(gmvae_generate(m, Tensor({2, 3}, 0.5), a), DomainError);

  // Separated class means give distinguishable mean images.
  m.prior_mu = Tensor::matrix({{-6, -6}, {6, 6}, {6, -6}});
  const std::size_t n = 2000;
  double l1 = 0.0;
  Tensor means[2];
  for (std::size_t k = 0; k < 2; ++k) {
    BatchRng r(38);
    std::vector<std::size_t> idx(n, k);
    Tensor s = gmvae_generate(m, one_hot(idx, 3), r).samples;
    means[k] = sum(s, 0) * (1.0 / static_cast<double>(n));
  }
  for (std::size_t j = 0; j < 6; ++j) l1 += std::abs(means[0][j] - means[1][j]);
  std::printf("mean-image L1 between classes: %.4f\n", l1);
  EXPECT_GT(l1, 0.1);
}
