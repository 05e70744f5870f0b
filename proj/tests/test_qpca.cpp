#include <gtest/gtest.h>

#include <random>

#include "qadv/qpca.hpp"

using namespace qadv;

namespace {

PcaModel spectrum_model(const std::vector<double>& sigmas) {
  const auto d = static_cast<Eigen::Index>(sigmas.size());
  Matrix x = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) x(i, i) = sigmas[static_cast<std::size_t>(i)];
  return fit_exact_pca(x);
}

Matrix decaying_gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng) * std::pow(0.8, static_cast<double>(j));
  return x;
}

}  // namespace

TEST(ThetaSearch, FourThreeTwoOne) {
  // eigenvalues 4, 3, 2, 1
  auto m = spectrum_model({2.0, std::sqrt(3.0), std::sqrt(2.0), 1.0});
  NoiseContext ctx(1);
  auto s = quantum_binary_search_theta(m, 0.5, 0.01, 0.1, ctx);
  EXPECT_GT(s.theta, std::sqrt(2.0));
  EXPECT_LT(s.theta, std::sqrt(3.0));
  EXPECT_EQ(s.selected, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(s.explained, 0.7, 1e-12);
  EXPECT_FALSE(s.within_tolerance);
  EXPECT_THROW(quantum_binary_search_theta(m, 0.5, 0.01, 0.1, ctx, SelectionMode::major, true), Error);
  auto loose = quantum_binary_search_theta(m, 0.5, 0.01, 0.4, ctx, SelectionMode::major, true);
  EXPECT_TRUE(loose.within_tolerance);
}

TEST(ThetaSearch, AlwaysReachesTarget) {
  auto m = fit_exact_pca(decaying_gaussian(200, 15, 2));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NoiseContext ctx(seed);
    for (double p : {0.3, 0.5, 0.7, 0.9}) {
      auto s = quantum_binary_search_theta(m, p, 0.5, 0.1, ctx);
      EXPECT_GE(s.explained, p - 1e-12);
      for (std::size_t i = 0; i < s.perturbed.size(); ++i) {
        bool in = std::find(s.selected.begin(), s.selected.end(), i) != s.selected.end();
        EXPECT_EQ(in, s.perturbed[i] >= s.theta);
      }
    }
  }
}

TEST(Qpca, ZeroNoiseMatchesExact) {
  auto exact = fit_exact_pca(decaying_gaussian(300, 12, 3));
  NoiseContext ctx(4);
  auto req = QpcaRequest::noiseless(0.7);
  req.p_min = 0.2;
  auto r = fit_qpca(exact, req, ctx, true);
  auto classical = select_for_variance(exact, 0.7, SelectionMode::major);
  ASSERT_EQ(r.major.size(), classical.count());
  for (std::size_t j = 0; j < r.major.size(); ++j) {
    auto jj = static_cast<Eigen::Index>(j);
    auto src = static_cast<Eigen::Index>(classical.indices[j]);
    EXPECT_LE((r.major.components.col(jj) - exact.components.col(src)).norm(), 1e-8);
    EXPECT_NEAR(r.major.eigenvalues(jj), exact.eigenvalues(src), 1e-8 * exact.eigenvalues(0));
  }
  auto minor = select_for_variance(exact, 0.2, SelectionMode::minor);
  ASSERT_TRUE(r.minor.has_value());
  EXPECT_EQ(r.minor->size(), minor.count());
}

TEST(Qpca, EigenvalueErrorFromSingularValueError) {
  auto m = spectrum_model({3, 1});
  QpcaRequest req;
  req.epsilon = 0.5;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    NoiseContext ctx(seed);
    auto top = extract_top_k(m, 2.0, req, ctx);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_GE(top.eigenvalues(0), 6.0);
    EXPECT_LE(top.eigenvalues(0), 12.0);
  }
}

TEST(Qpca, CertificateIsSound) {
  auto exact = fit_exact_pca(decaying_gaussian(300, 20, 5));
  QpcaRequest req;
  req.epsilon = 0.3;
  req.delta = 0.2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    NoiseContext ctx(seed);
    auto r = fit_qpca(exact, req, ctx);
    const auto& c = *r.major.certificate;
    for (std::size_t j = 0; j < r.major.size(); ++j) {
      EXPECT_FALSE(c.failed[j]);
      EXPECT_LT(std::abs(c.sigma_errors[j]), req.epsilon);
      EXPECT_LE(c.vector_errors[j], req.delta + 1e-12);
      EXPECT_NEAR(r.major.component(j).norm(), 1.0, 1e-12);
    }
  }
}

TEST(Qpca, FailureRateMarksCertificate) {
  auto exact = fit_exact_pca(decaying_gaussian(300, 20, 5));
  QpcaRequest req;
  req.gamma = 0.5;
  std::size_t failed = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NoiseContext ctx(seed);
    auto r = fit_qpca(exact, req, ctx);
    for (bool f : r.major.certificate->failed) failed += f, ++total;
  }
  EXPECT_GT(failed, 0u);
  EXPECT_LT(failed, total);
}

TEST(Qpca, LeastQBelowThreshold) {
  auto m = spectrum_model({4, 3, 2, 1});
  NoiseContext ctx(6);
  QpcaRequest req;
  req.epsilon = 0.1;
  auto low = extract_least_q(m, 1.5, req, ctx);
  ASSERT_EQ(low.size(), 1u);
  EXPECT_NEAR(low.singular_values(0), 1.0, 0.1);
  EXPECT_EQ(low.source_index[0], 3u);
}

TEST(Qpca, TighterEtaNeverWorse) {
  auto exact = fit_exact_pca(decaying_gaussian(400, 15, 7));
  double prev = 1.0;
  for (double eta : {0.3, 0.1, 0.03, 0.01}) {
    NoiseContext ctx(7);
    auto s = quantum_binary_search_theta(exact, 0.7, 0.05, eta, ctx);
    double gap = std::abs(s.explained - 0.7);
    EXPECT_LE(gap, prev + 1e-12);
    prev = gap;
  }
}

TEST(Qpca, ComponentCountStableAcrossSeeds) {
  auto exact = fit_exact_pca(decaying_gaussian(500, 20, 8));
  auto k = select_for_variance(exact, 0.7, SelectionMode::major).count();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NoiseContext ctx(seed);
    QpcaRequest req;
    req.epsilon = req.epsilon_theta = 0.05 * exact.singular_values(0);
    auto r = fit_qpca(exact, req, ctx);
    EXPECT_LE(std::abs(static_cast<long>(r.major.size()) - static_cast<long>(k)), 1) << "seed " << seed;
  }
}

TEST(Qpca, ValidateRejectsBadKnobs) {
  QpcaRequest r;
  r.eta = 0.8;
  EXPECT_THROW(r.validate(), Error);
  r = QpcaRequest{};
  r.delta = 0.0;
  EXPECT_THROW(r.validate(), Error);
  r = QpcaRequest{};
  r.gamma = 1.0;
  EXPECT_THROW(r.validate(), Error);
}

TEST(Qpca, TomographyVectorNoise) {
  auto exact = fit_exact_pca(decaying_gaussian(200, 10, 9));
  QpcaRequest req;
  req.delta = 0.2;
  req.vector_noise = VectorNoise::tomography;
  NoiseContext ctx(9);
  auto r = fit_qpca(exact, req, ctx);
  for (std::size_t j = 0; j < r.major.size(); ++j) EXPECT_NEAR(r.major.component(j).norm(), 1.0, 1e-12);
}
