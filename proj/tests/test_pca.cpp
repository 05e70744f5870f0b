#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "qadv/pca.hpp"

using namespace qadv;

namespace {

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues sorted
// in decreasing order. Independent of Eigen's decompositions.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev;
  for (Eigen::Index i = 0; i < n; ++i) ev.push_back(a(i, i));
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng) * (1.0 + static_cast<double>(j));
  return x;
}

PcaModel diagonal_model(const std::vector<double>& lambdas) {
  const auto d = static_cast<Eigen::Index>(lambdas.size());
  PcaModel m;
  m.components = Matrix::Identity(d, d);
  m.eigenvalues.resize(d);
  m.singular_values.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    m.eigenvalues(i) = lambdas[static_cast<std::size_t>(i)];
    m.singular_values(i) = std::sqrt(lambdas[static_cast<std::size_t>(i)]);
  }
  m.total_variance = m.eigenvalues.sum();
  m.rank = static_cast<std::size_t>(d);
  for (Eigen::Index i = 0; i < d; ++i) m.source_index.push_back(static_cast<std::size_t>(i));
  return m;
}

}  // namespace

TEST(FitExact, SingleDirection) {
  Matrix x(2, 2);
  x << 1, 0, -1, 0;
  auto m = fit_exact_pca(x);
  EXPECT_NEAR(m.eigenvalues(0), 2.0, 1e-12);
  EXPECT_NEAR(m.eigenvalues(1), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(m.components(0, 0)), 1.0, 1e-12);
  EXPECT_EQ(m.rank, 1u);
  EXPECT_TRUE(m.exact());
}

TEST(FitExact, FullReconstruction) {
  Matrix x = random_matrix(20, 5, 1);
  auto m = fit_exact_pca(x);
  Matrix rec = x * m.components * m.components.transpose();
  EXPECT_LE((rec - x).norm(), 1e-8);
}

TEST(FitExact, IntegerMatrixMatchesJacobiOracle) {
  Matrix x(6, 4);
  x << 1, 2, 0, -1, 3, 1, 4, 2, -2, 0, 1, 5, 4, -3, 2, 0, 0, 1, -1, 3, 2, 2, 2, -2;
  auto m = fit_exact_pca(x);
  auto oracle = jacobi_eigenvalues(x.transpose() * x);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(m.eigenvalues(static_cast<Eigen::Index>(i)), oracle[i], 1e-9 * oracle[0]);
}

TEST(FitExact, OracleEquivalenceUpTo50x20) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Matrix x = random_matrix(50, 20, seed + 10);
    auto m = fit_exact_pca(x);
    Matrix gram = x.transpose() * x;
    auto oracle = jacobi_eigenvalues(gram);
    for (std::size_t i = 0; i < oracle.size(); ++i)
      EXPECT_NEAR(m.eigenvalues(static_cast<Eigen::Index>(i)), oracle[i], 1e-6 * oracle[i] + 1e-9);
    // Eigen-pair residual and orthonormality.
    for (Eigen::Index i = 0; i < 20; ++i) {
      Vector e = m.components.col(i);
      EXPECT_LE((gram * e - m.eigenvalues(i) * e).norm(), 1e-6 * m.eigenvalues(0));
    }
    Matrix g = m.components.transpose() * m.components;
    EXPECT_LE((g - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-8);
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) ratio_sum += m.factor_ratio(i);
    EXPECT_NEAR(ratio_sum, 1.0, 1e-9);
    for (Eigen::Index i = 1; i < 20; ++i) EXPECT_LE(m.eigenvalues(i), m.eigenvalues(i - 1));
  }
}

TEST(FitExact, SignConvention) {
  auto m = fit_exact_pca(random_matrix(30, 6, 4));
  for (Eigen::Index j = 0; j < 6; ++j) {
    Eigen::Index arg;
    m.components.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(m.components(arg, j), 0.0);
  }
}

TEST(FitExact, RejectsNonFinite) {
  Matrix x = random_matrix(5, 3, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(fit_exact_pca(x), Error);
}

TEST(Select, MajorExactBoundary) {
  auto s = select_for_variance(diagonal_model({3, 1}), 0.75, SelectionMode::major);
  EXPECT_EQ(s.count(), 1u);
  EXPECT_DOUBLE_EQ(s.explained, 0.75);
  EXPECT_DOUBLE_EQ(s.threshold, 0.5 * (std::sqrt(3.0) + 1.0));
}

TEST(Select, MinorCumulativeTailOracle) {
  std::vector<double> lambdas{4, 3, 2, 1};
  auto m = diagonal_model(lambdas);
  for (double p : {0.05, 0.2, 0.25, 0.5, 0.9}) {
    // Oracle: walk the tail accumulating ratios.
    std::size_t q = 0;
    double cum = 0.0;
    while (cum < p - 1e-12) cum += lambdas[lambdas.size() - 1 - q++] / 10.0;
    auto s = select_for_variance(m, p, SelectionMode::minor);
    EXPECT_EQ(s.count(), q) << "p=" << p;
    EXPECT_NEAR(s.explained, cum, 1e-12);
  }
  auto s = select_for_variance(m, 0.2, SelectionMode::minor);
  EXPECT_EQ(s.count(), 2u);
  EXPECT_NEAR(s.explained, 0.3, 1e-12);
  // θ_min separates the selected tail from the rest.
  for (std::size_t i : s.indices) EXPECT_LT(m.singular_values(static_cast<Eigen::Index>(i)), s.threshold);
  EXPECT_GT(m.singular_values(1), s.threshold);
}

TEST(Select, TiesKeptTogether) {
  auto s = select_for_variance(diagonal_model({2, 2, 2, 1}), 0.3, SelectionMode::major);
  EXPECT_EQ(s.count(), 3u);
}

TEST(Select, MonotoneInTarget) {
  auto m = fit_exact_pca(random_matrix(80, 12, 9));
  std::size_t prev = 0;
  for (double p = 0.05; p <= 1.0; p += 0.05) {
    auto s = select_for_variance(m, p, SelectionMode::major);
    EXPECT_GE(s.count(), prev);
    prev = s.count();
    // The selection equals {σ > θ}.
    auto t = select_by_threshold(m, s.threshold, SelectionMode::major);
    EXPECT_EQ(t.indices, s.indices);
  }
}

TEST(Select, MinorExcludesNumericalZeros) {
  Matrix x = random_matrix(30, 4, 3);
  x.col(3) = x.col(0) + x.col(1);  // rank 3
  auto m = fit_exact_pca(x);
  EXPECT_EQ(m.rank, 3u);
  auto s = select_for_variance(m, 1.0, SelectionMode::minor);
  for (std::size_t i : s.indices) EXPECT_LT(i, 3u);
}

TEST(Select, BadTarget) {
  EXPECT_THROW(select_for_variance(diagonal_model({1}), 0.0, SelectionMode::major), Error);
  EXPECT_THROW(select_for_variance(diagonal_model({1}), 1.5, SelectionMode::major), Error);
}

TEST(Reconstruct, InSpanAndHandExpansion) {
  auto m = fit_exact_pca(random_matrix(40, 6, 5));
  Vector e1 = m.component(0), e3 = m.component(2);
  EXPECT_NEAR(project_reconstruct(Vector(2.0 * e1 - 0.5 * m.component(1)), m, 2).sse, 0.0, 1e-20);
  const double c = 1.7;
  EXPECT_NEAR(project_reconstruct(Vector(e1 + c * e3), m, 2).sse, c * c, 1e-12);
  Vector z = Vector::LinSpaced(6, -1, 1);
  auto full = project_reconstruct(z, m, 6);
  EXPECT_LE(full.sse, 1e-8 * z.squaredNorm());
  EXPECT_NEAR(z.squaredNorm(), full.projection.squaredNorm() + full.sse, 1e-12);
  EXPECT_THROW(project_reconstruct(Vector::Ones(5), m, 2), Error);
  EXPECT_THROW(project_reconstruct(z, m, 7), Error);
}

TEST(Serialize, RoundTrip) {
  auto m = fit_exact_pca(random_matrix(25, 5, 6));
  std::stringstream io;
  write_model(io, m);
  auto back = read_model(io);
  EXPECT_EQ(back.rank, m.rank);
  EXPECT_EQ(back.source_index, m.source_index);
  EXPECT_LE((back.components - m.components).norm(), 1e-15);
  EXPECT_LE((back.eigenvalues - m.eigenvalues).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(back.total_variance, m.total_variance);
  EXPECT_TRUE(back.exact());

  auto sub = subset(m, {0, 2});
  ErrorCertificate c;
  c.delta = 0.1;
  c.sigma_errors = {0.5, -0.25};
  c.lambda_errors = {1.0, -1.0};
  c.vector_errors = {0.05, 0.07};
  c.failed = {false, true};
  sub.certificate = c;
  std::stringstream io2;
  write_model(io2, sub);
  auto back2 = read_model(io2);
  ASSERT_TRUE(back2.certificate.has_value());
  EXPECT_EQ(back2.certificate->failed, c.failed);
  EXPECT_EQ(back2.certificate->sigma_errors, c.sigma_errors);
  EXPECT_EQ(back2.source_index, (std::vector<std::size_t>{0, 2}));

  std::stringstream broken("qadv-pca-model 1\ndim 2\n");
  EXPECT_THROW(read_model(broken), Error);
}
