#include <gtest/gtest.h>

#include <random>

#include "qadv/qmeans.hpp"

using namespace qadv;

namespace {

Matrix blobs(std::size_t per, const std::vector<double>& centres, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Matrix x(static_cast<Eigen::Index>(per * centres.size()), 2);
  Eigen::Index r = 0;
  for (double c : centres)
    for (std::size_t i = 0; i < per; ++i, ++r) {
      x(r, 0) = c + g(rng);
      x(r, 1) = g(rng);
    }
  return x;
}

}  // namespace

TEST(Qmeans, ZeroNoiseMatchesLloyd) {
  Matrix x = blobs(200, {0, 4, 9}, 1.0, 1);
  Matrix init = kmeans_plus_plus(x, 3, 2);
  auto classic = kmeans(x, init);
  QmeansOptions opt;
  opt.delta = 1e-12;
  opt.distance_epsilon = 1e-12;
  opt.failure_delta = 1e-15;
  NoiseContext ctx(3);
  auto q = qmeans_fit(x, init, opt, ctx);
  EXPECT_EQ(q.assignments, classic.assignments);
  EXPECT_LE((q.centroids - classic.centroids).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(ch_index(x, q), ch_index(x, classic), 1e-6 * ch_index(x, classic));
}

TEST(Qmeans, SeparatesTwoBlobs) {
  Matrix x = blobs(300, {-5, 5}, 0.5, 4);
  NoiseContext ctx(5);
  QmeansOptions opt;
  opt.delta = 0.05;
  opt.distance_epsilon = 0.05;
  auto r = qmeans_fit(x, kmeans_plus_plus(x, 2, 6), opt, ctx);
  for (std::size_t i = 1; i < 300; ++i) EXPECT_EQ(r.assignments[i], r.assignments[0]);
  for (std::size_t i = 300; i < 600; ++i) EXPECT_NE(r.assignments[i], r.assignments[0]);
  EXPECT_EQ(r.drift.size(), r.iterations);
  EXPECT_EQ(r.perturbation.size(), r.iterations);
  for (double p : r.perturbation) EXPECT_LE(p, opt.delta);
}

TEST(Qmeans, DeterministicPerSeed) {
  Matrix x = blobs(100, {0, 3, 6}, 1.0, 7);
  Matrix init = kmeans_plus_plus(x, 3, 8);
  QmeansOptions opt;
  opt.delta = 0.1;
  opt.distance_epsilon = 0.1;
  NoiseContext a(9), b(9);
  EXPECT_EQ(qmeans_fit(x, init, opt, a).assignments, qmeans_fit(x, init, opt, b).assignments);
}

TEST(KmeansPlusPlus, DistinctRowsFromData) {
  Matrix x = blobs(50, {0, 10}, 1.0, 10);
  Matrix c = kmeans_plus_plus(x, 5, 11);
  EXPECT_EQ(c.rows(), 5);
  EXPECT_EQ(kmeans_plus_plus(x, 5, 11), c);
  EXPECT_THROW(kmeans_plus_plus(x, 101, 1), Error);
}

TEST(ChIndex, HandExample) {
  Matrix x(4, 1);
  x << 0, 2, 10, 12;
  // B = 4·25 = 100, W = 4; (100/1)/(4/2) = 50
  EXPECT_DOUBLE_EQ(ch_index(x, {0, 0, 1, 1}, 2), 50.0);
}

TEST(ChIndex, ZeroWithinIsInfinite) {
  Matrix x(4, 1);
  x << 1, 1, 5, 5;
  EXPECT_TRUE(std::isinf(ch_index(x, {0, 0, 1, 1}, 2)));
}

TEST(ChIndex, RandomLabelsNearOne) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  Matrix x(5000, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = g(rng);
  std::vector<std::size_t> labels(5000);
  for (auto& l : labels) l = rng() % 4;
  EXPECT_NEAR(ch_index(x, labels, 4), 1.0, 0.5);
}

TEST(ChIndex, Errors) {
  Matrix x(3, 1);
  x << 0, 1, 2;
  EXPECT_THROW(ch_index(x, {0, 0, 0}, 1), Error);
  EXPECT_THROW(ch_index(x, {0, 1, 2}, 3), Error);
  EXPECT_THROW(ch_index(x, {0, 0, 0}, 2), Error);
}
