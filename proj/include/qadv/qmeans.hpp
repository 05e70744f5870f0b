#pragma once

// k-means and its noisy q-means simulation, plus the Calinski-Harabasz index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "qadv/data.hpp"
#include "qadv/error.hpp"
#include "qadv/qsim.hpp"

namespace qadv {

inline constexpr std::size_t kMaxLloydIterations = 300;

struct ClusteringResult {
  Matrix centroids;  // k x d
  std::vector<std::size_t> assignments;
  std::size_t iterations = 0;
  std::vector<double> drift;            // exact centroid movement per iteration
  std::vector<double> perturbation;     // max ‖μ̄_j − μ_j‖ per iteration (q-means)
  std::size_t reseeded = 0;             // empty clusters re-seeded from the farthest point
  double max_squared_norm = 0.0;        // η = max_i ‖v_i‖²
};

// k-means++ seeding.
inline Matrix kmeans_plus_plus(const Matrix& x, std::size_t k, std::uint64_t seed) {
  require(k >= 1 && k <= static_cast<std::size_t>(x.rows()), ErrorCategory::config,
          "k must lie in [1, n]");
  std::mt19937_64 rng(seed);
  const Eigen::Index n = x.rows();
  Matrix c(static_cast<Eigen::Index>(k), x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  c.row(0) = x.row(first(rng));
  Vector best = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    Eigen::Index pick;
    if (best.sum() > 0.0) {
      std::discrete_distribution<Eigen::Index> draw(best.data(), best.data() + n);
      pick = draw(rng);
    } else {
      pick = first(rng);
    }
    c.row(static_cast<Eigen::Index>(j)) = x.row(pick);
    best = best.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return c;
}

namespace detail {

// Squared distances from every row of x to every centroid (n x k).
inline Matrix squared_distances(const Matrix& x, const Matrix& c) {
  Vector xn = x.rowwise().squaredNorm();
  Vector cn = c.rowwise().squaredNorm();
  Matrix d = (-2.0 * (x * c.transpose())).colwise() + xn;
  d.rowwise() += cn.transpose();
  return d.cwiseMax(0.0);
}

struct Means {
  Matrix centroids;
  std::vector<std::size_t> sizes;
};

inline Means cluster_means(const Matrix& x, const std::vector<std::size_t>& assign, std::size_t k) {
  Means m{Matrix::Zero(static_cast<Eigen::Index>(k), x.cols()), std::vector<std::size_t>(k, 0)};
  for (std::size_t i = 0; i < assign.size(); ++i) {
    m.centroids.row(static_cast<Eigen::Index>(assign[i])) += x.row(static_cast<Eigen::Index>(i));
    ++m.sizes[assign[i]];
  }
  for (std::size_t j = 0; j < k; ++j)
    if (m.sizes[j] > 0) m.centroids.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(m.sizes[j]);
  return m;
}

// Empty clusters take the point farthest from its current centroid.
inline std::size_t reseed_empty(const Matrix& x, Means& m, std::vector<std::size_t>& assign,
                                const Matrix& previous) {
  std::size_t reseeded = 0;
  for (std::size_t j = 0; j < m.sizes.size(); ++j) {
    if (m.sizes[j] > 0) continue;
    Eigen::Index far = 0;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::size_t a = assign[static_cast<std::size_t>(i)];
      if (m.sizes[a] <= 1) continue;
      double dd = (x.row(i) - previous.row(static_cast<Eigen::Index>(a))).squaredNorm();
      if (dd > far_d) {
        far_d = dd;
        far = i;
      }
    }
    if (far_d < 0.0) continue;
    std::size_t from = assign[static_cast<std::size_t>(far)];
    --m.sizes[from];
    assign[static_cast<std::size_t>(far)] = j;
    m.sizes[j] = 1;
    ++reseeded;
  }
  if (reseeded > 0) m = cluster_means(x, assign, m.sizes.size());
  return reseeded;
}

inline double max_row_shift(const Matrix& a, const Matrix& b) {
  return (a - b).rowwise().norm().maxCoeff();
}

}  // namespace detail

// Lloyd iterations from the given initial centroids until assignments stop
// changing (or the iteration cap).
inline ClusteringResult kmeans(const Matrix& x, const Matrix& init, std::size_t max_iter = kMaxLloydIterations) {
  require(init.cols() == x.cols(), ErrorCategory::data, "centroid dimension mismatch");
  const auto k = static_cast<std::size_t>(init.rows());
  ClusteringResult r;
  r.centroids = init;
  r.max_squared_norm = x.rowwise().squaredNorm().maxCoeff();
  std::vector<std::size_t> prev;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Matrix d = detail::squared_distances(x, r.centroids);
    r.assignments.assign(static_cast<std::size_t>(x.rows()), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index arg;
      d.row(i).minCoeff(&arg);
      r.assignments[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
    }
    auto means = detail::cluster_means(x, r.assignments, k);
    r.reseeded += detail::reseed_empty(x, means, r.assignments, r.centroids);
    r.drift.push_back(detail::max_row_shift(means.centroids, r.centroids));
    r.centroids = means.centroids;
    r.iterations = it + 1;
    if (r.assignments == prev) break;
    prev = r.assignments;
  }
  return r;
}

struct QmeansOptions {
  double delta = 0.0005;          // centroid error (ℓ2)
  double distance_epsilon = 0.0005;
  double failure_delta = 1e-3;    // Δ of the distance estimator
  std::size_t max_iter = kMaxLloydIterations;
};

// Lloyd iterations where (a) each point is assigned by noisy squared-distance
// estimates and (b) every updated centroid is moved by a random vector of norm
// at most δ. Stops when the exact (pre-perturbation) centroids move less than
// δ/2.
inline ClusteringResult qmeans_fit(const Matrix& x, const Matrix& init, const QmeansOptions& opt,
                                   NoiseContext& ctx) {
  require(opt.delta > 0.0 && opt.distance_epsilon > 0.0, ErrorCategory::config,
          "q-means needs delta > 0 and distance epsilon > 0");
  require(init.cols() == x.cols(), ErrorCategory::data, "centroid dimension mismatch");
  const auto k = static_cast<std::size_t>(init.rows());
  require(k >= 1 && k <= static_cast<std::size_t>(x.rows()), ErrorCategory::config, "k must lie in [1, n]");
  std::normal_distribution<double> gauss(0.0, 1.0);

  ClusteringResult r;
  r.centroids = init;
  r.max_squared_norm = x.rowwise().squaredNorm().maxCoeff();
  Matrix exact_prev = init;
  // Only centroids within twice the worst-case error of the true minimum can
  // win the noisy comparison.
  const double band = 2.0 * ctx.blowup() * opt.distance_epsilon;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    Matrix d = detail::squared_distances(x, r.centroids);
    r.assignments.assign(static_cast<std::size_t>(x.rows()), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double best = d.row(i).minCoeff();
      double noisy_best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (Eigen::Index j = 0; j < d.cols(); ++j) {
        if (d(i, j) > best + band) continue;
        double est = estimate_squared_distance_value(d(i, j), opt.distance_epsilon, opt.failure_delta, ctx).value;
        if (est < noisy_best) {
          noisy_best = est;
          arg = static_cast<std::size_t>(j);
        }
      }
      r.assignments[static_cast<std::size_t>(i)] = arg;
    }
    auto means = detail::cluster_means(x, r.assignments, k);
    r.reseeded += detail::reseed_empty(x, means, r.assignments, r.centroids);

    Matrix noisy = means.centroids;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < noisy.rows(); ++j) {
      Vector u(noisy.cols());
      for (Eigen::Index c = 0; c < u.size(); ++c) u(c) = gauss(ctx.engine());
      double radius = opt.delta * ctx.uniform();
      u *= radius / u.norm();
      noisy.row(j) += u.transpose();
      worst = std::max(worst, radius);
    }
    const double drift = detail::max_row_shift(means.centroids, exact_prev);
    r.drift.push_back(drift);
    r.perturbation.push_back(worst);
    r.centroids = noisy;
    exact_prev = means.centroids;
    r.iterations = it + 1;
    if (drift < 0.5 * opt.delta) break;
  }
  return r;
}

// Calinski-Harabasz: [B / (k − 1)] / [W / (n − k)] with B, W the between- and
// within-cluster sums of squares. +infinity when W = 0.
inline double ch_index(const Matrix& x, const std::vector<std::size_t>& assignments, std::size_t k) {
  require(k >= 2, ErrorCategory::config, "CH index needs k >= 2");
  require(assignments.size() == static_cast<std::size_t>(x.rows()), ErrorCategory::data,
          "one assignment per row required");
  const auto n = static_cast<double>(x.rows());
  require(n > static_cast<double>(k), ErrorCategory::config, "CH index needs n > k");
  for (std::size_t a : assignments)
    require(a < k, ErrorCategory::data, "assignment references a missing cluster");
  auto means = detail::cluster_means(x, assignments, k);
  for (std::size_t s : means.sizes) require(s > 0, ErrorCategory::data, "CH index with an empty cluster");
  Vector centre = x.colwise().mean().transpose();
  double between = 0.0, within = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    between += static_cast<double>(means.sizes[j]) *
               (means.centroids.row(static_cast<Eigen::Index>(j)).transpose() - centre).squaredNorm();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    within += (x.row(i) - means.centroids.row(static_cast<Eigen::Index>(assignments[static_cast<std::size_t>(i)])))
                  .squaredNorm();
  if (within <= 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) / (within / (n - static_cast<double>(k)));
}

inline double ch_index(const Matrix& x, const ClusteringResult& r) {
  return ch_index(x, r.assignments, static_cast<std::size_t>(r.centroids.rows()));
}

}  // namespace qadv
