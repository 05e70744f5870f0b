#pragma once

// Noisy PCA model extraction: a threshold search over phase-estimated
// singular values, then extraction of the components above (major) or below
// (minor) the threshold with bounded singular-value, eigenvalue and vector
// errors. Every perturbation is recorded in the model's certificate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qadv/error.hpp"
#include "qadv/pca.hpp"
#include "qadv/qsim.hpp"

namespace qadv {

enum class VectorNoise {
  injected,    // random direction orthogonal to e_i, magnitude in [δ/2, δ]
  tomography,  // simulated tomography with ⌈N(δ)/h⌉ samples
};

struct QpcaRequest {
  double p = 0.70;
  std::optional<double> p_min;
  double epsilon = 1.0;
  double epsilon_theta = 1.0;
  double eta = 0.1;
  double delta = 0.1;
  double gamma = 0.0;
  std::optional<double> theta_min;
  double heuristic_divisor = 1.0;
  VectorNoise vector_noise = VectorNoise::injected;

  void validate() const {
    require(epsilon > 0.0 && epsilon_theta > 0.0 && eta > 0.0 && delta > 0.0,
            ErrorCategory::config, "all qpca error parameters must be > 0");
    require(p > 0.0 && p <= 1.0, ErrorCategory::config, "p must lie in (0, 1]");
    require(!p_min || (*p_min > 0.0 && *p_min <= 1.0), ErrorCategory::config,
            "p_min must lie in (0, 1]");
    require(eta < p, ErrorCategory::config, "eta must be smaller than p");
    require(gamma >= 0.0 && gamma < 1.0, ErrorCategory::config, "gamma must lie in [0, 1)");
    require(heuristic_divisor >= 1.0, ErrorCategory::config, "heuristic divisor must be >= 1");
  }

  // Every knob at or below `tiny`: the noisy pipeline should then match the
  // exact one.
  static QpcaRequest noiseless(double p, double tiny = 1e-12) {
    QpcaRequest r;
    r.p = p;
    r.epsilon = r.epsilon_theta = r.eta = r.delta = tiny;
    r.gamma = 0.0;
    return r;
  }
};

struct ThetaSearch {
  SelectionMode mode = SelectionMode::major;
  double theta = 0.0;
  double explained = 0.0;  // p̄: mass of the components selected by θ
  std::vector<std::size_t> selected;
  std::vector<double> perturbed;  // σ̄ per component of the exact model (rank pool)
  std::size_t iterations = 0;
  bool within_tolerance = false;  // |p − p̄| ≤ η
};

namespace detail {

inline std::vector<double> perturbed_spectrum(const PcaModel& exact, double epsilon, NoiseContext& ctx) {
  std::vector<double> out;
  out.reserve(exact.rank);
  for (std::size_t i = 0; i < exact.rank; ++i)
    out.push_back(phase_estimate(exact.singular_values(static_cast<Eigen::Index>(i)), epsilon, ctx,
                                 Routine::singular_value));
  return out;
}

inline double selected_mass(const PcaModel& exact, const std::vector<double>& sbar, double theta,
                            SelectionMode mode) {
  double mass = 0.0;
  for (std::size_t i = 0; i < sbar.size(); ++i) {
    bool in = mode == SelectionMode::major ? sbar[i] >= theta : sbar[i] < theta;
    if (in) mass += exact.factor_ratio(i);
  }
  return mass;
}

}  // namespace detail

// Bisection for θ over phase-estimated singular values σ̄_i (error ε_θ),
// ⌈log₂(σ₁/ε_θ)⌉ halvings deep. The selected set is {σ̄_i ≥ θ} (major) or
// {σ̄_i < θ} (minor); θ is then placed halfway across the gap that separates
// the selected set from the rest. The set always explains at least p; the
// result reports whether |p − p̄| ≤ η, and `strict` turns a miss into an error.
inline ThetaSearch quantum_binary_search_theta(const PcaModel& exact, double p_target, double epsilon_theta,
                                               double eta, NoiseContext& ctx,
                                               SelectionMode mode = SelectionMode::major,
                                               bool strict = false) {
  require(p_target > 0.0 && p_target <= 1.0, ErrorCategory::config, "p must lie in (0, 1]");
  require(epsilon_theta > 0.0 && eta > 0.0, ErrorCategory::config,
          "threshold search needs epsilon_theta > 0 and eta > 0");
  require(exact.rank > 0, ErrorCategory::infeasible, "model has no non-zero singular values");

  ThetaSearch out;
  out.mode = mode;
  out.perturbed = detail::perturbed_spectrum(exact, epsilon_theta, ctx);
  const double top = *std::max_element(out.perturbed.begin(), out.perturbed.end());
  const double bottom = *std::min_element(out.perturbed.begin(), out.perturbed.end());
  const double sigma1 = exact.singular_values(0);
  out.iterations = static_cast<std::size_t>(
      std::max(1.0, std::ceil(std::log2(std::max(sigma1 / epsilon_theta, 2.0)))));

  // Invariant: `good` satisfies the variance target, `bad` does not.
  const bool major = mode == SelectionMode::major;
  double good = major ? std::min(0.0, bottom) : top + epsilon_theta;
  double bad = major ? top + epsilon_theta : std::min(0.0, bottom);
  const double total_in_pool = detail::selected_mass(exact, out.perturbed, good, mode);
  require(detail::reached(total_in_pool, p_target), ErrorCategory::infeasible,
          "no threshold can reach the target variance");
  for (std::size_t it = 0; it < out.iterations; ++it) {
    double mid = 0.5 * (good + bad);
    if (detail::reached(detail::selected_mass(exact, out.perturbed, mid, mode), p_target)) good = mid;
    else bad = mid;
  }

  std::vector<std::size_t> order(out.perturbed.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.perturbed[a] > out.perturbed[b]; });
  double inside_edge = major ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  double outside_edge = major ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    double s = out.perturbed[i];
    bool in = major ? s >= good : s < good;
    if (in) {
      out.selected.push_back(i);
      out.explained += exact.factor_ratio(i);
      inside_edge = major ? std::min(inside_edge, s) : std::max(inside_edge, s);
    } else {
      outside_edge = major ? std::max(outside_edge, s) : std::min(outside_edge, s);
    }
  }
  if (major) {
    out.theta = std::isfinite(outside_edge) ? 0.5 * (inside_edge + outside_edge) : 0.5 * inside_edge;
  } else {
    out.theta = std::isfinite(outside_edge) ? 0.5 * (inside_edge + outside_edge) : 2.0 * inside_edge;
  }
  out.within_tolerance = std::abs(p_target - out.explained) <= eta;
  if (strict && !out.within_tolerance)
    fail(ErrorCategory::infeasible, "no threshold explains the target variance within eta (p̄ = " +
                                        std::to_string(out.explained) + ")");
  return out;
}

namespace detail {

// Unit vector orthogonal to `e`, uniformly distributed on that sphere.
inline Vector orthogonal_direction(const Vector& e, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    Vector u(e.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = gauss(rng);
    u -= e * e.dot(u);
    double n = u.norm();
    if (n > 1e-12) return u / n;
  }
}

inline PcaModel extract_components(const PcaModel& exact, const std::vector<std::size_t>& chosen,
                                   const std::vector<double>& sbar, const QpcaRequest& req,
                                   NoiseContext& ctx) {
  const auto d = static_cast<Eigen::Index>(exact.dim());
  const auto k = static_cast<Eigen::Index>(chosen.size());
  const double lambda_floor = std::pow(kRankFloor * exact.singular_values(0), 2);
  PcaModel m;
  m.components.resize(d, k);
  m.eigenvalues.resize(k);
  m.singular_values.resize(k);
  m.total_variance = exact.total_variance;
  m.rank = chosen.size();
  ErrorCertificate cert;
  cert.epsilon = req.epsilon;
  cert.epsilon_theta = req.epsilon_theta;
  cert.eta = req.eta;
  cert.delta = req.delta;
  cert.gamma = req.gamma;
  cert.heuristic_divisor = req.heuristic_divisor;

  for (Eigen::Index j = 0; j < k; ++j) {
    const std::size_t i = chosen[static_cast<std::size_t>(j)];
    const auto ii = static_cast<Eigen::Index>(i);
    const double sigma = exact.singular_values(ii);
    const double lambda = exact.eigenvalues(ii);
    const double sigma_bar = sbar[i];
    const double ds = sigma_bar - sigma;
    // first-order propagation keeps |λ̄ − λ| ≤ 2ε√λ whenever |σ̄ − σ| ≤ ε
    const double lambda_bar = std::max(lambda + 2.0 * std::sqrt(lambda) * ds, lambda_floor);
    bool failed = std::abs(ds) >= req.epsilon;

    const Vector e = exact.components.col(ii);
    Vector ebar;
    if (req.vector_noise == VectorNoise::injected) {
      double mag = req.delta * (0.5 + 0.5 * ctx.uniform());
      if (ctx.uniform() < req.gamma) {
        mag = req.delta * (1.0 + (ctx.blowup() - 1.0) * ctx.uniform());
        failed = true;
      }
      ebar = (e + mag * orthogonal_direction(e, ctx.engine())).normalized();
    } else {
      auto plan = make_tomography_plan(exact.dim(), req.delta, NormMode::l2, req.heuristic_divisor);
      ebar = tomography(e, plan, ctx).x;
      if ((ebar - e).norm() > req.delta) failed = true;
    }

    m.components.col(j) = ebar;
    m.singular_values(j) = sigma_bar;
    m.eigenvalues(j) = lambda_bar;
    m.source_index.push_back(exact.source_index[i]);
    cert.sigma_errors.push_back(ds);
    cert.lambda_errors.push_back(lambda_bar - lambda);
    cert.vector_errors.push_back((ebar - e).norm());
    cert.failed.push_back(failed);
  }
  m.certificate = std::move(cert);
  return m;
}

inline std::vector<std::size_t> by_descending(const std::vector<std::size_t>& idx,
                                              const std::vector<double>& key) {
  std::vector<std::size_t> out = idx;
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return out;
}

}  // namespace detail

// Components with σ̄_i ≥ θ, where σ̄_i is estimated to precision ε.
inline PcaModel extract_top_k(const PcaModel& exact, double theta, const QpcaRequest& req, NoiseContext& ctx) {
  req.validate();
  auto sbar = detail::perturbed_spectrum(exact, req.epsilon, ctx);
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < sbar.size(); ++i)
    if (sbar[i] >= theta) chosen.push_back(i);
  require(!chosen.empty(), ErrorCategory::infeasible,
          "no singular value above the threshold " + std::to_string(theta));
  return detail::extract_components(exact, detail::by_descending(chosen, sbar), sbar, req, ctx);
}

// Components with σ_floor < σ_i and σ̄_i < θ_min; numerical zeros are never selected.
inline PcaModel extract_least_q(const PcaModel& exact, double theta_min, const QpcaRequest& req,
                                NoiseContext& ctx) {
  req.validate();
  auto sbar = detail::perturbed_spectrum(exact, req.epsilon, ctx);
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < sbar.size(); ++i)
    if (sbar[i] < theta_min) chosen.push_back(i);
  require(!chosen.empty(), ErrorCategory::infeasible,
          "no non-zero singular value below theta_min " + std::to_string(theta_min));
  return detail::extract_components(exact, detail::by_descending(chosen, sbar), sbar, req, ctx);
}

struct QpcaResult {
  ThetaSearch search;
  PcaModel major;
  std::optional<ThetaSearch> minor_search;
  std::optional<PcaModel> minor;
};

// Full extraction: θ search for p, top-k extraction, and optionally the
// minor set (explicit θ_min, or a minor-mode search for p_min).
inline QpcaResult fit_qpca(const PcaModel& exact, const QpcaRequest& req, NoiseContext& ctx,
                           bool want_minor = false) {
  req.validate();
  ctx.set_failure_rate(req.gamma);
  QpcaResult r;
  r.search = quantum_binary_search_theta(exact, req.p, req.epsilon_theta, req.eta, ctx);
  r.major = extract_top_k(exact, r.search.theta, req, ctx);
  if (want_minor) {
    double theta_min;
    if (req.theta_min) {
      theta_min = *req.theta_min;
    } else {
      require(req.p_min.has_value(), ErrorCategory::config,
              "minor extraction needs theta_min or p_min");
      r.minor_search = quantum_binary_search_theta(exact, *req.p_min, req.epsilon_theta, req.eta, ctx,
                                                   SelectionMode::minor);
      theta_min = r.minor_search->theta;
    }
    r.minor = extract_least_q(exact, theta_min, req, ctx);
  }
  return r;
}

}  // namespace qadv
