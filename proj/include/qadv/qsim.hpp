#pragma once

// Classical stand-ins for the bounded-error quantum subroutines: amplitude
// estimation, consistent phase estimation, distance / inner-product
// estimation and pure-state tomography. Each returns an estimate whose error
// respects the subroutine's guarantee, with failure events drawn at the
// configured rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <tuple>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qadv/data.hpp"
#include "qadv/error.hpp"

namespace qadv {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Open interval (0, 1).
inline double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// 12 significant digits; equal keys for values that agree to that precision.
inline std::string discretize(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.11e", v);
  return buf;
}

}  // namespace detail

enum class Routine : std::uint32_t {
  phase_estimation = 1,
  singular_value = 2,
  vector_extraction = 3,
};

// Holds the seed, the failure policy and the consistency store. Keyed draws
// are a pure function of (seed, routine, key), so identical inputs give
// identical estimates in any process; sequential draws come from `engine`.
class NoiseContext {
 public:
  explicit NoiseContext(std::uint64_t seed = 0, double failure_rate = 0.0, double blowup = 10.0)
      : seed_(seed), failure_rate_(failure_rate), blowup_(blowup), engine_(detail::splitmix64(seed)) {
    require(failure_rate >= 0.0 && failure_rate < 1.0, ErrorCategory::config,
            "failure rate must lie in [0, 1)");
    require(blowup >= 1.0, ErrorCategory::config, "failure blowup factor must be >= 1");
  }

  NoiseContext(const NoiseContext&) = delete;
  NoiseContext& operator=(const NoiseContext&) = delete;

  std::uint64_t seed() const { return seed_; }
  double failure_rate() const { return failure_rate_; }
  void set_failure_rate(double g) {
    require(g >= 0.0 && g < 1.0, ErrorCategory::config, "failure rate must lie in [0, 1)");
    failure_rate_ = g;
  }
  double blowup() const { return blowup_; }
  std::mt19937_64& engine() { return engine_; }

  // Uniform (0, 1) draw number `stream` for `key`; cached per (routine, key).
  double keyed_uniform(Routine routine, const std::string& key, std::uint32_t stream = 0) {
    const std::uint64_t h = detail::fnv1a(key);
    const auto slot = std::make_tuple(static_cast<std::uint32_t>(routine), h, stream);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = store_.find(slot); it != store_.end()) return it->second;
    std::uint64_t bits = detail::splitmix64(seed_ ^ detail::splitmix64(
                             h ^ (static_cast<std::uint64_t>(routine) << 32) ^ stream));
    double u = detail::to_unit(bits);
    store_.emplace(slot, u);
    return u;
  }

  std::size_t cached_draws() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return store_.size();
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

 private:
  std::uint64_t seed_;
  double failure_rate_;
  double blowup_;
  std::mt19937_64 engine_;
  mutable std::mutex mutex_;
  std::map<std::tuple<std::uint32_t, std::uint64_t, std::uint32_t>, double> store_;
};

// Error added to a value whose guarantee is |error| < bound: uniform inside
// the bound, or with probability `failure` a magnitude in [bound, blowup·bound).
inline double bounded_error(double bound, double failure, double blowup, double u_fail,
                            double u_mag, double u_sign) {
  if (u_fail < failure) {
    double mag = bound * (1.0 + (blowup - 1.0) * u_mag);
    return u_sign < 0.5 ? -mag : mag;
  }
  return bound * (2.0 * u_mag - 1.0);
}

// ---------------------------------------------------------------------------
// Amplitude estimation

struct AmplitudeBound {
  static double of(double a, std::size_t t) {
    const double pi = std::numbers::pi;
    const double tt = static_cast<double>(t);
    return 2.0 * pi * std::sqrt(a * (1.0 - a)) / tt + pi * pi / (tt * tt);
  }
};

namespace detail {

// Fejér kernel: probability that phase estimation with M outcomes reports an
// integer offset `delta` away from the true scaled phase.
inline double fejer(double delta, double m) {
  const double pi = std::numbers::pi;
  double r = delta - std::round(delta);
  if (std::abs(r) < 1e-12) {
    auto whole = static_cast<long long>(std::llround(delta));
    auto mm = static_cast<long long>(std::llround(m));
    return (whole % mm == 0) ? 1.0 : 0.0;
  }
  double num = std::sin(pi * delta);
  double den = m * std::sin(pi * delta / m);
  return (num * num) / (den * den);
}

}  // namespace detail

struct AmplitudeOutcomes {
  std::vector<long long> register_values;  // y in [0, t)
  std::vector<double> weights;             // unnormalized probabilities
};

// Measurement distribution of amplitude estimation with t applications: the
// register value y follows the phase-estimation kernel for the two phases
// ±θ_a (a = sin²(π θ_a)); the reported estimate is sin²(π y / t).
inline AmplitudeOutcomes amplitude_outcomes(double a, std::size_t t) {
  require(a >= 0.0 && a <= 1.0, ErrorCategory::config, "amplitude must lie in [0, 1]");
  require(t >= 1, ErrorCategory::config, "amplitude estimation needs t >= 1");
  const double pi = std::numbers::pi;
  const double m = static_cast<double>(t);
  const double scaled = m * std::asin(std::sqrt(a)) / pi;  // M θ_a
  // Outcomes within ±window of either peak carry all but ~1/(π² window) of the mass.
  constexpr long long kWindow = 2048;
  const auto tt = static_cast<long long>(t);
  std::set<long long> candidates;
  if (tt <= 4 * kWindow) {
    for (long long y = 0; y < tt; ++y) candidates.insert(y);
  } else {
    // peaks at Mθ_a and M − Mθ_a; the kernel is periodic in M
    for (double centre : {scaled, m - scaled}) {
      auto c = static_cast<long long>(std::floor(centre));
      for (long long y = c - kWindow; y <= c + kWindow; ++y) candidates.insert(((y % tt) + tt) % tt);
    }
  }
  AmplitudeOutcomes out;
  for (long long y : candidates) {
    double w = 0.5 * (detail::fejer(static_cast<double>(y) - scaled, m) +
                      detail::fejer(static_cast<double>(y) + scaled, m));
    if (w > 0.0) {
      out.register_values.push_back(y);
      out.weights.push_back(w);
    }
  }
  return out;
}

inline double amplitude_from_register(long long y, std::size_t t) {
  double s = std::sin(std::numbers::pi * static_cast<double>(y) / static_cast<double>(t));
  return std::clamp(s * s, 0.0, 1.0);
}

// a = 0 gives 0 and a = 1 with even t gives 1 with certainty; the kernel puts
// all its mass on those outcomes, the shortcut only skips building it.
inline double estimate_amplitude(double a, std::size_t t, NoiseContext& ctx) {
  require(a >= 0.0 && a <= 1.0, ErrorCategory::config, "amplitude must lie in [0, 1]");
  require(t >= 1, ErrorCategory::config, "amplitude estimation needs t >= 1");
  if (a == 0.0) return 0.0;
  if (a == 1.0 && t % 2 == 0) return 1.0;
  auto dist = amplitude_outcomes(a, t);
  std::discrete_distribution<std::size_t> pick(dist.weights.begin(), dist.weights.end());
  return amplitude_from_register(dist.register_values[pick(ctx.engine())], t);
}

// ---------------------------------------------------------------------------
// Consistent phase estimation

// Returns an estimate with |estimate − true_value| < epsilon (outside the
// bound with the context's failure rate). Repeated calls with the same
// (true_value, epsilon) return the same estimate.
inline double phase_estimate(double true_value, double epsilon, NoiseContext& ctx,
                             Routine routine = Routine::phase_estimation) {
  require(epsilon > 0.0, ErrorCategory::config, "phase estimation needs epsilon > 0");
  const std::string key = detail::discretize(true_value) + "|" + detail::discretize(epsilon);
  double u_fail = ctx.keyed_uniform(routine, key, 0);
  double u_mag = ctx.keyed_uniform(routine, key, 1);
  double u_sign = ctx.keyed_uniform(routine, key, 2);
  return true_value + bounded_error(epsilon, ctx.failure_rate(), ctx.blowup(), u_fail, u_mag, u_sign);
}

// ---------------------------------------------------------------------------
// Distance and inner-product estimation

struct DistanceEstimate {
  double value = 0.0;
  bool failed = false;
};

// Additive error within epsilon with probability 1 − 2Δ; otherwise the error
// lands in [epsilon, blowup·epsilon).
inline DistanceEstimate noisy_additive(double true_value, double epsilon, double failure_delta,
                                       NoiseContext& ctx) {
  require(epsilon > 0.0, ErrorCategory::config, "distance estimation needs epsilon > 0");
  require(failure_delta >= 0.0 && failure_delta < 0.5, ErrorCategory::config,
          "distance estimation needs 0 <= Delta < 0.5");
  double u_fail = ctx.uniform(), u_mag = ctx.uniform(), u_sign = ctx.uniform();
  DistanceEstimate e;
  e.failed = u_fail < 2.0 * failure_delta;
  e.value = true_value + bounded_error(epsilon, 2.0 * failure_delta, ctx.blowup(), u_fail, u_mag, u_sign);
  return e;
}

inline DistanceEstimate estimate_squared_distance_value(double true_sq, double epsilon,
                                                        double failure_delta, NoiseContext& ctx) {
  DistanceEstimate e = noisy_additive(true_sq, epsilon, failure_delta, ctx);
  e.value = std::max(0.0, e.value);
  return e;
}

inline double estimate_squared_distance(const Vector& v, const Vector& c, double epsilon,
                                        double failure_delta, NoiseContext& ctx) {
  require(v.size() == c.size(), ErrorCategory::data, "distance estimation dimension mismatch");
  return estimate_squared_distance_value((v - c).squaredNorm(), epsilon, failure_delta, ctx).value;
}

inline double estimate_inner_product(const Vector& v, const Vector& c, double epsilon,
                                     double failure_delta, NoiseContext& ctx) {
  require(v.size() == c.size(), ErrorCategory::data, "inner product dimension mismatch");
  return noisy_additive(v.dot(c), epsilon, failure_delta, ctx).value;
}

// ---------------------------------------------------------------------------
// Pure-state tomography

enum class NormMode { l2, linf };

struct TomographyPlan {
  std::size_t dim = 0;
  double delta = 0.0;
  NormMode norm = NormMode::l2;
  std::size_t samples = 0;         // theoretical N
  double heuristic_divisor = 1.0;  // h

  std::size_t effective_samples() const {
    double eff = std::ceil(static_cast<double>(samples) / heuristic_divisor);
    return std::max<std::size_t>(1, static_cast<std::size_t>(eff));
  }
};

// N = ⌈36 d ln d / δ²⌉ (ℓ2) or ⌈36 ln d / δ²⌉ (ℓ∞).
inline std::size_t tomography_samples(std::size_t dim, double delta, NormMode norm) {
  require(dim >= 1, ErrorCategory::config, "tomography needs dimension >= 1");
  require(delta > 0.0, ErrorCategory::config, "tomography needs delta > 0");
  const double d = static_cast<double>(dim);
  const double base = norm == NormMode::l2 ? 36.0 * d * std::log(d) : 36.0 * std::log(d);
  return static_cast<std::size_t>(std::ceil(base / (delta * delta)));
}

inline TomographyPlan make_tomography_plan(std::size_t dim, double delta, NormMode norm = NormMode::l2,
                                           double heuristic_divisor = 1.0) {
  require(heuristic_divisor >= 1.0, ErrorCategory::config, "heuristic divisor must be >= 1");
  return TomographyPlan{dim, delta, norm, tomography_samples(dim, delta, norm), heuristic_divisor};
}

// A plan with a fixed measurement budget (the divisor is then 1).
inline TomographyPlan fixed_budget_plan(std::size_t dim, std::size_t samples) {
  require(samples >= 1, ErrorCategory::config, "tomography budget must be >= 1");
  return TomographyPlan{dim, 0.0, NormMode::l2, samples, 1.0};
}

struct TomographyEstimate {
  Vector x;
  std::size_t samples = 0;
  bool under_budget = false;  // fewer samples than entries
};

// Multinomial counts by sequential conditional binomials.
inline std::vector<std::uint64_t> multinomial(std::uint64_t trials, const Vector& probs,
                                              std::mt19937_64& rng) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(probs.size()), 0);
  double mass = probs.sum();
  std::uint64_t left = trials;
  for (Eigen::Index i = 0; i < probs.size() && left > 0; ++i) {
    double p = mass > 0.0 ? std::clamp(probs(i) / mass, 0.0, 1.0) : 0.0;
    if (i + 1 == probs.size()) p = 1.0;
    std::uint64_t c = p >= 1.0 ? left : std::binomial_distribution<std::uint64_t>(left, p)(rng);
    counts[static_cast<std::size_t>(i)] = c;
    left -= c;
    mass -= probs(i);
  }
  return counts;
}

// Half the budget estimates magnitudes from computational-basis counts, the
// other half fixes signs; a sign is wrong with probability
// max(0, ½ − |x_i|·√s/4) where s is the sign-round budget.
inline TomographyEstimate tomography(const Vector& x, const TomographyPlan& plan, NoiseContext& ctx) {
  const double norm = x.norm();
  require(norm > 0.0, ErrorCategory::data, "tomography of the zero vector");
  require(std::abs(norm - 1.0) <= 1e-9, ErrorCategory::data, "tomography input must be a unit vector");
  require(static_cast<std::size_t>(x.size()) == plan.dim || plan.dim == 0, ErrorCategory::data,
          "tomography plan dimension mismatch");

  TomographyEstimate out;
  out.samples = plan.effective_samples();
  out.under_budget = out.samples < static_cast<std::size_t>(x.size());
  const std::uint64_t magnitude_round = (out.samples + 1) / 2;
  const std::uint64_t sign_round = out.samples - magnitude_round;

  Vector probs = x.array().square();
  auto counts = multinomial(magnitude_round, probs, ctx.engine());
  const double root_sign = std::sqrt(static_cast<double>(sign_round));
  out.x.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double mag = std::sqrt(static_cast<double>(counts[static_cast<std::size_t>(i)]) /
                           static_cast<double>(magnitude_round));
    double sign = x(i) < 0.0 ? -1.0 : 1.0;
    double flip = std::clamp(0.5 - std::abs(x(i)) * root_sign / 4.0, 0.0, 0.5);
    if (mag > 0.0 && flip > 0.0 && ctx.uniform() < flip) sign = -sign;
    out.x(i) = sign * mag;
  }
  out.x /= out.x.norm();
  return out;
}

// ---------------------------------------------------------------------------
// Tomography study: empirical samples-vs-error against the theoretical bound

inline double empirical_quantile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorCategory::data, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<double> tomography_errors(const Vector& x, const TomographyPlan& plan,
                                             std::size_t repetitions, NoiseContext& ctx,
                                             NormMode metric = NormMode::l2) {
  require(repetitions >= 1, ErrorCategory::config, "tomography study needs >= 1 repetition");
  std::vector<double> errs;
  errs.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    Vector est = tomography(x, plan, ctx).x;
    errs.push_back(metric == NormMode::l2 ? (est - x).norm() : (est - x).cwiseAbs().maxCoeff());
  }
  return errs;
}

struct TomographyStudyRow {
  double delta = 0.0;
  std::size_t theoretical_samples = 0;
  std::size_t samples = 0;
  double median = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
};

inline std::vector<TomographyStudyRow> tomography_study(const Vector& x, const std::vector<double>& delta_grid,
                                                        std::size_t repetitions, NoiseContext& ctx,
                                                        double heuristic_divisor = 1.0) {
  std::vector<TomographyStudyRow> rows;
  for (double delta : delta_grid) {
    auto plan = make_tomography_plan(static_cast<std::size_t>(x.size()), delta, NormMode::l2,
                                     heuristic_divisor);
    auto errs = tomography_errors(x, plan, repetitions, ctx);
    rows.push_back({delta, plan.samples, plan.effective_samples(), empirical_quantile(errs, 0.5),
                    empirical_quantile(errs, 0.05), empirical_quantile(errs, 0.95)});
  }
  return rows;
}

// Same table for explicit budgets (no theoretical δ attached).
inline std::vector<TomographyStudyRow> tomography_budget_study(const Vector& x,
                                                               const std::vector<std::size_t>& budgets,
                                                               std::size_t repetitions,
                                                               NoiseContext& ctx) {
  std::vector<TomographyStudyRow> rows;
  for (std::size_t s : budgets) {
    auto errs = tomography_errors(x, fixed_budget_plan(static_cast<std::size_t>(x.size()), s),
                                  repetitions, ctx);
    rows.push_back({0.0, 0, s, empirical_quantile(errs, 0.5), empirical_quantile(errs, 0.05),
                    empirical_quantile(errs, 0.95)});
  }
  return rows;
}

}  // namespace qadv
