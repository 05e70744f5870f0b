#pragma once

// Query-count cost model, crossover search and QRAM resource estimates.
//
// Every asymptotic formula is evaluated with constant 1 and explicit base-2
// log factors (each floored at 1). Reports say so in their header.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qadv/data.hpp"
#include "qadv/error.hpp"
#include "qadv/pca.hpp"

namespace qadv {

inline constexpr const char* kCostDisclaimer =
    "counts use constant factor 1 and explicit log2 polylog factors floored at 1";

struct DatasetParams {
  double n = 0.0;
  double d = 0.0;
  double spectral_norm = 0.0;   // ‖X‖
  double frobenius_norm = 0.0;  // ‖X‖_F
  double mu = 0.0;              // μ(X)
  double kappa = 1.0;           // σ₁ / σ_min
  double sigma_min = 0.0;       // smallest singular value above the rank floor
  double theta = 0.0;
  double theta_min = 0.0;
  double p_major = 0.0;
  double p_minor = 0.0;
  double k = 0.0;
  double q = 0.0;
  double eta_norm = 0.0;        // max_i ‖x_i‖²
  double n_measured = 0.0;      // rows the norms were measured on
};

struct QuantumErrorParams {
  double epsilon = 1.0;
  double epsilon_theta = 1.0;
  double eta = 0.1;
  double delta = 0.1;
  double failure_delta = 0.0;   // Δ
  double gamma = 0.0;
  double heuristic_divisor = 1.0;
};

enum class CostVariant { pcc_major_only, pcc_major_minor, recon, qmeans };
enum class ClassicalVariant { randomized_pca, full_svd, lloyd };

struct CostModel {
  CostVariant variant = CostVariant::pcc_major_only;
  double quantum_constant = 1.0;
  double classical_constant = 1.0;
  bool include_polylog = true;
  double qmeans_iterations = 1.0;
};

inline std::string_view to_string(CostVariant v) {
  switch (v) {
    case CostVariant::pcc_major_only: return "pcc_major_only";
    case CostVariant::pcc_major_minor: return "pcc_major_minor";
    case CostVariant::recon: return "recon";
    case CostVariant::qmeans: return "qmeans";
  }
  return "unknown";
}

inline CostVariant parse_cost_variant(const std::string& s) {
  for (auto v : {CostVariant::pcc_major_only, CostVariant::pcc_major_minor, CostVariant::recon, CostVariant::qmeans})
    if (to_string(v) == s) return v;
  fail(ErrorCategory::config, "unknown cost variant: " + s);
}

// --- parameter measurement ---------------------------------------------------

// s_q(A) = max_i Σ_j |a_ij|^q, with |a|^0 = 1 only for a ≠ 0.
inline double max_row_power_sum(const Matrix& a, double q) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      double v = std::abs(a(i, j));
      if (v == 0.0) continue;
      s += q == 0.0 ? 1.0 : std::pow(v, q);
    }
    best = std::max(best, s);
  }
  return best;
}

// μ(X) = min(‖X‖_F, min_p √(s_{2p}(X) s_{2(1−p)}(Xᵀ))) over a uniform p grid.
inline double mu_parameter(const Matrix& x, std::size_t grid_points = 101) {
  require(grid_points >= 2, ErrorCategory::config, "mu grid needs at least two points");
  require(x.allFinite(), ErrorCategory::numeric, "matrix has non-finite entries");
  // Work in log space once so each grid point is a cheap exp.
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix logs(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = std::abs(x(i, j));
      logs(i, j) = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
    }
  auto power_sum = [&](double q, bool rows) {
    double best = 0.0;
    const Eigen::Index outer = rows ? n : d, inner = rows ? d : n;
    for (Eigen::Index a = 0; a < outer; ++a) {
      double s = 0.0;
      for (Eigen::Index b = 0; b < inner; ++b) {
        double l = rows ? logs(a, b) : logs(b, a);
        if (std::isinf(l)) continue;
        s += q == 0.0 ? 1.0 : std::exp(q * l);
      }
      best = std::max(best, s);
    }
    return best;
  };
  double mu = x.norm();
  for (std::size_t g = 0; g < grid_points; ++g) {
    double p = static_cast<double>(g) / static_cast<double>(grid_points - 1);
    mu = std::min(mu, std::sqrt(power_sum(2.0 * p, true) * power_sum(2.0 * (1.0 - p), false)));
  }
  return mu;
}

// Largest singular value by power iteration on XᵀX.
inline double spectral_norm(const Matrix& x, double rel_tol = 1e-6, std::size_t max_iter = 10000) {
  require(x.allFinite(), ErrorCategory::numeric, "matrix has non-finite entries");
  if (x.size() == 0 || x.norm() == 0.0) return 0.0;
  Vector v = Vector::Ones(x.cols()) / std::sqrt(static_cast<double>(x.cols()));
  // A deterministic but generic start avoids being orthogonal to the top vector.
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) += 1e-3 * static_cast<double>(j % 7);
  v.normalize();
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = x.transpose() * (x * v);
    double lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
    if (std::abs(lambda - prev) <= rel_tol * 1e-3 * lambda) return std::sqrt(lambda);
    prev = lambda;
  }
  return std::sqrt(prev);
}

inline DatasetParams measure_params(const Matrix& x, const PcaModel& exact, const VarianceSelection& major,
                                    const std::optional<VarianceSelection>& minor = std::nullopt,
                                    std::size_t mu_grid = 101) {
  require(x.allFinite(), ErrorCategory::numeric, "matrix has non-finite entries");
  require(exact.rank > 0, ErrorCategory::infeasible, "model has zero rank");
  DatasetParams p;
  p.n = static_cast<double>(x.rows());
  p.n_measured = p.n;
  p.d = static_cast<double>(x.cols());
  p.frobenius_norm = x.norm();
  p.spectral_norm = spectral_norm(x);
  p.mu = mu_parameter(x, mu_grid);
  p.sigma_min = exact.singular_values(static_cast<Eigen::Index>(exact.rank - 1));
  p.kappa = std::max(1.0, exact.singular_values(0) / p.sigma_min);
  p.theta = major.threshold;
  p.p_major = major.explained;
  p.k = static_cast<double>(major.count());
  if (minor) {
    p.theta_min = minor->threshold;
    p.p_minor = minor->explained;
    p.q = static_cast<double>(minor->count());
  }
  p.eta_norm = x.rowwise().squaredNorm().maxCoeff();
  return p;
}

// --- counts --------------------------------------------------------------------

namespace detail {
inline double log2_floor1(double v, bool enabled) {
  return enabled ? std::max(1.0, std::log2(v)) : 1.0;
}
inline void need(double v, const char* name) {
  require(std::isfinite(v) && v > 0.0, ErrorCategory::config, std::string("cost model needs ") + name + " > 0");
}
}  // namespace detail

struct QueryBreakdown {
  double binary_search = 0.0;
  double top_k = 0.0;
  double least_q = 0.0;
  double qmeans = 0.0;
  double total() const { return binary_search + top_k + least_q + qmeans; }
};

inline QueryBreakdown quantum_query_breakdown(const DatasetParams& p, const QuantumErrorParams& e,
                                              const CostModel& cost) {
  const bool lg = cost.include_polylog;
  QueryBreakdown b;
  if (cost.variant == CostVariant::qmeans) {
    detail::need(p.k, "k");
    detail::need(p.d, "d");
    detail::need(p.eta_norm, "eta_norm");
    detail::need(e.delta, "delta");
    detail::need(p.kappa, "kappa");
    detail::need(p.mu, "mu");
    const double k = p.k, eta = p.eta_norm, delta = e.delta;
    double per_iter = k * p.d * eta / (delta * delta) * p.kappa * (p.mu + k * eta / delta) +
                      k * k * std::pow(eta, 1.5) / (delta * delta) * p.kappa * p.mu;
    b.qmeans = cost.quantum_constant * per_iter * cost.qmeans_iterations;
    return b;
  }
  for (auto [v, name] : std::initializer_list<std::pair<double, const char*>>{{p.mu, "mu"}, {p.spectral_norm, "spectral_norm"}, {p.theta, "theta"},
                         {p.p_major, "p"}, {p.k, "k"}, {p.d, "d"}, {e.epsilon, "epsilon"},
                         {e.epsilon_theta, "epsilon_theta"}, {e.eta, "eta"}, {e.delta, "delta"}})
    detail::need(v, name);
  b.binary_search = cost.quantum_constant * p.mu / (e.epsilon_theta * e.eta) *
                    detail::log2_floor1(p.mu / e.epsilon_theta, lg);
  b.top_k = cost.quantum_constant * p.d * p.k * p.spectral_norm * p.mu /
            (p.theta * std::sqrt(p.p_major) * e.epsilon * e.delta * e.delta) *
            detail::log2_floor1(p.k, lg) * detail::log2_floor1(p.d, lg);
  if (cost.variant == CostVariant::pcc_major_minor) {
    for (auto [v, name] : std::initializer_list<std::pair<double, const char*>>{{p.theta_min, "theta_min"}, {p.sigma_min, "sigma_min"},
                           {p.p_minor, "p_min"}, {p.q, "q"}})
      detail::need(v, name);
    b.least_q = cost.quantum_constant * p.theta_min / p.sigma_min * p.mu / e.epsilon * p.q * p.d /
                std::sqrt(p.p_minor);
  }
  return b;
}

inline double quantum_query_count(const DatasetParams& p, const QuantumErrorParams& e, const CostModel& cost) {
  return quantum_query_breakdown(p, e, cost).total();
}

inline double classical_op_count(double n, double d, double k, ClassicalVariant v, bool include_polylog = true) {
  switch (v) {
    case ClassicalVariant::randomized_pca:
      return n * d * k * detail::log2_floor1(k, include_polylog);
    case ClassicalVariant::full_svd:
      return std::min(n * d * d, n * n * d);
    case ClassicalVariant::lloyd:
      return n * d * k;
  }
  return 0.0;
}

inline ClassicalVariant classical_counterpart(CostVariant v) {
  switch (v) {
    case CostVariant::pcc_major_minor: return ClassicalVariant::full_svd;
    case CostVariant::qmeans: return ClassicalVariant::lloyd;
    default: return ClassicalVariant::randomized_pca;
  }
}

inline double classical_count(const DatasetParams& p, const CostModel& cost) {
  double c = cost.classical_constant *
             classical_op_count(p.n, p.d, p.k, classical_counterpart(cost.variant), cost.include_polylog);
  if (cost.variant == CostVariant::qmeans) c *= cost.qmeans_iterations;
  return c;
}

// --- crossover -------------------------------------------------------------------

enum class GrowthModel { fixed, sqrt_n };

struct CrossoverCell {
  double n = 0.0;
  double d = 0.0;
  double quantum = 0.0;
  double classical = 0.0;
  bool advantage() const { return quantum < classical; }
};

struct FrontierPoint {
  double d = 0.0;
  std::optional<double> grid_n;        // smallest advantageous grid n
  std::optional<double> continuous_n;  // where the two counts meet
  bool at_grid_edge = false;           // the smallest grid n is already advantageous
};

struct CrossoverReport {
  CostVariant variant = CostVariant::pcc_major_only;
  std::vector<CrossoverCell> cells;
  std::vector<FrontierPoint> frontier;
  bool any_advantage() const {
    return std::any_of(frontier.begin(), frontier.end(), [](const FrontierPoint& f) { return f.grid_n.has_value(); });
  }
};

inline DatasetParams scaled_params(DatasetParams p, double n, double d, GrowthModel growth) {
  if (growth == GrowthModel::sqrt_n && p.n_measured > 0.0) {
    double s = std::sqrt(n / p.n_measured);
    p.mu *= s;
    p.spectral_norm *= s;
    p.frobenius_norm *= s;
  }
  p.n = n;
  p.d = d;
  return p;
}

inline CrossoverCell crossover_cell(const DatasetParams& tmpl, const QuantumErrorParams& e, const CostModel& cost,
                                    double n, double d, GrowthModel growth) {
  DatasetParams p = scaled_params(tmpl, n, d, growth);
  return {n, d, quantum_query_count(p, e, cost), classical_count(p, cost)};
}

// Log-uniform grid with `per_decade` points per decade, endpoints included.
inline std::vector<double> log_grid(double lo, double hi, std::size_t per_decade) {
  require(lo > 0.0 && hi >= lo && per_decade >= 1, ErrorCategory::config, "invalid log grid");
  std::vector<double> g;
  const double a = std::log10(lo), b = std::log10(hi);
  const auto steps = static_cast<std::size_t>(std::ceil((b - a) * static_cast<double>(per_decade) - 1e-9));
  for (std::size_t i = 0; i <= steps; ++i)
    g.push_back(std::pow(10.0, std::min(b, a + static_cast<double>(i) / static_cast<double>(per_decade))));
  return g;
}

inline CrossoverReport find_crossover(const DatasetParams& tmpl, const QuantumErrorParams& e, const CostModel& cost,
                                      std::vector<double> n_grid, std::vector<double> d_grid,
                                      GrowthModel growth = GrowthModel::fixed) {
  require(!n_grid.empty() && !d_grid.empty(), ErrorCategory::config, "crossover grids must be non-empty");
  std::sort(n_grid.begin(), n_grid.end());
  std::sort(d_grid.begin(), d_grid.end());
  CrossoverReport r;
  r.variant = cost.variant;
  for (double d : d_grid) {
    FrontierPoint f;
    f.d = d;
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      auto c = crossover_cell(tmpl, e, cost, n_grid[i], d, growth);
      r.cells.push_back(c);
      if (!first && c.advantage()) first = i;
    }
    if (first) {
      f.grid_n = n_grid[*first];
      f.at_grid_edge = *first == 0;
      if (*first > 0) {
        double lo = std::log(n_grid[*first - 1]), hi = std::log(n_grid[*first]);
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
          double mid = 0.5 * (lo + hi);
          if (crossover_cell(tmpl, e, cost, std::exp(mid), d, growth).advantage()) hi = mid;
          else lo = mid;
        }
        f.continuous_n = std::exp(hi);
      }
    }
    r.frontier.push_back(f);
  }
  return r;
}

inline void write_crossover_csv(std::ostream& out, const CrossoverReport& r) {
  out << "# variant=" << to_string(r.variant) << "; " << kCostDisclaimer << "\n";
  out << "n,d,quantum_count,classical_count,advantage\n";
  out.precision(10);
  for (const auto& c : r.cells)
    out << c.n << ',' << c.d << ',' << c.quantum << ',' << c.classical << ',' << (c.advantage() ? 1 : 0) << "\n";
}

inline void write_frontier_csv(std::ostream& out, const CrossoverReport& r) {
  out << "# variant=" << to_string(r.variant) << "; " << kCostDisclaimer << "\n";
  if (!r.any_advantage()) out << "# no advantage anywhere on the grid\n";
  out << "d,frontier_n_grid,frontier_n_continuous,at_grid_edge\n";
  out.precision(10);
  for (const auto& f : r.frontier) {
    out << f.d << ',';
    if (f.grid_n) out << *f.grid_n; else out << "none";
    out << ',';
    if (f.continuous_n) out << *f.continuous_n; else out << (f.grid_n ? "below_grid" : "none");
    out << ',' << (f.at_grid_edge ? 1 : 0) << "\n";
  }
}

// --- QRAM resources ----------------------------------------------------------------

struct QramConfig {
  std::string label;
  unsigned word_bits = 1;
  double gate_error = 1e-5;
  double magic_state_failure = 1e-4;
  double cycle_time_s = 200e-9;
  bool allow_extrapolation = false;

  void validate() const {
    require(gate_error > 0.0 && gate_error < 1.0 && magic_state_failure > 0.0 && magic_state_failure < 1.0,
            ErrorCategory::config, "QRAM error probabilities must lie in (0, 1)");
    require(cycle_time_s > 0.0, ErrorCategory::config, "QRAM cycle time must be > 0");
  }

  static QramConfig optimistic() { return {"optimistic", 1, 1e-5, 1e-4, 200e-9, false}; }
  static QramConfig realistic() { return {"realistic", 1, 1e-3, 1e-2, 1e-6, false}; }
};

inline QramConfig qram_preset(const std::string& name) {
  if (name == "optimistic") return QramConfig::optimistic();
  if (name == "realistic") return QramConfig::realistic();
  fail(ErrorCategory::config, "unknown QRAM preset: " + name);
}

// Known bucket-brigade operating points.
struct QramAnchor {
  unsigned address_width;
  double gate_error;
  double magic_state_failure;
  double cycle_time_s;
  double latency_s;
  double physical_qubits;
};

inline constexpr std::array<QramAnchor, 2> kQramAnchors{{
    {34, 1e-5, 1e-4, 200e-9, 1.07e-3, 2.08e14},
    {34, 1e-3, 1e-2, 1e-6, 28.1e-3, 7.31e16},
}};

// Logical-level figures at the anchor width (recorded, not re-derived).
struct QramLogicalFigures {
  double logical_qubits = 1.37e11;
  double depth = 539;
  double t_count = 3.61e11;
  double t_depth = 67;
  double clifford_count = 9.28e11;
};

struct ResourceEstimate {
  double n = 0.0;
  double d = 0.0;
  std::string config;
  unsigned address_width = 0;
  double node_count = 0.0;
  double latency_s = 0.0;
  double physical_qubits = 0.0;
  bool extrapolated = false;
  std::optional<QramLogicalFigures> logical;
};

inline unsigned qram_address_width(double n, double d) {
  require(n * d >= 2.0, ErrorCategory::config, "QRAM sizing needs n*d >= 2");
  const double nd = n * d;
  return static_cast<unsigned>(std::ceil(std::log2(nd * std::log2(nd)) - 1e-12));
}

namespace detail {
inline bool close_rel(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }
}  // namespace detail

inline ResourceEstimate qram_estimate(double n, double d, const QramConfig& cfg) {
  cfg.validate();
  require(cfg.word_bits == 1, ErrorCategory::unsupported,
          "word size other than 1 bit is unsupported without new coefficients");
  ResourceEstimate r;
  r.n = n;
  r.d = d;
  r.config = cfg.label;
  r.address_width = qram_address_width(n, d);
  r.node_count = n * d * std::log2(n * d);
  const QramAnchor* anchor = nullptr;
  for (const auto& a : kQramAnchors)
    if (detail::close_rel(a.gate_error, cfg.gate_error) && detail::close_rel(a.magic_state_failure, cfg.magic_state_failure) &&
        detail::close_rel(a.cycle_time_s, cfg.cycle_time_s))
      anchor = &a;
  require(anchor != nullptr, ErrorCategory::unsupported,
          "QRAM error/cycle configuration has no known coefficients");
  if (r.address_width == anchor->address_width) {
    r.latency_s = anchor->latency_s;
    r.physical_qubits = anchor->physical_qubits;
    r.logical = QramLogicalFigures{};
    return r;
  }
  require(cfg.allow_extrapolation, ErrorCategory::unsupported,
          "address width " + std::to_string(r.address_width) +
              " lies outside the coefficient table; enable extrapolation");
  // Latency grows with circuit depth (linear in width); qubit count with the
  // number of tree nodes (2^width).
  const double ratio = static_cast<double>(r.address_width) / static_cast<double>(anchor->address_width);
  r.latency_s = anchor->latency_s * ratio;
  r.physical_qubits =
      anchor->physical_qubits * std::exp2(static_cast<double>(r.address_width) - static_cast<double>(anchor->address_width));
  r.extrapolated = true;
  return r;
}

inline void write_resource_report(std::ostream& out, const ResourceEstimate& r) {
  out.precision(6);
  out << "n=" << r.n << "\n"
      << "d=" << r.d << "\n"
      << "config=" << r.config << "\n"
      << "address_width_bits=" << r.address_width << "\n"
      << "kp_tree_nodes=" << r.node_count << "\n"
      << "query_latency_ms=" << r.latency_s * 1e3 << "\n"
      << "physical_qubits=" << r.physical_qubits << "\n"
      << "extrapolated=" << (r.extrapolated ? "true" : "false") << "\n";
  if (r.logical) {
    out << "logical_qubits=" << r.logical->logical_qubits << "\n"
        << "circuit_depth=" << r.logical->depth << "\n"
        << "t_count=" << r.logical->t_count << "\n"
        << "t_depth=" << r.logical->t_depth << "\n"
        << "clifford_count=" << r.logical->clifford_count << "\n";
  }
}

}  // namespace qadv
