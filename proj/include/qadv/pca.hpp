#pragma once

// Exact PCA on a standardized training matrix. Eigenvalues are those of
// XᵀX itself (no 1/(n-1) factor); every consumer divides by them, so any
// consistent scaling cancels once thresholds are calibrated.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qadv/data.hpp"
#include "qadv/error.hpp"

namespace qadv {

// Singular values below this fraction of σ₁ are treated as numerical zeros.
inline constexpr double kRankFloor = 1e-10;

// Perturbations actually injected into a noisy model, per retained component.
struct ErrorCertificate {
  double epsilon = 0.0;        // singular-value error bound
  double epsilon_theta = 0.0;  // error used by the threshold search
  double eta = 0.0;
  double delta = 0.0;          // vector error bound (ℓ2)
  double gamma = 0.0;
  double heuristic_divisor = 1.0;
  std::vector<double> sigma_errors;   // σ̄ − σ
  std::vector<double> lambda_errors;  // λ̄ − λ
  std::vector<double> vector_errors;  // ‖ē − e‖₂
  std::vector<bool> failed;           // failure-band draws (outside the bound by design)
};

struct PcaModel {
  Matrix components;        // d x m, column i is e_i
  Vector eigenvalues;       // λ_i, non-increasing for exact models
  Vector singular_values;   // σ_i = √λ_i
  double total_variance = 0.0;  // Σ_j λ_j of the exact spectrum
  std::size_t rank = 0;
  std::vector<std::size_t> source_index;  // position of each component in the exact model
  std::optional<ErrorCertificate> certificate;

  std::size_t dim() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(components.cols()); }
  double factor_ratio(std::size_t i) const {
    return eigenvalues(static_cast<Eigen::Index>(i)) / total_variance;
  }
  Vector component(std::size_t i) const { return components.col(static_cast<Eigen::Index>(i)); }
  bool exact() const { return !certificate.has_value(); }
};

// Flip each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& components) {
  for (Eigen::Index j = 0; j < components.cols(); ++j) {
    Eigen::Index arg = 0;
    components.col(j).cwiseAbs().maxCoeff(&arg);
    if (components(arg, j) < 0.0) components.col(j) *= -1.0;
  }
}

inline PcaModel fit_exact_pca(const Matrix& x) {
  require(x.rows() >= 2 && x.cols() >= 1, ErrorCategory::data,
          "PCA needs at least 2 rows and 1 column");
  require(x.allFinite(), ErrorCategory::numeric, "PCA input has non-finite entries");

  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeFullV);
  const Eigen::Index d = x.cols();
  PcaModel m;
  m.components = svd.matrixV();
  m.singular_values = Vector::Zero(d);
  m.singular_values.head(svd.singularValues().size()) = svd.singularValues();
  m.eigenvalues = m.singular_values.array().square();
  canonicalize_signs(m.components);
  m.total_variance = m.eigenvalues.sum();
  require(m.total_variance > 0.0, ErrorCategory::numeric, "PCA input has zero variance");
  const double floor = kRankFloor * m.singular_values(0);
  m.rank = static_cast<std::size_t>((m.singular_values.array() > floor).count());
  m.source_index.resize(static_cast<std::size_t>(d));
  std::iota(m.source_index.begin(), m.source_index.end(), std::size_t{0});
  return m;
}

inline PcaModel fit_exact_pca(const DataMatrix& train) { return fit_exact_pca(train.values); }

// Keep a subset of components (in the given order) as a standalone model.
inline PcaModel subset(const PcaModel& m, const std::vector<std::size_t>& idx) {
  PcaModel s;
  const auto k = static_cast<Eigen::Index>(idx.size());
  s.components.resize(m.components.rows(), k);
  s.eigenvalues.resize(k);
  s.singular_values.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
    s.components.col(j) = m.components.col(i);
    s.eigenvalues(j) = m.eigenvalues(i);
    s.singular_values(j) = m.singular_values(i);
    s.source_index.push_back(m.source_index[static_cast<std::size_t>(i)]);
  }
  s.total_variance = m.total_variance;
  s.rank = idx.size();
  s.certificate = m.certificate;
  return s;
}

enum class SelectionMode { major, minor };

struct VarianceSelection {
  SelectionMode mode = SelectionMode::major;
  std::vector<std::size_t> indices;  // into the model, descending σ
  double explained = 0.0;
  double threshold = 0.0;  // θ (major: σ_i > θ) or θ_min (minor: σ_i < θ_min)

  std::size_t count() const { return indices.size(); }
};

namespace detail {
inline bool reached(double cumulative, double target) {
  return cumulative >= target - 1e-12 * std::max(1.0, target);
}
}  // namespace detail

// Major: smallest k whose leading mass reaches p. Minor: smallest q whose
// tail mass (numerical zeros excluded) reaches p. Ties at the boundary are
// kept together; the threshold sits halfway across the boundary gap.
inline VarianceSelection select_for_variance(const PcaModel& m, double p_target, SelectionMode mode) {
  require(p_target > 0.0 && p_target <= 1.0, ErrorCategory::config,
          "target explained variance must lie in (0, 1]");
  require(m.total_variance > 0.0, ErrorCategory::infeasible, "model has zero eigenvalue mass");
  VarianceSelection sel;
  sel.mode = mode;
  const auto& s = m.singular_values;
  const std::size_t n = m.size();

  if (mode == SelectionMode::major) {
    double cum = 0.0;
    std::size_t k = 0;
    while (k < n && !detail::reached(cum, p_target)) cum += m.factor_ratio(k++);
    require(detail::reached(cum, p_target), ErrorCategory::infeasible,
            "target variance unreachable");
    while (k < n && s(static_cast<Eigen::Index>(k)) == s(static_cast<Eigen::Index>(k - 1)))
      cum += m.factor_ratio(k++);
    for (std::size_t i = 0; i < k; ++i) sel.indices.push_back(i);
    sel.explained = cum;
    double last = s(static_cast<Eigen::Index>(k - 1));
    sel.threshold = k < n ? 0.5 * (last + s(static_cast<Eigen::Index>(k))) : 0.5 * last;
    return sel;
  }

  const std::size_t pool = m.rank;
  require(pool > 0, ErrorCategory::infeasible, "no non-zero singular values for a minor selection");
  double cum = 0.0;
  std::size_t q = 0;
  while (q < pool && !detail::reached(cum, p_target)) cum += m.factor_ratio(pool - 1 - q++);
  require(detail::reached(cum, p_target), ErrorCategory::infeasible,
          "target minor variance unreachable");
  while (q < pool && s(static_cast<Eigen::Index>(pool - 1 - q)) ==
                         s(static_cast<Eigen::Index>(pool - q)))
    cum += m.factor_ratio(pool - 1 - q++);
  for (std::size_t i = pool - q; i < pool; ++i) sel.indices.push_back(i);
  sel.explained = cum;
  double top = s(static_cast<Eigen::Index>(pool - q));
  sel.threshold = q < pool ? 0.5 * (top + s(static_cast<Eigen::Index>(pool - q - 1))) : 2.0 * top;
  return sel;
}

// Components selected by an explicit threshold on σ.
inline VarianceSelection select_by_threshold(const PcaModel& m, double threshold, SelectionMode mode) {
  VarianceSelection sel;
  sel.mode = mode;
  sel.threshold = threshold;
  const double floor = kRankFloor * m.singular_values.maxCoeff();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double s = m.singular_values(static_cast<Eigen::Index>(i));
    bool in = mode == SelectionMode::major ? s > threshold : (s < threshold && s > floor);
    if (in) {
      sel.indices.push_back(i);
      sel.explained += m.factor_ratio(i);
    }
  }
  return sel;
}

struct Reconstruction {
  Vector projection;
  Vector reconstruction;
  double sse = 0.0;
};

inline Reconstruction project_reconstruct(const Vector& z, const PcaModel& m, std::size_t k) {
  require(static_cast<std::size_t>(z.size()) == m.dim(), ErrorCategory::data,
          "sample has " + std::to_string(z.size()) + " features, model expects " +
              std::to_string(m.dim()));
  require(k <= m.size(), ErrorCategory::config, "k exceeds the number of components");
  Reconstruction r;
  auto basis = m.components.leftCols(static_cast<Eigen::Index>(k));
  r.projection = basis.transpose() * z;
  r.reconstruction = basis * r.projection;
  r.sse = (z - r.reconstruction).squaredNorm();
  return r;
}

// Flat text format: a header, key/value metadata, the singular values, then
// the component matrix row-major (one component per line), then an optional
// certificate block.
inline void write_model(std::ostream& out, const PcaModel& m) {
  out << "qadv-pca-model 1\n" << std::setprecision(17);
  out << "dim " << m.dim() << "\ncomponents " << m.size() << "\nrank " << m.rank
      << "\ntotal_variance " << m.total_variance << "\n";
  out << "source_index";
  for (auto i : m.source_index) out << ' ' << i;
  out << "\nsingular_values";
  for (Eigen::Index i = 0; i < m.singular_values.size(); ++i) out << ' ' << m.singular_values(i);
  out << "\neigenvalues";
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) out << ' ' << m.eigenvalues(i);
  out << '\n';
  for (Eigen::Index j = 0; j < m.components.cols(); ++j) {
    out << "component";
    for (Eigen::Index i = 0; i < m.components.rows(); ++i) out << ' ' << m.components(i, j);
    out << '\n';
  }
  if (m.certificate) {
    const auto& c = *m.certificate;
    out << "certificate " << c.epsilon << ' ' << c.epsilon_theta << ' ' << c.eta << ' ' << c.delta
        << ' ' << c.gamma << ' ' << c.heuristic_divisor << '\n';
    auto row = [&](const char* key, const std::vector<double>& v) {
      out << key;
      for (double x : v) out << ' ' << x;
      out << '\n';
    };
    row("sigma_errors", c.sigma_errors);
    row("lambda_errors", c.lambda_errors);
    row("vector_errors", c.vector_errors);
    out << "failed";
    for (bool b : c.failed) out << ' ' << (b ? 1 : 0);
    out << '\n';
  }
  out << "end\n";
}

inline PcaModel read_model(std::istream& in) {
  auto bad = [](const std::string& what) { fail(ErrorCategory::data, "model file: " + what); };
  std::string line, key;
  if (!std::getline(in, line) || line != "qadv-pca-model 1") bad("unrecognized header");
  PcaModel m;
  std::size_t dim = 0, count = 0;
  std::vector<std::vector<double>> comps;
  auto read_values = [](std::istringstream& ss) {
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    return v;
  };
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    ss >> key;
    if (key == "end") break;
    if (key == "dim") ss >> dim;
    else if (key == "components") ss >> count;
    else if (key == "rank") ss >> m.rank;
    else if (key == "total_variance") ss >> m.total_variance;
    else if (key == "source_index") {
      std::size_t i;
      while (ss >> i) m.source_index.push_back(i);
    } else if (key == "singular_values") {
      auto v = read_values(ss);
      m.singular_values = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else if (key == "eigenvalues") {
      auto v = read_values(ss);
      m.eigenvalues = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else if (key == "component") {
      comps.push_back(read_values(ss));
    } else if (key == "certificate") {
      ErrorCertificate c;
      ss >> c.epsilon >> c.epsilon_theta >> c.eta >> c.delta >> c.gamma >> c.heuristic_divisor;
      m.certificate = c;
    } else if (key == "sigma_errors" && m.certificate) {
      m.certificate->sigma_errors = read_values(ss);
    } else if (key == "lambda_errors" && m.certificate) {
      m.certificate->lambda_errors = read_values(ss);
    } else if (key == "vector_errors" && m.certificate) {
      m.certificate->vector_errors = read_values(ss);
    } else if (key == "failed" && m.certificate) {
      int b;
      while (ss >> b) m.certificate->failed.push_back(b != 0);
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  if (key != "end") bad("truncated file");
  if (comps.size() != count || static_cast<std::size_t>(m.singular_values.size()) != count ||
      static_cast<std::size_t>(m.eigenvalues.size()) != count || m.source_index.size() != count)
    bad("inconsistent component count");
  m.components.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) {
    if (comps[j].size() != dim) bad("component length mismatch");
    for (std::size_t i = 0; i < dim; ++i)
      m.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = comps[j][i];
  }
  return m;
}

}  // namespace qadv
