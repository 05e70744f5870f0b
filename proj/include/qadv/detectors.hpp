#pragma once

// PCA-based anomaly detectors: the principal component classifier (T1 over
// the major components, T2 over the minor ones), its ensemble extension with
// cosine and correlation similarities, and the reconstruction-loss detector.
// Works with exact or noisy models alike.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qadv/data.hpp"
#include "qadv/error.hpp"
#include "qadv/pca.hpp"

namespace qadv {

// Eigenvalues at or below this fraction of the total mass make T-scores blow up.
inline constexpr double kEigenFloor = 1e-20;

// ---------------------------------------------------------------------------
// Thresholds

// Nearest-rank upper quantile: the score at 1-based rank ⌈(1 − α)·N⌉ of the
// ascending sort. Classification is strict (score > c), so about α·N of the
// calibration scores are flagged.
inline double calibrate_threshold(std::vector<double> scores, double alpha) {
  require(!scores.empty(), ErrorCategory::data, "cannot calibrate a threshold on zero scores");
  require(alpha > 0.0 && alpha < 1.0, ErrorCategory::config, "false alarm rate must lie in (0, 1)");
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Percentages with attack as the positive class. Precision is 0 when nothing
// is flagged.
inline Metrics evaluate(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
  require(predictions.size() == labels.size(), ErrorCategory::data,
          "predictions and labels differ in length");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool pred = predictions[i] == Label::attack;
    bool truth = labels[i] == Label::attack;
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  require(tp + fn > 0, ErrorCategory::data, "no positive labels: recall is undefined");
  Metrics m;
  m.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.precision = tp + fp > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.f1 = m.recall + m.precision > 0.0 ? 2.0 * m.recall * m.precision / (m.recall + m.precision) : 0.0;
  m.accuracy = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(labels.size());
  return m;
}

// ---------------------------------------------------------------------------
// Score kernels

namespace detail {

inline void check_eigenvalues(const PcaModel& m) {
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i)
    require(m.eigenvalues(i) > kEigenFloor * m.total_variance, ErrorCategory::numeric,
            "selected component " + std::to_string(i) + " has a vanishing eigenvalue");
}

// Σ_i y_i² / λ_i for each row of Y (n x k).
inline Vector weighted_energy(const Matrix& y, const Vector& eigenvalues) {
  if (y.cols() == 0) return Vector::Zero(y.rows());
  return (y.array().square().rowwise() / eigenvalues.transpose().array()).rowwise().sum();
}

inline Matrix dot_similarity(const Matrix& z, const PcaModel& m) { return z * m.components; }

inline Matrix cosine_similarity(const Matrix& z, const PcaModel& m) {
  Vector zn = z.rowwise().norm();
  require((zn.array() > 0.0).all(), ErrorCategory::data, "cosine similarity of a zero sample");
  Vector en = m.components.colwise().norm().transpose();
  Matrix y = z * m.components;
  return (y.array().colwise() / zn.array()).rowwise() / en.transpose().array();
}

// Pearson correlation between each sample and each component, both read as
// d-length sequences.
inline Matrix correlation_similarity(const Matrix& z, const PcaModel& m) {
  const double d = static_cast<double>(z.cols());
  Matrix zc = z.colwise() - z.rowwise().mean();
  Vector zn = zc.rowwise().norm();
  require((zn.array() > 1e-12 * std::sqrt(d)).all(), ErrorCategory::data,
          "correlation with a constant sample is undefined");
  Matrix ec = m.components.rowwise() - m.components.colwise().mean();
  Vector en = ec.colwise().norm().transpose();
  require((en.array() > 0.0).all(), ErrorCategory::data, "correlation with a constant component");
  Matrix y = zc * ec;
  return (y.array().colwise() / zn.array()).rowwise() / en.transpose().array();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Principal component classifier

enum class PccMode { major_only, major_minor };

struct PccModel {
  PcaModel major;
  std::optional<PcaModel> minor;
  PccMode mode = PccMode::major_only;
  double alpha = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool calibrated = false;

  std::size_t k() const { return major.size(); }
  std::size_t q() const { return minor ? minor->size() : 0; }
};

// Top-k majors and (optionally) the last q minors of the numerical rank.
inline PccModel make_pcc(const PcaModel& exact, std::size_t k, std::size_t q = 0) {
  require(k >= 1 && k <= exact.rank, ErrorCategory::config, "k must lie in [1, rank]");
  require(q <= exact.rank, ErrorCategory::config, "q exceeds the rank");
  PccModel pcc;
  std::vector<std::size_t> maj(k);
  for (std::size_t i = 0; i < k; ++i) maj[i] = i;
  pcc.major = subset(exact, maj);
  if (q > 0) {
    std::vector<std::size_t> mins;
    for (std::size_t i = exact.rank - q; i < exact.rank; ++i) mins.push_back(i);
    pcc.minor = subset(exact, mins);
    pcc.mode = PccMode::major_minor;
  }
  detail::check_eigenvalues(pcc.major);
  if (pcc.minor) detail::check_eigenvalues(*pcc.minor);
  return pcc;
}

inline PccModel make_pcc(PcaModel major, std::optional<PcaModel> minor = std::nullopt) {
  PccModel pcc;
  pcc.major = std::move(major);
  pcc.minor = std::move(minor);
  pcc.mode = pcc.minor ? PccMode::major_minor : PccMode::major_only;
  detail::check_eigenvalues(pcc.major);
  if (pcc.minor) detail::check_eigenvalues(*pcc.minor);
  return pcc;
}

struct PccScores {
  Vector t1;
  Vector t2;  // zeros in major_only mode
};

inline PccScores pcc_scores(const Matrix& z, const PccModel& model) {
  require(static_cast<std::size_t>(z.cols()) == model.major.dim(), ErrorCategory::data,
          "sample dimension does not match the model");
  PccScores s;
  s.t1 = detail::weighted_energy(detail::dot_similarity(z, model.major), model.major.eigenvalues);
  s.t2 = model.minor ? detail::weighted_energy(detail::dot_similarity(z, *model.minor), model.minor->eigenvalues)
                     : Vector::Zero(z.rows());
  return s;
}

inline std::pair<double, double> pcc_scores(const Vector& z, const PccModel& model) {
  auto s = pcc_scores(Matrix(z.transpose()), model);
  return {s.t1(0), s.t2(0)};
}

namespace detail {
inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Matrix normal_rows(const DataMatrix& split) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < split.labels.size(); ++i)
    if (split.labels[i] == Label::normal) rows.push_back(static_cast<Eigen::Index>(i));
  if (split.labels.empty())
    for (Eigen::Index i = 0; i < split.values.rows(); ++i) rows.push_back(i);
  require(!rows.empty(), ErrorCategory::data, "calibration split has no normal rows");
  Matrix out(static_cast<Eigen::Index>(rows.size()), split.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = split.values.row(rows[i]);
  return out;
}
}  // namespace detail

// c1 (and c2) from the normal rows of the calibration split.
inline void calibrate(PccModel& model, const Matrix& normals, double alpha) {
  auto s = pcc_scores(normals, model);
  model.alpha = alpha;
  model.c1 = calibrate_threshold(detail::to_std(s.t1), alpha);
  if (model.mode == PccMode::major_minor) model.c2 = calibrate_threshold(detail::to_std(s.t2), alpha);
  model.calibrated = true;
}

inline void calibrate(PccModel& model, const DataMatrix& validation, double alpha) {
  calibrate(model, detail::normal_rows(validation), alpha);
}

inline std::vector<Label> classify(const Matrix& z, const PccModel& model) {
  require(model.calibrated, ErrorCategory::config, "PCC model is not calibrated");
  auto s = pcc_scores(z, model);
  std::vector<Label> out(static_cast<std::size_t>(z.rows()), Label::normal);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    bool attack = s.t1(i) > model.c1;
    if (model.mode == PccMode::major_minor) attack = attack || s.t2(i) > model.c2;
    if (attack) out[static_cast<std::size_t>(i)] = Label::attack;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble PCC

enum class Similarity { dot = 0, cosine = 1, correlation = 2 };

struct EnsembleModel {
  PcaModel major;
  std::optional<PcaModel> minor;
  double alpha = 0.0;
  // [similarity][0 = major sum, 1 = minor sum]
  std::array<std::array<double, 2>, 3> thresholds{};
  bool calibrated = false;
};

inline EnsembleModel make_ensemble(const PccModel& pcc) {
  EnsembleModel e;
  e.major = pcc.major;
  e.minor = pcc.minor;
  return e;
}

// Six sums: for each similarity, the T1-style sum over the majors and the
// T2-style sum over the minors (zero without minors).
struct EnsembleScores {
  std::array<std::array<Vector, 2>, 3> sums;
};

inline EnsembleScores ensemble_scores(const Matrix& z, const EnsembleModel& model) {
  require(static_cast<std::size_t>(z.cols()) == model.major.dim(), ErrorCategory::data,
          "sample dimension does not match the model");
  EnsembleScores s;
  auto fill = [&](const PcaModel& m, int slot) {
    s.sums[0][slot] = detail::weighted_energy(detail::dot_similarity(z, m), m.eigenvalues);
    s.sums[1][slot] = detail::weighted_energy(detail::cosine_similarity(z, m), m.eigenvalues);
    s.sums[2][slot] = detail::weighted_energy(detail::correlation_similarity(z, m), m.eigenvalues);
  };
  fill(model.major, 0);
  if (model.minor) {
    fill(*model.minor, 1);
  } else {
    for (auto& per : s.sums) per[1] = Vector::Zero(z.rows());
  }
  return s;
}

inline std::array<double, 6> ensemble_scores(const Vector& z, const EnsembleModel& model) {
  auto s = ensemble_scores(Matrix(z.transpose()), model);
  std::array<double, 6> out{};
  for (int m = 0; m < 3; ++m)
    for (int g = 0; g < 2; ++g) out[static_cast<std::size_t>(2 * m + g)] = s.sums[m][g](0);
  return out;
}

inline void calibrate(EnsembleModel& model, const Matrix& normals, double alpha) {
  auto s = ensemble_scores(normals, model);
  model.alpha = alpha;
  for (int m = 0; m < 3; ++m) {
    model.thresholds[m][0] = calibrate_threshold(detail::to_std(s.sums[m][0]), alpha);
    model.thresholds[m][1] =
        model.minor ? calibrate_threshold(detail::to_std(s.sums[m][1]), alpha) : 0.0;
  }
  model.calibrated = true;
}

inline void calibrate(EnsembleModel& model, const DataMatrix& validation, double alpha) {
  calibrate(model, detail::normal_rows(validation), alpha);
}

// Attack when any of the sums exceeds its threshold.
inline std::vector<Label> classify(const Matrix& z, const EnsembleModel& model) {
  require(model.calibrated, ErrorCategory::config, "ensemble model is not calibrated");
  auto s = ensemble_scores(z, model);
  const int groups = model.minor ? 2 : 1;
  std::vector<Label> out(static_cast<std::size_t>(z.rows()), Label::normal);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    bool attack = false;
    for (int m = 0; m < 3 && !attack; ++m)
      for (int g = 0; g < groups && !attack; ++g) attack = s.sums[m][g](i) > model.thresholds[m][g];
    if (attack) out[static_cast<std::size_t>(i)] = Label::attack;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction loss

struct ReconModel {
  PcaModel model;  // the k retained components
  double threshold = 0.0;
  bool calibrated = false;
};

inline ReconModel make_recon(const PcaModel& exact, std::size_t k) {
  require(k >= 1 && k <= exact.size(), ErrorCategory::config, "k must lie in [1, components]");
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  return ReconModel{subset(exact, idx), 0.0, false};
}

// ‖z − Σ_i (e_iᵀz) e_i‖² per row.
inline Vector recon_scores(const Matrix& z, const ReconModel& model) {
  require(static_cast<std::size_t>(z.cols()) == model.model.dim(), ErrorCategory::data,
          "sample dimension does not match the model");
  const Matrix& e = model.model.components;
  return (z - (z * e) * e.transpose()).rowwise().squaredNorm();
}

inline void set_threshold(ReconModel& model, double t) {
  require(t > 0.0, ErrorCategory::config, "outlier threshold must be > 0");
  model.threshold = t;
  model.calibrated = true;
}

// Threshold maximizing F1 on a labelled validation split; candidates are the
// validation scores themselves, ties broken toward the larger threshold.
inline double tune_threshold_f1(const Vector& scores, const std::vector<Label>& labels) {
  require(static_cast<std::size_t>(scores.size()) == labels.size() && !labels.empty(), ErrorCategory::data,
          "threshold tuning needs one label per score");
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  std::size_t positives = 0;
  for (Label l : labels) positives += l == Label::attack;
  require(positives > 0, ErrorCategory::data, "threshold tuning needs attack samples");

  // Walk thresholds from the largest score down; flagged = scores strictly above.
  double best_f1 = -1.0, best_t = scores(static_cast<Eigen::Index>(order[0]));
  std::size_t tp = 0, flagged = 0, i = 0;
  while (i < order.size()) {
    const double t = scores(static_cast<Eigen::Index>(order[i]));
    double f1 = flagged > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(flagged + positives) : 0.0;
    if (f1 > best_f1 && t > 0.0) {
      best_f1 = f1;
      best_t = t;
    }
    while (i < order.size() && scores(static_cast<Eigen::Index>(order[i])) == t) {
      ++flagged;
      tp += labels[order[i]] == Label::attack;
      ++i;
    }
  }
  return best_t;
}

inline std::vector<Label> classify(const Matrix& z, const ReconModel& model) {
  require(model.calibrated, ErrorCategory::config, "reconstruction model has no threshold");
  Vector s = recon_scores(z, model);
  std::vector<Label> out(static_cast<std::size_t>(z.rows()), Label::normal);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > model.threshold) out[static_cast<std::size_t>(i)] = Label::attack;
  return out;
}

template <typename Model>
inline Label classify(const Vector& z, const Model& model) {
  return classify(Matrix(z.transpose()), model).front();
}

}  // namespace qadv
