#include <gtest/gtest.h>

#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "qadv/data.hpp"

using namespace qadv;

namespace {

RawTable parse(const std::string& csv, DatasetSchema schema = {}) {
  std::istringstream in(csv);
  return parse_dataset(in, schema, "t");
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCategory::config;
}

RawTable counting_table(std::size_t normals, std::size_t attacks) {
  RawTable t;
  t.name = "count";
  t.feature_names = {"a", "b"};
  t.values.resize(static_cast<Eigen::Index>(normals + attacks), 2);
  for (std::size_t i = 0; i < normals + attacks; ++i) {
    t.values(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    t.values(static_cast<Eigen::Index>(i), 1) = static_cast<double>((i * 7) % 13);
    t.labels.push_back(i < normals ? Label::normal : Label::attack);
  }
  return t;
}

}  // namespace

TEST(Load, ThreeRowsTwoFeatures) {
  auto t = parse("x,y,label\n1,2,normal\n3,4,dos\n5,6,normal\n");
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.labels[1], Label::attack);
  EXPECT_EQ(t.labels[0], Label::normal);
  EXPECT_DOUBLE_EQ(t.values(2, 1), 6.0);
}

TEST(Load, ConstantColumnIsFlagged) {
  auto t = parse("x,c,label\n1,5,normal\n2,5,dos\n3,5,normal\n");
  ASSERT_EQ(t.constant_columns.size(), 1u);
  EXPECT_EQ(t.constant_columns[0], 1u);
}

TEST(Load, NonNumericColumnsDroppedOrRejected) {
  const std::string csv = "x,proto,label\n1,tcp,normal\n2,udp,dos\n";
  auto t = parse(csv);
  EXPECT_EQ(t.cols(), 1u);
  ASSERT_EQ(t.dropped_columns.size(), 1u);
  EXPECT_EQ(t.dropped_columns[0], "proto");
  DatasetSchema strict;
  strict.reject_non_numeric = true;
  EXPECT_EQ(category_of([&] { parse(csv, strict); }), ErrorCategory::data);
}

TEST(Load, QuotedFieldsAndMissingRows) {
  auto t = parse("\"x\",y,label\n\"1\",2,normal\n,4,normal\n5,nan,dos\n7,8,\"dos\"\n");
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.dropped_rows, 2u);
  EXPECT_DOUBLE_EQ(t.values(1, 0), 7.0);
}

TEST(Load, Errors) {
  DatasetSchema explicit_attacks;
  explicit_attacks.attack_labels = {"dos"};
  EXPECT_EQ(category_of([&] { parse("x,label\n1,normal\n2,probe\n", explicit_attacks); }), ErrorCategory::data);
  EXPECT_EQ(category_of([&] { parse("a,label\nfoo,normal\n"); }), ErrorCategory::data);
  EXPECT_EQ(category_of([&] { parse("x,y\n1,2\n"); }), ErrorCategory::data);
  EXPECT_EQ(category_of([&] { load_dataset("/nonexistent/file.csv", {}); }), ErrorCategory::io);
}

TEST(Scaler, FittingDataIsStandardized) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(4.0, 9.0);
  Matrix x(500, 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng) * static_cast<double>(j + 1);
  Scaler s = Scaler::fit(x);
  Matrix z = s.apply(x);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    double m = z.col(j).mean();
    double var = (z.col(j).array() - m).square().mean();
    EXPECT_LE(std::abs(m), 1e-9);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
  }
  // Re-applying the same fitted scaler is not idempotent; refitting is.
  Matrix twice = s.apply(z);
  EXPECT_GT((twice - z).norm(), 1e-3);
  EXPECT_LE((Scaler::fit(z).apply(z) - z).norm(), 1e-9 * z.norm());
}

TEST(Scaler, ZeroVarianceRejected) {
  Matrix x(3, 2);
  x << 1, 2, 1, 3, 1, 4;
  EXPECT_EQ(category_of([&] { Scaler::fit(x); }), ErrorCategory::data);
}

TEST(Quantile, ReferenceOracleAndRange) {
  // Sort-and-index oracle: with Q = n the references are the order statistics.
  Matrix x(5, 1);
  x << 3, 1, 4, 1.5, 9;
  auto q = QuantileTransform::fit(x, 5);
  std::vector<double> sorted{1, 1.5, 3, 4, 9};
  for (Eigen::Index l = 0; l < 5; ++l) EXPECT_DOUBLE_EQ(q.references(l, 0), sorted[static_cast<std::size_t>(l)]);
  EXPECT_DOUBLE_EQ(q.map(3.0, 0), 0.5);
  EXPECT_DOUBLE_EQ(q.map(-10.0, 0), 0.0);
  EXPECT_DOUBLE_EQ(q.map(100.0, 0), 1.0);
  EXPECT_DOUBLE_EQ(q.map(3.5, 0), 0.625);
}

TEST(Quantile, TiesAverageLevels) {
  Matrix x(4, 1);
  x << 0, 1, 1, 2;
  auto q = QuantileTransform::fit(x, 4);
  EXPECT_DOUBLE_EQ(q.map(1.0, 0), 0.5);
}

TEST(Sampling, SystematicStrideTwo) {
  std::vector<std::size_t> pool(10000);
  std::iota(pool.begin(), pool.end(), 0);
  auto s = systematic_sample(pool, 5000);
  ASSERT_EQ(s.size(), 5000u);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], 2 * i);
  EXPECT_EQ(systematic_sample(pool, 5000), s);
  EXPECT_EQ(category_of([&] { systematic_sample(pool, 10001); }), ErrorCategory::infeasible);
}

TEST(Preprocess, TrainIndicesAndStandardization) {
  SplitSpec spec;
  spec.train_normals = 5000;
  spec.trim_fraction = 0.0;
  auto s = preprocess(counting_table(10000, 300), spec);
  ASSERT_EQ(s.train_rows.size(), 5000u);
  for (std::size_t i = 0; i < 5000; ++i) EXPECT_EQ(s.train_rows[i], 2 * i);
  auto c = class_counts(s.test);
  EXPECT_EQ(c.normals, 5000u);
  EXPECT_EQ(c.attacks, 300u);
  for (Eigen::Index j = 0; j < s.train.values.cols(); ++j) {
    auto col = s.train.values.col(j).array();
    EXPECT_LE(std::abs(col.mean()), 1e-9);
    EXPECT_NEAR(std::sqrt((col - col.mean()).square().mean()), 1.0, 1e-9);
  }
}

TEST(Preprocess, ConstantFeaturesRemovedAndCountsSum) {
  SyntheticSpec spec;
  spec.normals = 3000;
  spec.attacks = 500;
  spec.features = 8;
  spec.latent = 4;
  spec.constant_features = 2;
  auto table = make_synthetic(spec);
  SplitSpec split;
  split.train_normals = 1000;
  split.validation_normals = 200;
  split.validation_attacks = 100;
  auto s = preprocess(table, split);
  EXPECT_EQ(s.removed_features.size(), 2u);
  EXPECT_EQ(s.train.cols(), 8u);
  EXPECT_TRUE(constant_columns(s.train.values).empty());
  auto v = class_counts(s.validation);
  EXPECT_EQ(v.normals + v.attacks, s.validation.rows());
  EXPECT_EQ(v.attacks, 100u);
  auto t = class_counts(s.test);
  EXPECT_EQ(t.normals, 3000u - 1000u - 200u);
  EXPECT_EQ(t.attacks, 400u);
  EXPECT_GT(s.trimmed_rows, 0u);
  auto m = split_manifest(s);
  EXPECT_EQ(m["counts"]["test"]["attacks"].get<std::size_t>(), 400u);
}

TEST(Preprocess, QuantileThenScale) {
  SplitSpec spec;
  spec.train_normals = 2000;
  spec.trim_fraction = 0.0;
  spec.quantiles = 751;
  auto s = preprocess(counting_table(4000, 50), spec);
  ASSERT_TRUE(s.quantile.has_value());
  EXPECT_EQ(s.quantile->references.rows(), 751);
  EXPECT_LE(std::abs(s.train.values.col(0).mean()), 1e-9);
}

TEST(Preprocess, Deterministic) {
  SplitSpec spec;
  spec.train_normals = 700;
  spec.mode = SamplingMode::random;
  spec.seed = 11;
  auto t = counting_table(2000, 100);
  EXPECT_EQ(preprocess(t, spec).train_rows, preprocess(t, spec).train_rows);
}

TEST(Preprocess, Infeasible) {
  SplitSpec spec;
  spec.train_normals = 5000;
  EXPECT_EQ(category_of([&] { preprocess(counting_table(1000, 10), spec); }), ErrorCategory::infeasible);
  spec.train_normals = 100;
  spec.test_attacks = 50;
  EXPECT_EQ(category_of([&] { preprocess(counting_table(1000, 10), spec); }), ErrorCategory::infeasible);
  spec.test_attacks.reset();
  spec.trim_fraction = 0.5;
  EXPECT_EQ(category_of([&] { preprocess(counting_table(1000, 10), spec); }), ErrorCategory::config);
}

TEST(ClassCounts, EmptyLabelsIsError) {
  DataMatrix m;
  m.values = Matrix::Zero(3, 2);
  EXPECT_EQ(category_of([&] { class_counts(m); }), ErrorCategory::data);
}

TEST(Synthetic, RoundTripsThroughCsv) {
  SyntheticSpec spec;
  spec.normals = 50;
  spec.attacks = 10;
  spec.features = 5;
  spec.latent = 2;
  auto t = make_synthetic(spec);
  std::stringstream io;
  write_csv(io, t);
  auto back = parse_dataset(io, {}, "s");
  EXPECT_EQ(back.rows(), 60u);
  EXPECT_LE((back.values - t.values).norm(), 1e-12 * t.values.norm());
  EXPECT_EQ(back.labels, t.labels);
}
