#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/tensor.hpp"

namespace oacsplit::bench {

// Complex Gaussian class clusters. Each class mean has CN(0, s^2 / D)
// entries (D = features), samples add CN(0, 1) noise, so class means sit
// about s * sqrt(2) apart. Image datasets reshape the features to (C, H, W).
struct DatasetSpec {
  int classes = 10;
  int train_per_class = 400;
  int test_per_class = 100;
  bool image = true;
  int channels = 2;
  int height = 6;
  int width = 6;
  int features = 16;  // used when image is false
  double separation = 4.0;

  Index feature_count() const { return image ? static_cast<Index>(channels) * height * width : features; }
  Shape sample_shape() const { return image ? Shape{channels, height, width} : Shape{features}; }
};

struct Dataset {
  DatasetSpec spec;
  Tensor x_train, x_test;
  std::vector<int> y_train, y_test;
  CMatrix means;  // features x classes
};

inline Shape batch_shape(const DatasetSpec& s, Index batch) {
  Shape out{batch};
  for (Index d : s.sample_shape()) out.push_back(d);
  return out;
}

inline Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.classes < 1 || spec.train_per_class < 0 || spec.test_per_class < 0 || spec.feature_count() < 1) {
    throw DimensionError("dataset: sizes must be positive");
  }
  Rng rng(seed, 0x5eed);
  const Index d = spec.feature_count();
  Dataset ds;
  ds.spec = spec;
  ds.means = random_complex(d, spec.classes, rng, spec.separation * spec.separation / static_cast<double>(d));
  auto draw = [&](int per_class, Tensor& x, std::vector<int>& y) {
    std::vector<int> labels;
    for (int c = 0; c < spec.classes; ++c) labels.insert(labels.end(), static_cast<std::size_t>(per_class), c);
    rng.shuffle(labels.begin(), labels.end());
    const Index n = static_cast<Index>(labels.size());
    x = Tensor(batch_shape(spec, n));
    auto m = x.mat();
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < d; ++i) m(i, j) = ds.means(i, labels[static_cast<std::size_t>(j)]) + rng.complex_normal();
    }
    y = std::move(labels);
  };
  draw(spec.train_per_class, ds.x_train, ds.y_train);
  draw(spec.test_per_class, ds.x_test, ds.y_test);
  return ds;
}

// Rows [first, first + count) of a sample-major tensor.
inline Tensor take_rows(const Tensor& x, Index first, Index count) {
  const Index per = x.features();
  Shape s = x.shape;
  s[0] = count;
  return Tensor(s, x.data.segment(first * per, count * per));
}

inline Tensor gather_rows(const Tensor& x, const std::vector<Index>& rows) {
  const Index per = x.features();
  Shape s = x.shape;
  s[0] = static_cast<Index>(rows.size());
  Tensor out(s);
  for (std::size_t i = 0; i < rows.size(); ++i) out.data.segment(static_cast<Index>(i) * per, per) = x.data.segment(rows[i] * per, per);
  return out;
}

// Accuracy of assigning each sample to the nearest class mean.
inline double nearest_centroid_accuracy(const Tensor& x, const std::vector<int>& y, const CMatrix& means) {
  const auto m = x.mat();
  Index correct = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    Index best = 0;
    (means.colwise() - m.col(j)).colwise().squaredNorm().minCoeff(&best);
    if (best == y[static_cast<std::size_t>(j)]) ++correct;
  }
  return m.cols() ? static_cast<double>(correct) / static_cast<double>(m.cols()) : 0.0;
}

// CSV: label, then re/im pairs of every feature in row-major sample order.
inline std::string dataset_csv(const Tensor& x, const std::vector<int>& y) {
  std::string out = "label";
  const Index per = x.features();
  for (Index i = 0; i < per; ++i) out += ",re" + std::to_string(i) + ",im" + std::to_string(i);
  out += '\n';
  const auto m = x.mat();
  char buf[64];
  for (Index j = 0; j < m.cols(); ++j) {
    out += std::to_string(y[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < per; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", m(i, j).real(), m(i, j).imag());
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::json spec_to_json(const DatasetSpec& s) {
  return {{"classes", s.classes}, {"train_per_class", s.train_per_class}, {"test_per_class", s.test_per_class},
          {"image", s.image},     {"channels", s.channels},               {"height", s.height},
          {"width", s.width},     {"features", s.features},               {"separation", s.separation}};
}

}  // namespace oacsplit::bench
