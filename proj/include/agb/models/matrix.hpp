#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "agb/core/error.hpp"

namespace agb::models {

/// Row-major design matrix: one row per sample.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const noexcept { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
};

/// Z-score transform fitted on training rows. Constant columns keep unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean.assign(x.cols, 0.0);
    s.scale.assign(x.cols, 1.0);
    if (x.rows == 0) return s;
    for (std::size_t j = 0; j < x.cols; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
      m /= static_cast<double>(x.rows);
      double v = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
      v /= static_cast<double>(x.rows);
      s.mean[j] = m;
      s.scale[j] = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> row) const {
    if (row.size() != mean.size()) throw DomainError("feature dimension does not match the fitted model");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
    return out;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto r = apply(x.row(i));
      std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
  }
};

inline void check_training_set(const Matrix& x, std::span<const double> y) {
  if (x.rows != y.size()) throw DomainError("feature rows and targets differ in count");
  if (x.rows < 2) throw DomainError("training needs at least two samples");
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("non-finite training target");
  for (double v : x.data)
    if (!std::isfinite(v)) throw DomainError("non-finite training feature");
}

}  // namespace agb::models
