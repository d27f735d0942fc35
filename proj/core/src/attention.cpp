#include "scenebench/attention.hpp"

#include <algorithm>
#include <cmath>

#include "scenebench/errors.hpp"
#include "scenebench/rng.hpp"

namespace scenebench::attn {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) throw StructuralError("matrix dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw StructuralError("matrix dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw StructuralError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                          std::to_string(rows * cols));
  }
  if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
    throw DomainError("matrix entries must be finite");
  }
}

void softmax_rows(Matrix& logits) {
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double row_max = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) row_max = std::max(row_max, logits(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      logits(r, c) = std::exp(logits(r, c) - row_max);
      sum += logits(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) logits(r, c) /= sum;
  }
}

Matrix attention_weights(const Matrix& query, const Matrix& keys) {
  if (query.cols() != keys.cols()) {
    throw StructuralError("attention: query has d=" + std::to_string(query.cols()) + " but keys have d=" +
                          std::to_string(keys.cols()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  Matrix weights(query.rows(), keys.rows());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < query.cols(); ++k) dot += query(i, k) * keys(j, k);
      weights(i, j) = dot * scale;
    }
  }
  softmax_rows(weights);
  return weights;
}

Matrix attention(const Matrix& query, const Matrix& keys, const Matrix& values) {
  if (keys.rows() != values.rows()) {
    throw StructuralError("attention: " + std::to_string(keys.rows()) + " keys but " +
                          std::to_string(values.rows()) + " values");
  }
  Matrix weights = attention_weights(query, keys);
  Matrix out(query.rows(), values.cols());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      const double w = weights(i, j);
      for (std::size_t c = 0; c < values.cols(); ++c) out(i, c) += w * values(j, c);
    }
  }
  return out;
}

Matrix merged_attention(const MergeInputs& in) {
  if (!(in.lambda0 >= 0.0) || !(in.lambda1 >= 0.0)) {
    throw DomainError("merge weights must be non-negative");
  }
  const std::size_t dv = in.prompt.values.cols();
  if (in.initial_image.values.cols() != dv || in.reference_image.values.cols() != dv) {
    throw StructuralError("merged_attention: value widths differ across sources");
  }
  Matrix z = attention(in.query, in.prompt.keys, in.prompt.values);
  auto accumulate = [&](const KeyValue& source, double lambda) {
    Matrix term = attention(in.query, source.keys, source.values);
    if (lambda == 0.0) return;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += lambda * term(r, c);
    }
  };
  // Shapes are validated even for zero-weight terms.
  accumulate(in.initial_image, in.lambda0);
  accumulate(in.reference_image, in.lambda1);
  return z;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = scale * (2.0 * rng.uniform() - 1.0);
  return Matrix(rows, cols, std::move(data));
}

}  // namespace scenebench::attn
