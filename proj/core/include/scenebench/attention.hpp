#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scenebench::attn {

/// Dense row-major double matrix with finite entries.
class Matrix {
 public:
  Matrix() = default;
  /// Zero-filled. Throws StructuralError for a zero dimension.
  Matrix(std::size_t rows, std::size_t cols);
  /// Throws StructuralError on a size mismatch, DomainError on non-finite data.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Keys and values projected from one conditioning source.
struct KeyValue {
  Matrix keys;    // m x d
  Matrix values;  // m x d_v
};

/// Z = Attn(Q, prompt) + lambda0 * Attn(Q, initial image) + lambda1 * Attn(Q, reference image)
struct MergeInputs {
  Matrix query;  // n x d
  KeyValue prompt;
  KeyValue initial_image;
  KeyValue reference_image;
  double lambda0 = 0.5;
  double lambda1 = 0.5;
};

/// In-place max-subtracted softmax over each row.
void softmax_rows(Matrix& logits);

/// softmax(Q K^T / sqrt(d)) V. Throws StructuralError on incompatible shapes.
Matrix attention(const Matrix& query, const Matrix& keys, const Matrix& values);

/// Row-stochastic weights softmax(Q K^T / sqrt(d)), exposed for property checks.
Matrix attention_weights(const Matrix& query, const Matrix& keys);

/// The three-term weighted sum. A term whose lambda is exactly zero contributes
/// nothing, so lambda0 = lambda1 = 0 reproduces attention(Q, prompt) bit for bit.
/// Throws StructuralError on shape mismatch, DomainError on negative lambdas.
Matrix merged_attention(const MergeInputs& inputs);

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0);

struct KernelCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Property checks of the kernel against a naive-loop reference on seeded
/// random shapes. Used by the `kernel-check` subcommand.
std::vector<KernelCheck> run_kernel_checks(std::uint64_t seed, int trials);

}  // namespace scenebench::attn
