#include <cmath>
#include <cstdio>
#include <vector>

#include "scenebench/attention.hpp"
#include "scenebench/rng.hpp"

namespace scenebench::attn {

namespace {

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

// Straight loops over nested vectors; shares no code with the kernel.
Grid naive_attention(const Grid& q, const Grid& k, const Grid& v) {
  const double d = static_cast<double>(q[0].size());
  Grid out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> logits(k.size());
    double hi = -INFINITY;
    for (std::size_t j = 0; j < k.size(); ++j) {
      double s = 0;
      for (std::size_t t = 0; t < q[i].size(); ++t) s += q[i][t] * k[j][t];
      logits[j] = s / std::sqrt(d);
      if (logits[j] > hi) hi = logits[j];
    }
    double z = 0;
    for (auto& l : logits) z += (l = std::exp(l - hi));
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += logits[j] / z * v[j][c];
  }
  return out;
}

double max_abs(const Grid& g) {
  double m = 0;
  for (const auto& row : g)
    for (double x : row) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Matrix& a, const Grid& b) {
  double m = 0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a(r, c) - b[r][c]));
  return m;
}

std::string fmt(const char* format, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

KeyValue random_source(Rng& rng, std::size_t d, std::size_t dv) {
  std::size_t m = 1 + rng.below(8);
  return KeyValue{random_matrix(m, d, rng.next(), 2.0), random_matrix(m, dv, rng.next())};
}

}  // namespace

std::vector<KernelCheck> run_kernel_checks(std::uint64_t seed, int trials) {
  Rng rng(seed);
  double worst_oracle = 0, worst_rowsum = 0, worst_fd = 0, worst_shift = 0, worst_affine = 0;
  bool zero_exact = true;

  for (int t = 0; t < trials; ++t) {
    std::size_t n = 1 + rng.below(8), d = 1 + rng.below(8), dv = 1 + rng.below(8);
    MergeInputs in{random_matrix(n, d, rng.next(), 2.0), random_source(rng, d, dv),
                   random_source(rng, d, dv), random_source(rng, d, dv), 0.5, 0.5};

    Matrix attn = attention(in.query, in.prompt.keys, in.prompt.values);
    worst_oracle = std::max(worst_oracle, max_abs_diff(attn, naive_attention(to_grid(in.query),
                                                                           to_grid(in.prompt.keys),
                                                                           to_grid(in.prompt.values))));

    Matrix w = attention_weights(in.query, in.prompt.keys);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0;
      for (double x : w.row(r)) s += x;
      worst_rowsum = std::max(worst_rowsum, std::abs(s - 1.0));
    }

    // Shifting every logit of a row by a constant leaves its softmax unchanged.
    Matrix logits = random_matrix(n, 1 + rng.below(8), rng.next(), 5.0);
    Matrix shifted = logits;
    for (std::size_t r = 0; r < shifted.rows(); ++r) {
      double c = 100.0 * (rng.uniform() - 0.5);
      for (std::size_t k = 0; k < shifted.cols(); ++k) shifted(r, k) += c;
    }
    softmax_rows(logits);
    softmax_rows(shifted);
    for (std::size_t i = 0; i < logits.data().size(); ++i)
      worst_shift = std::max(worst_shift, std::abs(logits.data()[i] - shifted.data()[i]));

    MergeInputs zero = in;
    zero.lambda0 = zero.lambda1 = 0.0;
    zero_exact = zero_exact && merged_attention(zero) == attn;

    const double h = 1e-4;
    MergeInputs plus = in, minus = in;
    plus.lambda0 += h;
    minus.lambda0 -= h;
    Matrix zp = merged_attention(plus), zm = merged_attention(minus);
    Matrix a0 = attention(in.query, in.initial_image.keys, in.initial_image.values);
    Grid fd(n, std::vector<double>(dv));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < dv; ++c) fd[r][c] = (zp(r, c) - zm(r, c)) / (2 * h);
    worst_fd = std::max(worst_fd, max_abs_diff(a0, fd) / std::max(max_abs(to_grid(a0)), 1e-300));

    MergeInputs doubled = in;
    doubled.lambda0 *= 2;
    Matrix z1 = merged_attention(in), z2 = merged_attention(doubled);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < dv; ++c)
        worst_affine = std::max(worst_affine, std::abs((z2(r, c) - z1(r, c)) - in.lambda0 * a0(r, c)));
  }

  return {
      {"zero-weight reduction is bit-exact", zero_exact, zero_exact ? "identical" : "differs"},
      {"softmax rows sum to 1 (tol 1e-9)", worst_rowsum <= 1e-9, fmt("max |sum-1| = %.3e", worst_rowsum)},
      {"dZ/dlambda0 matches central differences (rel tol 1e-6)", worst_fd <= 1e-6,
       fmt("max rel err = %.3e", worst_fd)},
      {"naive-loop oracle agreement (tol 1e-12)", worst_oracle <= 1e-12, fmt("max abs diff = %.3e", worst_oracle)},
      {"softmax shift invariance (tol 1e-12)", worst_shift <= 1e-12, fmt("max abs diff = %.3e", worst_shift)},
      {"affine in lambda0 (tol 1e-12)", worst_affine <= 1e-12, fmt("max abs diff = %.3e", worst_affine)},
  };
}

}  // namespace scenebench::attn
