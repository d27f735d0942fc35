#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scenebench/attention.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/rng.hpp"

using namespace scenebench;
using namespace scenebench::attn;

namespace {

MergeInputs random_inputs(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t m, std::size_t dv) {
  MergeInputs in;
  in.query = random_matrix(n, d, seed);
  in.prompt = {random_matrix(m, d, seed + 1), random_matrix(m, dv, seed + 2)};
  in.initial_image = {random_matrix(m + 1, d, seed + 3), random_matrix(m + 1, dv, seed + 4)};
  in.reference_image = {random_matrix(m + 2, d, seed + 5), random_matrix(m + 2, dv, seed + 6)};
  return in;
}

}  // namespace

TEST_CASE("softmax rows sum to one and survive large logits") {
  Matrix logits(2, 3, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0});
  softmax_rows(logits);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0;
    for (double v : logits.row(r)) {
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("attention matches a naive loop") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 1 + rng.below(8), d = 1 + rng.below(8), m = 1 + rng.below(6), dv = 1 + rng.below(8);
    auto in = random_inputs(rng.next(), n, d, m, dv);
    in.lambda0 = rng.uniform();
    in.lambda1 = rng.uniform();
    auto ours = testing::to_dense(merged_attention(in));
    CHECK(testing::max_abs_diff(ours, testing::naive_merged(in)) <= 1e-12);
  }
}

TEST_CASE("zero weights reduce to plain attention bit for bit") {
  auto in = random_inputs(9, 4, 3, 5, 2);
  in.lambda0 = 0.0;
  in.lambda1 = 0.0;
  CHECK(merged_attention(in) == attention(in.query, in.prompt.keys, in.prompt.values));
}

TEST_CASE("shape and domain checks") {
  auto in = random_inputs(1, 2, 3, 4, 5);
  in.lambda0 = -0.1;
  CHECK_THROWS_AS(merged_attention(in), DomainError);
  in.lambda0 = 0.5;
  in.reference_image.values = random_matrix(6, 4, 3);
  CHECK_THROWS_AS(merged_attention(in), StructuralError);
  CHECK_THROWS_AS(attention(random_matrix(2, 3, 1), random_matrix(2, 4, 1), random_matrix(2, 2, 1)), StructuralError);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, NAN, 0.0}), DomainError);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0}), StructuralError);
}

TEST_CASE("kernel self checks pass") {
  for (const auto& check : run_kernel_checks(42, 10)) {
    INFO(check.name << ": " << check.detail);
    CHECK(check.passed);
  }
}
