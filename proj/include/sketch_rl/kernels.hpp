#pragma once

// Dense double-precision inner loops used by the policy, advantage and update
// code. Each primitive has a scalar reference version plus vectorized
// variants (AVX2+FMA on x86-64, NEON on AArch64) chosen once at startup.
//
// Vector variants reassociate sums, so results agree with the scalar path to
// rounding, not bitwise. Within one process the selected table never changes
// unless a test swaps it explicitly, so training runs stay reproducible.
//
// Setting SKETCH_RL_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace sketch_rl::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x *= a
  void (*scale)(double a, double* x, std::size_t n);
  // x = (x - shift) * factor
  void (*shift_scale)(double shift, double factor, double* x, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

const KernelTable& active();

// Test hook; not thread-safe against concurrent kernel calls.
class ScopedTable {
 public:
  explicit ScopedTable(const KernelTable& table);
  ~ScopedTable();
  ScopedTable(const ScopedTable&) = delete;
  ScopedTable& operator=(const ScopedTable&) = delete;

 private:
  const KernelTable* previous_;
};

double sum(std::span<const double> x);
double max(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void shift_scale(double shift, double factor, std::span<double> x);

double mean(std::span<const double> x);
// Population variance (divides by n).
double pop_variance(std::span<const double> x);

// out = softmax(logits / temperature). out may alias logits.
void softmax(std::span<const double> logits, double temperature,
             std::span<double> out);
// log sum_k exp(logits_k / temperature)
double log_sum_exp(std::span<const double> logits, double temperature);

}  // namespace sketch_rl::kernels
