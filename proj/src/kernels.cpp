#include "sketch_rl/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <string_view>
#include <vector>

#include "kernels_impl.hpp"

namespace sketch_rl::kernels {
namespace {

bool force_scalar() {
  const char* env = std::getenv("SKETCH_RL_SIMD");
  return env != nullptr && std::string_view(env) == "scalar";
}

const KernelTable* select_table() {
  if (force_scalar()) return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{select_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalarTable; }

const KernelTable* avx2_table() {
#if defined(SKETCH_RL_HAVE_AVX2)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(SKETCH_RL_HAVE_NEON)
  return &detail::kNeonTable;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

ScopedTable::ScopedTable(const KernelTable& table)
    : previous_(current().exchange(&table, std::memory_order_acq_rel)) {}

ScopedTable::~ScopedTable() {
  current().store(previous_, std::memory_order_release);
}

double sum(std::span<const double> x) {
  return x.empty() ? 0.0 : active().sum(x.data(), x.size());
}

double max(std::span<const double> x) {
  assert(!x.empty());
  return active().max(x.data(), x.size());
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return x.empty() ? 0.0 : active().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (!x.empty()) active().axpy(a, x.data(), y.data(), x.size());
}

void scale(double a, std::span<double> x) {
  if (!x.empty()) active().scale(a, x.data(), x.size());
}

void shift_scale(double shift, double factor, std::span<double> x) {
  if (!x.empty()) active().shift_scale(shift, factor, x.data(), x.size());
}

double mean(std::span<const double> x) {
  assert(!x.empty());
  return sum(x) / static_cast<double>(x.size());
}

double pop_variance(std::span<const double> x) {
  assert(!x.empty());
  // Two-pass form; the one-pass E[x^2]-E[x]^2 cancels badly for near-ties.
  std::vector<double> centered(x.begin(), x.end());
  shift_scale(mean(x), 1.0, centered);
  const double acc = dot(centered, centered);
  return acc / static_cast<double>(x.size());
}

void softmax(std::span<const double> logits, double temperature,
             std::span<double> out) {
  assert(logits.size() == out.size() && !logits.empty());
  const double top = max(logits);
  const double inv_t = 1.0 / temperature;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) * inv_t);
  }
  scale(1.0 / sum(out), out);
}

double log_sum_exp(std::span<const double> logits, double temperature) {
  assert(!logits.empty());
  const double top = max(logits);
  const double inv_t = 1.0 / temperature;
  double acc = 0.0;
  for (double v : logits) acc += std::exp((v - top) * inv_t);
  return top * inv_t + std::log(acc);
}

}  // namespace sketch_rl::kernels
