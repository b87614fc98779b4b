#include <algorithm>

#include "kernels_impl.hpp"

namespace sketch_rl::kernels::detail {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_scalar(const double* x, std::size_t n) {
  double best = x[0];
  for (std::size_t i = 1; i < n; ++i) best = std::max(best, x[i]);
  return best;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void shift_scale_scalar(double shift, double factor, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - shift) * factor;
}

}  // namespace

const KernelTable kScalarTable{
    Isa::kScalar,  "scalar",     sum_scalar,        max_scalar,
    dot_scalar,    axpy_scalar,  scale_scalar,      shift_scale_scalar,
};

}  // namespace sketch_rl::kernels::detail
