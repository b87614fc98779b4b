#pragma once

#include "sketch_rl/kernels.hpp"

namespace sketch_rl::kernels::detail {

extern const KernelTable kScalarTable;

#if defined(SKETCH_RL_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

#if defined(SKETCH_RL_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace sketch_rl::kernels::detail
