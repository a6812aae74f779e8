#include "teamcluster/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace teamcluster::simd {

namespace {

const KernelTable kScalar{
    Isa::Scalar,
    &detail::dot_scalar,
    &detail::squared_distance_scalar,
    &detail::sum_scalar,
    &detail::rotate_pair_scalar,
    &detail::move_toward_scalar,
};

#if defined(TEAMCLUSTER_HAVE_AVX2_KERNELS)
const KernelTable kAvx2{
    Isa::Avx2,
    &detail::dot_avx2,
    &detail::squared_distance_avx2,
    &detail::sum_avx2,
    &detail::rotate_pair_avx2,
    &detail::move_toward_avx2,
};
#endif

const KernelTable* detect() {
  if (const char* env = std::getenv("TEAMCLUSTER_SIMD")) {
    if (std::string_view(env) == "scalar") return &kScalar;
  }
  if (const KernelTable* avx2 = avx2_kernels()) return avx2;
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(TEAMCLUSTER_HAVE_AVX2_KERNELS)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) {
  const KernelTable* table = &kScalar;
  if (isa == Isa::Avx2 && avx2_kernels() != nullptr) table = avx2_kernels();
  slot().store(table, std::memory_order_release);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace teamcluster::simd
