#include <atomic>
#include <cstdlib>
#include <string>

#include "pilotwave/errors.hpp"
#include "pilotwave/kernels.hpp"

namespace pilotwave::kernels {

#if defined(PILOTWAVE_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(PILOTWAVE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_selection() {
  if (const char* env = std::getenv("PILOTWAVE_KERNEL")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* simd = avx2_kernels()) return simd;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_selection()};
  return slot;
}

}  // namespace

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

void select_kernels(Isa isa) {
  const KernelTable* table = nullptr;
  switch (isa) {
    case Isa::Scalar:
      table = &scalar_kernels();
      break;
    case Isa::Avx2:
      table = avx2_kernels();
      break;
  }
  if (table == nullptr) throw ConfigError("requested kernel variant is not available on this CPU/build");
  active_slot().store(table, std::memory_order_release);
}

void select_kernels(std::string_view name) {
  if (name == "scalar") {
    select_kernels(Isa::Scalar);
  } else if (name == "avx2") {
    select_kernels(Isa::Avx2);
  } else if (name == "auto") {
    active_slot().store(avx2_kernels() ? avx2_kernels() : &scalar_kernels(), std::memory_order_release);
  } else {
    throw ConfigError("unknown kernel variant '" + std::string(name) + "' (expected scalar, avx2 or auto)");
  }
}

}  // namespace pilotwave::kernels
