#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace so2frames {

/// Kernels whose multiplications are tallied separately.
enum class Kernel : int { So3Tp = 0, So2Linear, So2Tp, FrameRotation };
inline constexpr int kNumKernels = 4;

std::string_view kernel_name(Kernel k);

/// Exact multiply tally. A fused multiply-add counts as one multiply.
/// Counters are caller-owned; operations accept a nullable pointer.
struct OpCounter {
  std::uint64_t multiply_count = 0;
  std::array<std::uint64_t, kNumKernels> per_kernel{};

  void add(Kernel k, std::uint64_t n) {
    multiply_count += n;
    per_kernel[static_cast<int>(k)] += n;
  }
  std::uint64_t operator[](Kernel k) const { return per_kernel[static_cast<int>(k)]; }
  void reset() { *this = OpCounter{}; }
};

inline void count(OpCounter* c, Kernel k, std::uint64_t n) {
  if (c != nullptr) c->add(k, n);
}

inline std::string_view kernel_name(Kernel k) {
  switch (k) {
    case Kernel::So3Tp: return "so3_tp";
    case Kernel::So2Linear: return "so2_linear";
    case Kernel::So2Tp: return "so2_tp";
    case Kernel::FrameRotation: return "frame_rotation";
  }
  return "unknown";
}

}  // namespace so2frames
