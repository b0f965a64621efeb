#pragma once

// Data-parallel kernels with a scalar reference implementation and an AVX2
// variant picked at runtime. Both variants produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace cascade::simd {

enum class Level { Scalar, Avx2 };

std::string_view level_name(Level level);

/// Best level the running CPU supports.
Level detected_level();

/// Level used by the dispatching entry points. Honors CASCADE_SIMD=scalar.
Level active_level();

/// Overrides the dispatch level (tests and benchmarks). Clamped to detected_level().
void force_level(Level level);

// ---------------------------------------------------------------------------
// Counter-based agreement draws
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// 53 uniform bits for (namespace, counter).
inline constexpr std::uint64_t draw_bits(std::uint64_t ns, std::uint64_t counter) {
  return splitmix64(ns ^ (counter * kGolden)) >> 11;
}

/// Integer threshold t such that draw_bits < t happens with probability p.
std::uint64_t probability_threshold(double p);

inline constexpr bool agrees(std::uint64_t ns, std::uint64_t item_id, std::uint64_t threshold) {
  return draw_bits(ns, item_id) < threshold;
}

/// out[i] = agrees(ns, first_id + i, threshold).
void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out);

std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count);

// ---------------------------------------------------------------------------
// Batched regularized incomplete beta I_x(a, b) for fixed (a, b).
// ---------------------------------------------------------------------------

/// out[i] = I_{xs[i]}(a, b). Requires a, b > 0 and xs in [0, 1].
void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out);

namespace scalar {
void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out);
std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count);
void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out);
/// Single-point evaluation shared with stats::reg_inc_beta.
double inc_beta(double a, double b, double x, double log_beta);
}  // namespace scalar

namespace avx2 {
bool compiled();
void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out);
std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count);
void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out);
}  // namespace avx2

}  // namespace cascade::simd
