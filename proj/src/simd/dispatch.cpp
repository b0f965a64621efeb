#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "cascade/simd.hpp"

namespace cascade::simd {

namespace {

constexpr int kUnset = -1;
std::atomic<int> g_level{kUnset};

Level initial_level() {
  const char* env = std::getenv("CASCADE_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return Level::Scalar;
  return detected_level();
}

}  // namespace

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Scalar:
      return "scalar";
    case Level::Avx2:
      return "avx2";
  }
  return "unknown";
}

Level detected_level() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool has_avx2 = avx2::compiled() && __builtin_cpu_supports("avx2");
  if (has_avx2) return Level::Avx2;
#endif
  return Level::Scalar;
}

Level active_level() {
  int v = g_level.load(std::memory_order_relaxed);
  if (v == kUnset) {
    v = static_cast<int>(initial_level());
    g_level.store(v, std::memory_order_relaxed);
  }
  return static_cast<Level>(v);
}

void force_level(Level level) {
  if (level == Level::Avx2 && detected_level() != Level::Avx2) level = Level::Scalar;
  g_level.store(static_cast<int>(level), std::memory_order_relaxed);
}

std::uint64_t probability_threshold(double p) {
  constexpr double kScale = 9007199254740992.0;  // 2^53
  if (!(p > 0.0)) return 0;
  if (p >= 1.0) return std::uint64_t{1} << 53;
  return static_cast<std::uint64_t>(std::ceil(p * kScale));
}

void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out) {
  if (active_level() == Level::Avx2) {
    avx2::agreement_mask(ns, threshold, first_id, out);
  } else {
    scalar::agreement_mask(ns, threshold, first_id, out);
  }
}

std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count) {
  if (active_level() == Level::Avx2) return avx2::count_agreements(ns, threshold, first_id, count);
  return scalar::count_agreements(ns, threshold, first_id, count);
}

void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out) {
  if (active_level() == Level::Avx2) {
    avx2::inc_beta_batch(a, b, xs, out);
  } else {
    scalar::inc_beta_batch(a, b, xs, out);
  }
}

}  // namespace cascade::simd
