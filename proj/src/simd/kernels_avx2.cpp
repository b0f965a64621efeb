// Compiled with -mavx2. Only reached after a runtime CPU check.

#include <array>
#include <cmath>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"
#include "inc_beta_detail.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace cascade::simd::avx2 {

#if defined(__AVX2__)

bool compiled() { return true; }

namespace {

// Low 64 bits of a 64x64 product; AVX2 has no native 64-bit mullo.
inline __m256i mullo64(__m256i a, __m256i b) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i a_hi = _mm256_srli_epi64(a, 32);
  const __m256i b_hi = _mm256_srli_epi64(b, 32);
  const __m256i cross = _mm256_add_epi64(_mm256_mul_epu32(a_hi, b), _mm256_mul_epu32(a, b_hi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i draw_bits4(__m256i ns, __m256i ids) {
  const __m256i golden = _mm256_set1_epi64x(static_cast<long long>(kGolden));
  const __m256i c1 = _mm256_set1_epi64x(static_cast<long long>(0xBF58476D1CE4E5B9ULL));
  const __m256i c2 = _mm256_set1_epi64x(static_cast<long long>(0x94D049BB133111EBULL));
  __m256i z = _mm256_xor_si256(ns, mullo64(ids, golden));
  z = _mm256_add_epi64(z, golden);
  z = mullo64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 30)), c1);
  z = mullo64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 27)), c2);
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
  return _mm256_srli_epi64(z, 11);
}

// Lane bit i set iff draw < threshold. Draws and thresholds are < 2^63, so
// the signed compare is exact.
inline int agree_bits4(__m256i ns, __m256i thr, std::uint64_t first) {
  const auto f = static_cast<long long>(first);
  const __m256i ids = _mm256_set_epi64x(f + 3, f + 2, f + 1, f);
  const __m256i cmp = _mm256_cmpgt_epi64(thr, draw_bits4(ns, ids));
  return _mm256_movemask_pd(_mm256_castsi256_pd(cmp));
}

}  // namespace

void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out) {
  const __m256i nsv = _mm256_set1_epi64x(static_cast<long long>(ns));
  const __m256i thr = _mm256_set1_epi64x(static_cast<long long>(threshold));
  std::size_t i = 0;
  for (; i + 4 <= out.size(); i += 4) {
    const int bits = agree_bits4(nsv, thr, first_id + i);
    out[i] = bits & 1;
    out[i + 1] = (bits >> 1) & 1;
    out[i + 2] = (bits >> 2) & 1;
    out[i + 3] = (bits >> 3) & 1;
  }
  scalar::agreement_mask(ns, threshold, first_id + i, out.subspan(i));
}

std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count) {
  const __m256i nsv = _mm256_set1_epi64x(static_cast<long long>(ns));
  const __m256i thr = _mm256_set1_epi64x(static_cast<long long>(threshold));
  std::uint64_t total = 0;
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    total += static_cast<std::uint64_t>(__builtin_popcount(agree_bits4(nsv, thr, first_id + i)));
  }
  return total + scalar::count_agreements(ns, threshold, first_id + i, count - i);
}

namespace {

inline __m256d vabs(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

inline __m256d clamp_tiny(__m256d v) {
  const __m256d tiny = _mm256_set1_pd(detail::kCfTiny);
  const __m256d small = _mm256_cmp_pd(vabs(v), tiny, _CMP_LT_OQ);
  return _mm256_blendv_pd(v, tiny, small);
}

// Four continued fractions in lockstep. A lane's h stops updating once it
// has converged, which reproduces the scalar early exit exactly.
void continued_fraction4(const std::array<double, 4>& a_in, const std::array<double, 4>& b_in,
                         const std::array<double, 4>& x_in, int active_bits,
                         std::array<double, 4>& h_out) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d eps = _mm256_set1_pd(detail::kCfEps);
  const __m256d a = _mm256_loadu_pd(a_in.data());
  const __m256d b = _mm256_loadu_pd(b_in.data());
  const __m256d x = _mm256_loadu_pd(x_in.data());
  const __m256d qab = _mm256_add_pd(a, b);
  const __m256d qap = _mm256_add_pd(a, one);
  const __m256d qam = _mm256_sub_pd(a, one);

  __m256d c = one;
  __m256d d = _mm256_sub_pd(one, _mm256_div_pd(_mm256_mul_pd(qab, x), qap));
  d = clamp_tiny(d);
  d = _mm256_div_pd(one, d);
  __m256d h = d;
  int pending = active_bits;

  for (int it = 1; it <= detail::kCfMaxIter && pending != 0; ++it) {
    const __m256d m = _mm256_set1_pd(static_cast<double>(it));
    const __m256d m2 = _mm256_mul_pd(two, m);
    const __m256d a_m2 = _mm256_add_pd(a, m2);

    __m256d aa = _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(m, _mm256_sub_pd(b, m)), x),
                               _mm256_mul_pd(_mm256_add_pd(qam, m2), a_m2));
    d = clamp_tiny(_mm256_add_pd(one, _mm256_mul_pd(aa, d)));
    c = clamp_tiny(_mm256_add_pd(one, _mm256_div_pd(aa, c)));
    d = _mm256_div_pd(one, d);
    __m256d h_next = _mm256_mul_pd(h, _mm256_mul_pd(d, c));

    const __m256d neg_am = _mm256_xor_pd(_mm256_add_pd(a, m), sign);
    aa = _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(neg_am, _mm256_add_pd(qab, m)), x),
                       _mm256_mul_pd(a_m2, _mm256_add_pd(qap, m2)));
    d = clamp_tiny(_mm256_add_pd(one, _mm256_mul_pd(aa, d)));
    c = clamp_tiny(_mm256_add_pd(one, _mm256_div_pd(aa, c)));
    d = _mm256_div_pd(one, d);
    const __m256d del = _mm256_mul_pd(d, c);
    h_next = _mm256_mul_pd(h_next, del);

    const __m256d live = _mm256_castsi256_pd(_mm256_set_epi64x(
        (pending & 8) ? -1 : 0, (pending & 4) ? -1 : 0, (pending & 2) ? -1 : 0,
        (pending & 1) ? -1 : 0));
    h = _mm256_blendv_pd(h, h_next, live);

    const __m256d conv = _mm256_cmp_pd(vabs(_mm256_sub_pd(del, one)), eps, _CMP_LT_OQ);
    pending &= ~_mm256_movemask_pd(conv);
  }
  if (pending != 0) {
    throw ConvergenceError("incomplete beta continued fraction did not converge");
  }
  _mm256_storeu_pd(h_out.data(), h);
}

}  // namespace

void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out) {
  const double log_beta = detail::log_beta(a, b);
  std::size_t i = 0;
  for (; i + 4 <= xs.size(); i += 4) {
    std::array<detail::LaneSetup, 4> lanes{};
    std::array<double, 4> la{}, lb{}, lx{}, h{};
    std::array<double, 4> fixed{};
    int active = 0;
    for (int l = 0; l < 4; ++l) {
      const double x = xs[i + l];
      if (x <= 0.0 || x >= 1.0) {
        fixed[l] = x <= 0.0 ? 0.0 : 1.0;
        la[l] = lb[l] = 1.0;
        lx[l] = 0.5;
        continue;
      }
      lanes[l] = detail::setup_lane(a, b, x, log_beta);
      la[l] = lanes[l].cf_a;
      lb[l] = lanes[l].cf_b;
      lx[l] = lanes[l].cf_x;
      active |= 1 << l;
    }
    if (active != 0) continued_fraction4(la, lb, lx, active, h);
    for (int l = 0; l < 4; ++l) {
      out[i + l] = (active & (1 << l)) ? detail::finish_lane(lanes[l], h[l]) : fixed[l];
    }
  }
  for (; i < xs.size(); ++i) {
    out[i] = scalar::inc_beta(a, b, xs[i], log_beta);
  }
}

#else

bool compiled() { return false; }

void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out) {
  scalar::agreement_mask(ns, threshold, first_id, out);
}

std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count) {
  return scalar::count_agreements(ns, threshold, first_id, count);
}

void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out) {
  scalar::inc_beta_batch(a, b, xs, out);
}

#endif

}  // namespace cascade::simd::avx2
