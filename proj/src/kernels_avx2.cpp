// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86; nothing here may run unless cpu_supports_avx2().

#include "rsc/kernels.hpp"

#include "rsc/errors.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace rsc::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(a + i);
    const __m256d v1 = _mm256_loadu_pd(a + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  if (i + 4 <= n) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * a[i];
  return s;
}

void matvec_rows_avx2(const double* a, std::size_t rows, std::size_t n,
                      std::size_t lda, const double* x, double* y) {
  std::size_t r = 0;
  // Two rows at a time so each load of x feeds two accumulators.
  for (; r + 2 <= rows; r += 2) {
    const double* row0 = a + r * lda;
    const double* row1 = row0 + lda;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d xv = _mm256_loadu_pd(x + i);
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row0 + i), xv, acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row1 + i), xv, acc1);
    }
    double s0 = hsum(acc0);
    double s1 = hsum(acc1);
    for (; i < n; ++i) {
      s0 += row0[i] * x[i];
      s1 += row1[i] * x[i];
    }
    y[r] = s0;
    y[r + 1] = s1;
  }
  if (r < rows) y[r] = dot_avx2(a + r * lda, x, n);
}

void permuted_add_avx2(const double* base, const double* resid,
                       const std::uint32_t* perm, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx =
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(perm + i));
    const __m256d gathered = _mm256_i32gather_pd(resid, idx, 8);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(base + i),
                                            gathered));
  }
  for (; i < n; ++i) out[i] = base[i] + resid[perm[i]];
}

}  // namespace

namespace detail {

const Table& avx2_table() {
  static const Table table{dot_avx2, sumsq_avx2, matvec_rows_avx2,
                           permuted_add_avx2};
  return table;
}

}  // namespace detail

bool cpu_supports_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace rsc::kernels

#else  // non-x86: scalar only

namespace rsc::kernels {

bool cpu_supports_avx2() { return false; }

namespace detail {

const Table& avx2_table() {
  throw InvalidArgument("AVX2 kernels unavailable on this architecture");
}

}  // namespace detail

}  // namespace rsc::kernels

#endif
