#include "rsc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "rsc/errors.hpp"

namespace rsc::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq_scalar(const double* a, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * a[i];
    s1 += a[i + 1] * a[i + 1];
    s2 += a[i + 2] * a[i + 2];
    s3 += a[i + 3] * a[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * a[i];
  return s;
}

void matvec_rows_scalar(const double* a, std::size_t rows, std::size_t n,
                        std::size_t lda, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * lda, x, n);
}

void permuted_add_scalar(const double* base, const double* resid,
                         const std::uint32_t* perm, std::size_t n,
                         double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + resid[perm[i]];
}

std::atomic<const detail::Table*> g_active{nullptr};

const detail::Table* pick_default() {
  const char* env = std::getenv("RSC_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return &detail::scalar_table();
    if (std::strcmp(env, "avx2") == 0 && cpu_supports_avx2())
      return &detail::avx2_table();
  }
  if (cpu_supports_avx2()) return &detail::avx2_table();
  return &detail::scalar_table();
}

const detail::Table& active() {
  const detail::Table* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

namespace detail {

const Table& scalar_table() {
  static const Table table{dot_scalar, sumsq_scalar, matvec_rows_scalar,
                           permuted_add_scalar};
  return table;
}

}  // namespace detail

Backend active_backend() {
  return &active() == &detail::scalar_table() ? Backend::scalar
                                              : Backend::avx2;
}

void force_backend(Backend backend) {
  if (backend == Backend::avx2 && !cpu_supports_avx2())
    throw InvalidArgument("force_backend: AVX2 not supported on this CPU");
  g_active.store(backend == Backend::scalar ? &detail::scalar_table()
                                            : &detail::avx2_table(),
                 std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}

double sumsq(const double* a, std::size_t n) { return active().sumsq(a, n); }

void matvec_rows(const double* a, std::size_t rows, std::size_t n,
                 std::size_t lda, const double* x, double* y) {
  active().matvec_rows(a, rows, n, lda, x, y);
}

void permuted_add(const double* base, const double* resid,
                  const std::uint32_t* perm, std::size_t n, double* out) {
  active().permuted_add(base, resid, perm, n, out);
}

}  // namespace rsc::kernels
