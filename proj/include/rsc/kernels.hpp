#pragma once

#include <cstddef>
#include <cstdint>

namespace rsc::kernels {

// Dense double-precision primitives backing the permutation-test inner loop.
// Each primitive has a scalar reference implementation and an AVX2+FMA
// variant; the backend is picked once at startup from CPUID (overridable via
// force_backend() or the RSC_KERNELS environment variable, values "scalar"
// or "avx2"). The variants are equivalence-tested against each other; they
// may differ in the last few ulps because accumulation order differs.

enum class Backend { scalar, avx2 };

Backend active_backend();
bool cpu_supports_avx2();

// Throws InvalidArgument if the requested backend is unsupported here.
void force_backend(Backend backend);

double dot(const double* a, const double* b, std::size_t n);

double sumsq(const double* a, std::size_t n);

// y[r] = dot(a + r * lda, x) for r in [0, rows); a is row-major.
void matvec_rows(const double* a, std::size_t rows, std::size_t n,
                 std::size_t lda, const double* x, double* y);

// out[i] = base[i] + resid[perm[i]]; perm must be a permutation of [0, n).
void permuted_add(const double* base, const double* resid,
                  const std::uint32_t* perm, std::size_t n, double* out);

namespace detail {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*matvec_rows)(const double*, std::size_t, std::size_t, std::size_t,
                      const double*, double*);
  void (*permuted_add)(const double*, const double*, const std::uint32_t*,
                       std::size_t, double*);
};

const Table& scalar_table();
const Table& avx2_table();  // only valid when cpu_supports_avx2()

}  // namespace detail

}  // namespace rsc::kernels
