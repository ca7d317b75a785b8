/*
 * Copyright (C) 2026 The lshformer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lshformer/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lshformer/op_counter.hpp"

namespace lshformer::kernels {
namespace {

std::atomic<bool> g_parallel{true};

// Below this many MACs the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 1u << 16;

bool use_parallel(std::size_t work) {
  return g_parallel.load(std::memory_order_relaxed) && work >= kParallelThreshold &&
         !in_parallel_region() && max_threads() > 1;
}

}  // namespace

namespace serial {

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, T{});
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    T* cp = c + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i * k + p];
      const T* bi = b + i * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      T acc{};
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] = accumulate ? c[i * k + p] + acc : acc;
    }
  }
}

}  // namespace serial

namespace omp {

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    T* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, T{});
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto p = static_cast<std::size_t>(r);
    T* cp = c + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i * k + p];
      const T* bi = b + i * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const T* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      T acc{};
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] = accumulate ? c[i * k + p] + acc : acc;
    }
  }
}

}  // namespace omp

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  ops::add(static_cast<std::uint64_t>(m) * k * n);
  if (use_parallel(m * k * n)) omp::gemm(a, b, c, m, k, n, accumulate);
  else serial::gemm(a, b, c, m, k, n, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n)) omp::gemm_tn(a, b, c, m, k, n);
  else serial::gemm_tn(a, b, c, m, k, n);
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
  if (use_parallel(m * k * n)) omp::gemm_nt(a, b, c, m, n, k, accumulate);
  else serial::gemm_nt(a, b, c, m, n, k, accumulate);
}

void set_parallel(bool enabled) noexcept { g_parallel.store(enabled); }
bool parallel_enabled() noexcept { return g_parallel.load(); }

bool in_parallel_region() noexcept {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define LSHFORMER_INSTANTIATE(T)                                                              \
  template void serial::gemm<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, \
                                bool);                                                        \
  template void serial::gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t,          \
                                   std::size_t);                                              \
  template void serial::gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t,          \
                                   std::size_t, bool);                                        \
  template void omp::gemm<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t,    \
                             bool);                                                           \
  template void omp::gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
  template void omp::gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, \
                                bool);                                                        \
  template void gemm<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);  \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);     \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);

LSHFORMER_INSTANTIATE(float)
LSHFORMER_INSTANTIATE(double)

#undef LSHFORMER_INSTANTIATE

}  // namespace lshformer::kernels
