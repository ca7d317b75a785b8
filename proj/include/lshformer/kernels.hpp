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

#pragma once

// Dense matrix kernels. Each kernel has a serial reference and an OpenMP
// variant parallelized over output rows. Both accumulate every output
// element in the same order, so their results are bit-identical; tests hold
// the OpenMP variants to that.
//
// Shapes (row-major):
//   gemm    C[m x n] (+)= A[m x k] * B[k x n]
//   gemm_tn C[k x n]  += A[m x k]^T * B[m x n]
//   gemm_nt C[m x k] (+)= A[m x n] * B[k x n]^T

#include <cstddef>

namespace lshformer::kernels {

namespace serial {
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate);
}  // namespace serial

namespace omp {
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate);
}  // namespace omp

// Dispatchers used by the model. They record m*k*n multiply-accumulates on the
// active OpCounter and pick the OpenMP variant for large products when not
// already inside a parallel region.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate);

// Global switch for the dispatchers; defaults to enabled.
void set_parallel(bool enabled) noexcept;
bool parallel_enabled() noexcept;
bool in_parallel_region() noexcept;
int max_threads() noexcept;

}  // namespace lshformer::kernels
