#pragma once

#include <cstddef>

namespace rca::detail {

// C (m x n) = op(A) * op(B) [+ C], row-major. op(A) is m x k, op(B) is k x n.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

}  // namespace rca::detail
