#pragma once

#include <cstddef>

#include "dispatchlab/tensor.hpp"

namespace dispatchlab::oracle {

// Tolerances from the numerical-precision validation: single kernels are held
// to 2e-4 max-abs, the chained MLP block to 2e-3 (error accumulates across
// four matmuls).
enum class ToleranceContext { single_kernel, chained_mlp };

struct ToleranceSpec {
    double max_abs;
    ToleranceContext context;

    static ToleranceSpec single_kernel() { return {2e-4, ToleranceContext::single_kernel}; }
    static ToleranceSpec chained_mlp() { return {2e-3, ToleranceContext::chained_mlp}; }
};

struct ComparisonReport {
    double max_abs_diff = 0.0;
    size_t argmax_of_diff = 0;
    bool pass = false;
};

// Scalar host references. Double-precision accumulation, rounded to float32 at
// the end; bit-identical across runs and platforms.

// A [m,k] x B [k,n] -> [m,n]
HostTensor matmul(const HostTensor& a, const HostTensor& b);

// x [rows,hidden] * W^T with W stored [out,in] -> [rows,out]
HostTensor matmul_wt(const HostTensor& x, const HostTensor& w);

// out[r,c] = x[r,c] * rsqrt(mean(x[r,:]^2) + eps) * weight[c]
HostTensor rmsnorm(const HostTensor& x, const HostTensor& weight, double eps);

HostTensor softmax(const HostTensor& x);

size_t argmax(const HostTensor& x);  // lowest index on ties

float silu(float x);

// silu(x Wg^T) ⊙ (x Wu^T)
HostTensor gate_up_silu(const HostTensor& x, const HostTensor& wg, const HostTensor& wu);

struct MlpWeights {
    HostTensor norm_weight;  // [hidden]
    HostTensor gate;         // [inter, hidden]
    HostTensor up;           // [inter, hidden]
    HostTensor down;         // [hidden, inter]
};

// x + (silu(norm(x) Wg^T) ⊙ (norm(x) Wu^T)) Wd^T
HostTensor mlp_block(const HostTensor& x, const MlpWeights& w, double eps);

// max-abs comparison. Throws Errc::ShapeMismatch on differing shapes.
ComparisonReport compare(const HostTensor& a, const HostTensor& b, ToleranceSpec tol);

// Spot-check a large matmul result against double-precision dot products at
// n_samples seeded output positions; keeps oracle cost bounded when the full
// product is too big to recompute.
ComparisonReport sampled_matmul_check(const HostTensor& a, const HostTensor& b,
                                      const HostTensor& got, size_t n_samples,
                                      ToleranceSpec tol, uint64_t seed = 12345);

}  // namespace dispatchlab::oracle
