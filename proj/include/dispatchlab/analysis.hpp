#pragma once

#include <cstddef>
#include <vector>

namespace dispatchlab::analysis {

struct MatmulDims {
    size_t m = 0, k = 0, n = 0;
    double flops() const { return 2.0 * double(m) * double(k) * double(n); }
};

struct EfficiencyReport {
    MatmulDims dims;
    double time_ms = 0.0;
    double gflops = 0.0;
    double percent_peak = 0.0;
    double peak_tflops = 0.0;
};

struct CrossoverInput {
    double t_overhead_us = 0.0;      // per-operation overhead
    double throughput_flops = 0.0;   // sustained kernel throughput, FLOP/s
    size_t d_in = 0, d_out = 0;
};

struct CrossoverResult {
    double raw = 0.0;     // real-valued B*
    long rounded = 0;     // round-half-up integer, the reported value
};

// Estimatable ms range [low, high].
struct MsRange {
    double low = 0.0, high = 0.0;
};

struct OverheadPartition {
    double per_op_overhead_us = 0.0;
    MsRange per_dispatch_cost_us;     // per-unit, us
    MsRange framework_us;             // per-unit, us: per_op - per_dispatch
    size_t n_ops = 0;
    MsRange dispatch_component_ms;    // n_ops * per_dispatch / 1000
    MsRange framework_component_ms;   // n_ops * framework  / 1000
    double overlap_residual_ms = 0.0; // n_ops * per_op / 1000 - measured TTFT
    double ttft_ms = 0.0;
    double overhead_total_ms = 0.0;   // n_ops * per_op / 1000
};

struct SensitivityPoint {
    double per_op_us = 0.0;
    double per_dispatch_low_us = 0.0;
    double per_dispatch_high_us = 0.0;
    OverheadPartition partition;
    double overhead_over_ttft = 0.0;        // overhead_total / ttft
    double framework_to_dispatch_ratio = 0.0;  // midpoint ratio
    bool overhead_dominates = false;        // overhead_total >= 0.5 * ttft
};

struct SensitivityReport {
    std::vector<SensitivityPoint> grid;
    bool dominance_stable = false;  // ordering holds at every grid point
    double min_overhead_over_ttft = 0.0;
    double max_overhead_over_ttft = 0.0;
};

// GFLOP/s and % of configured peak for a timed matmul.
EfficiencyReport efficiency(MatmulDims dims, double time_ms, double peak_tflops);

// Crossover batch size B* = t_overhead * throughput / (2 * d_in * d_out).
CrossoverResult crossover_batch(const CrossoverInput& in);

// Table-3-style partition of TTFT into dispatch and framework components.
// Throws Errc::RangeInverted unless per_dispatch.low <= per_dispatch.high <= per_op.
OverheadPartition overhead_partition(double ttft_fused_ms, size_t n_ops,
                                     MsRange per_dispatch_range_us, double per_op_overhead_us);

// Evaluates the partition at {-p, 0, +p}% on per-op overhead and both
// per-dispatch bounds; reports whether "per-operation overhead dominates TTFT"
// holds at every grid point.
SensitivityReport sensitivity_scan(double ttft_fused_ms, size_t n_ops,
                                   MsRange per_dispatch_range_us, double per_op_overhead_us,
                                   double perturb_percent);

struct SyncOverhead {
    double ms = 0.0;
    bool anomaly = false;  // negative difference: measurement anomaly
};

// T_token - T_forward.
SyncOverhead sync_overhead(double t_token_ms, double t_forward_ms);

// (ttft_unfused - ttft_fused) * 1000 / dispatches_saved, in microseconds.
// Negative results are reported as-is (fusion regression). Throws
// Errc::ZeroSavedDispatches when dispatches_saved == 0.
double derive_per_op_overhead(double ttft_unfused_ms, double ttft_fused_ms,
                              size_t dispatches_saved);

}  // namespace dispatchlab::analysis
