#include "dispatchlab/analysis.hpp"

#include <cmath>

#include "dispatchlab/error.hpp"

namespace dispatchlab::analysis {

EfficiencyReport efficiency(MatmulDims dims, double time_ms, double peak_tflops) {
    if (dims.m == 0 || dims.k == 0 || dims.n == 0 || time_ms <= 0.0 || peak_tflops <= 0.0)
        raise(Errc::InvalidArgument, "efficiency needs positive dims/time/peak");
    EfficiencyReport r;
    r.dims = dims;
    r.time_ms = time_ms;
    r.peak_tflops = peak_tflops;
    r.gflops = dims.flops() / (time_ms * 1e6);
    r.percent_peak = r.gflops / (peak_tflops * 1000.0) * 100.0;
    return r;
}

CrossoverResult crossover_batch(const CrossoverInput& in) {
    if (in.t_overhead_us <= 0.0 || in.throughput_flops <= 0.0 || in.d_in == 0 || in.d_out == 0)
        raise(Errc::InvalidArgument, "crossover_batch needs positive inputs");
    CrossoverResult r;
    r.raw = (in.t_overhead_us * 1e-6) * in.throughput_flops /
            (2.0 * double(in.d_in) * double(in.d_out));
    r.rounded = static_cast<long>(std::floor(r.raw + 0.5));  // round half up
    return r;
}

OverheadPartition overhead_partition(double ttft_fused_ms, size_t n_ops,
                                     MsRange per_dispatch_range_us, double per_op_overhead_us) {
    if (!(per_dispatch_range_us.low <= per_dispatch_range_us.high &&
          per_dispatch_range_us.high <= per_op_overhead_us))
        raise(Errc::RangeInverted, "need per_dispatch.low <= high <= per_op_overhead");
    OverheadPartition p;
    p.ttft_ms = ttft_fused_ms;
    p.n_ops = n_ops;
    p.per_op_overhead_us = per_op_overhead_us;
    p.per_dispatch_cost_us = per_dispatch_range_us;
    // Framework = per-operation overhead - per-dispatch cost, elementwise on bounds:
    // the cheap-dispatch end leaves the most to the framework.
    p.framework_us = {per_op_overhead_us - per_dispatch_range_us.high,
                      per_op_overhead_us - per_dispatch_range_us.low};
    double ops = static_cast<double>(n_ops);
    p.dispatch_component_ms = {ops * per_dispatch_range_us.low / 1000.0,
                               ops * per_dispatch_range_us.high / 1000.0};
    p.framework_component_ms = {ops * p.framework_us.low / 1000.0,
                                ops * p.framework_us.high / 1000.0};
    p.overhead_total_ms = ops * per_op_overhead_us / 1000.0;
    p.overlap_residual_ms = p.overhead_total_ms - ttft_fused_ms;
    return p;
}

SensitivityReport sensitivity_scan(double ttft_fused_ms, size_t n_ops,
                                   MsRange per_dispatch_range_us, double per_op_overhead_us,
                                   double perturb_percent) {
    if (!(perturb_percent > 0.0 && perturb_percent <= 50.0))
        raise(Errc::InvalidArgument, "perturb_percent must be in (0, 50]");
    SensitivityReport rep;
    rep.min_overhead_over_ttft = 1e300;
    rep.max_overhead_over_ttft = 0.0;
    const double f[3] = {1.0 - perturb_percent / 100.0, 1.0, 1.0 + perturb_percent / 100.0};
    for (double fo : f) {
        for (double fl : f) {
            for (double fh : f) {
                SensitivityPoint pt;
                pt.per_op_us = per_op_overhead_us * fo;
                pt.per_dispatch_low_us = per_dispatch_range_us.low * fl;
                pt.per_dispatch_high_us = per_dispatch_range_us.high * fh;
                MsRange disp{pt.per_dispatch_low_us, pt.per_dispatch_high_us};
                if (disp.low > disp.high) std::swap(disp.low, disp.high);
                if (disp.high > pt.per_op_us) disp.high = pt.per_op_us;
                if (disp.low > disp.high) disp.low = disp.high;
                pt.partition = overhead_partition(ttft_fused_ms, n_ops, disp, pt.per_op_us);
                pt.overhead_over_ttft = pt.partition.overhead_total_ms / ttft_fused_ms;
                double disp_mid =
                    0.5 * (pt.partition.dispatch_component_ms.low +
                           pt.partition.dispatch_component_ms.high);
                double fw_mid = 0.5 * (pt.partition.framework_component_ms.low +
                                       pt.partition.framework_component_ms.high);
                pt.framework_to_dispatch_ratio = disp_mid > 0.0 ? fw_mid / disp_mid : 0.0;
                pt.overhead_dominates = pt.overhead_over_ttft >= 0.5;
                rep.min_overhead_over_ttft =
                    std::min(rep.min_overhead_over_ttft, pt.overhead_over_ttft);
                rep.max_overhead_over_ttft =
                    std::max(rep.max_overhead_over_ttft, pt.overhead_over_ttft);
                rep.grid.push_back(pt);
            }
        }
    }
    rep.dominance_stable = true;
    for (const auto& pt : rep.grid)
        if (!pt.overhead_dominates) rep.dominance_stable = false;
    return rep;
}

SyncOverhead sync_overhead(double t_token_ms, double t_forward_ms) {
    SyncOverhead s;
    s.ms = t_token_ms - t_forward_ms;
    s.anomaly = s.ms < 0.0;
    return s;
}

double derive_per_op_overhead(double ttft_unfused_ms, double ttft_fused_ms,
                              size_t dispatches_saved) {
    if (dispatches_saved == 0)
        raise(Errc::ZeroSavedDispatches, "per-op overhead derivation needs saved dispatches > 0");
    return (ttft_unfused_ms - ttft_fused_ms) * 1000.0 / static_cast<double>(dispatches_saved);
}

}  // namespace dispatchlab::analysis
