#pragma once

// The two measurement modes at the core of the methodology:
//   single_op   — one dispatch per submit+wait cycle; conflates dispatch cost
//                 with GPU-CPU synchronization.
//   sequential  — N dispatches with a single trailing wait; wall time / N is
//                 the true per-dispatch cost.
// Plus a per-phase timeline that attributes CPU time to each WebGPU API call.

#include <cstdint>
#include <string>
#include <vector>

#include "dispatchlab/gpu.hpp"
#include "dispatchlab/kernels.hpp"

namespace dispatchlab::profiler {

enum class MeasureMode : uint8_t { single_op, sequential };

struct MeasurementBatch {
    MeasureMode mode = MeasureMode::single_op;
    uint32_t n_dispatches_per_sample = 1;
    uint32_t warmup_runs = 0;
    std::vector<double> samples_us;  // wall-clock per sample, warmup excluded

    std::vector<double> per_dispatch_series() const;
    double mean_per_dispatch_us() const;
};

// The profiled payload: a pipeline with rotating bind entries so consecutive
// dispatches write alternating output buffers and stay independent.
struct ProfiledKernel {
    gpu::ComputePipeline pipeline;
    std::vector<std::vector<std::pair<uint32_t, gpu::DeviceBuffer>>> bind_entries;
    uint32_t gx = 1, gy = 1, gz = 1;
};

// Default payload: one-workgroup elementwise add over 256 elements.
ProfiledKernel default_payload(kernels::KernelLibrary& lib);

struct ProfilerOptions {
    bool reuse_bind_groups = false;  // default: fresh bind group per dispatch
    bool warn_on_high_cv = true;     // CV > 5% post-warmup prints to stderr
};

MeasurementBatch measure_single_op(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                   uint32_t runs, uint32_t warmup,
                                   const ProfilerOptions& opts = {});

MeasurementBatch measure_sequential(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                    uint32_t n_dispatches, uint32_t runs, uint32_t warmup,
                                    const ProfilerOptions& opts = {});

enum class Phase : uint8_t {
    encoder_create,
    pass_begin,
    set_pipeline,
    set_bind_group,
    dispatch_call,
    pass_end,
    encoder_finish,
    submit,
};
inline constexpr int kPhaseCount = 8;
const char* phase_name(Phase p);

struct TimelineBreakdown {
    uint32_t n_dispatches = 0;
    double phase_total_us[kPhaseCount] = {};
    double total_cpu_us = 0.0;   // sum of phase totals (chained timestamps)
    double wall_clock_us = 0.0;  // includes the trailing wait
    double gpu_sync_us = 0.0;    // the single trailing wait

    double per_dispatch_us(Phase p) const;
    double submit_fraction() const;  // submit / total_cpu
    Phase dominant_phase() const;
};

// Times each API phase across n_dispatches (one encoder per dispatch), with a
// single trailing wait. Throws ClockTooCoarse if the monotonic clock cannot
// resolve 1 us.
TimelineBreakdown measure_timeline(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                   uint32_t n_dispatches = 100);

// Monotonic clock granularity in microseconds (smallest observable nonzero
// delta between consecutive readings).
double clock_resolution_us();

}  // namespace dispatchlab::profiler
