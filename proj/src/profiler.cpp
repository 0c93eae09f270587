#include "dispatchlab/profiler.hpp"

#include <chrono>
#include <cstdio>

#include "dispatchlab/error.hpp"
#include "dispatchlab/stats.hpp"

namespace dispatchlab::profiler {

namespace {

using Clock = std::chrono::steady_clock;

double us_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

void check_preconditions(uint32_t runs) {
    if (runs < 10) raise(Errc::TooFewSamples, "measurement needs runs >= 10");
}

void maybe_warn_cv(const MeasurementBatch& batch, const ProfilerOptions& opts,
                   const char* what) {
    if (!opts.warn_on_high_cv || batch.samples_us.size() < 2) return;
    auto s = stats::summarize(batch.samples_us);
    if (s.cv_percent > 5.0)
        std::fprintf(stderr,
                     "[dispatch-lab] warning: %s post-warmup CV %.1f%% exceeds 5%%; machine may "
                     "not be idle\n",
                     what, s.cv_percent);
}

gpu::BindGroup bind_for(gpu::GpuContext& ctx, const ProfiledKernel& k, size_t i) {
    const auto& entries = k.bind_entries[i % k.bind_entries.size()];
    return ctx.create_bind_group(k.pipeline, entries);
}

}  // namespace

std::vector<double> MeasurementBatch::per_dispatch_series() const {
    std::vector<double> out;
    out.reserve(samples_us.size());
    for (double s : samples_us) out.push_back(s / double(n_dispatches_per_sample));
    return out;
}

double MeasurementBatch::mean_per_dispatch_us() const {
    if (samples_us.empty()) return 0.0;
    double sum = 0.0;
    for (double s : samples_us) sum += s;
    return sum / double(samples_us.size()) / double(n_dispatches_per_sample);
}

ProfiledKernel default_payload(kernels::KernelLibrary& lib) {
    const uint32_t n = 256;
    gpu::GpuContext& ctx = lib.ctx();
    HostTensor a = random_tensor({n}, 7);
    HostTensor b = random_tensor({n}, 8);
    gpu::DeviceBuffer da = ctx.upload(a);
    gpu::DeviceBuffer db = ctx.upload(b);
    gpu::DeviceBuffer out0 = ctx.create_buffer(n * 4, gpu::usage::storage | gpu::usage::copy_src);
    gpu::DeviceBuffer out1 = ctx.create_buffer(n * 4, gpu::usage::storage | gpu::usage::copy_src);
    std::vector<uint32_t> words = {n, 0, 0, 0, 0, 0, 0, 0};
    gpu::DeviceBuffer params = ctx.create_buffer(words.size() * 4,
                                                 gpu::usage::uniform | gpu::usage::copy_dst);
    ctx.write_buffer(params, 0, words.data(), words.size() * 4);

    ProfiledKernel k;
    k.pipeline = lib.pipeline("elementwise", "add");
    // double-buffered outputs keep consecutive dispatches independent
    k.bind_entries.push_back({{0, params}, {1, da}, {2, db}, {3, out0}});
    k.bind_entries.push_back({{0, params}, {1, da}, {2, db}, {3, out1}});
    return k;
}

MeasurementBatch measure_single_op(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                   uint32_t runs, uint32_t warmup, const ProfilerOptions& opts) {
    check_preconditions(runs);
    MeasurementBatch batch;
    batch.mode = MeasureMode::single_op;
    batch.n_dispatches_per_sample = 1;
    batch.warmup_runs = warmup;

    gpu::BindGroup reused = opts.reuse_bind_groups ? bind_for(ctx, kernel, 0) : gpu::BindGroup{};
    for (uint32_t r = 0; r < warmup + runs; r++) {
        auto t0 = Clock::now();
        gpu::CommandEncoder enc = ctx.create_command_encoder();
        auto pass = enc.begin_compute_pass();
        pass.set_pipeline(kernel.pipeline);
        pass.set_bind_group(opts.reuse_bind_groups ? reused : bind_for(ctx, kernel, r));
        pass.dispatch_workgroups(kernel.gx, kernel.gy, kernel.gz);
        pass.end();
        ctx.submit(enc.finish());
        ctx.wait_idle();
        auto t1 = Clock::now();
        if (r >= warmup) batch.samples_us.push_back(us_between(t0, t1));
    }
    maybe_warn_cv(batch, opts, "single-op");
    return batch;
}

MeasurementBatch measure_sequential(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                    uint32_t n_dispatches, uint32_t runs, uint32_t warmup,
                                    const ProfilerOptions& opts) {
    check_preconditions(runs);
    if (n_dispatches == 0) raise(Errc::InvalidArgument, "sequential needs n_dispatches >= 1");
    MeasurementBatch batch;
    batch.mode = MeasureMode::sequential;
    batch.n_dispatches_per_sample = n_dispatches;
    batch.warmup_runs = warmup;

    gpu::BindGroup reused = opts.reuse_bind_groups ? bind_for(ctx, kernel, 0) : gpu::BindGroup{};
    for (uint32_t r = 0; r < warmup + runs; r++) {
        auto t0 = Clock::now();
        for (uint32_t i = 0; i < n_dispatches; i++) {
            // one command encoder per dispatch, matching the per-dispatch
            // encoder accounting of the timeline breakdown
            gpu::CommandEncoder enc = ctx.create_command_encoder();
            auto pass = enc.begin_compute_pass();
            pass.set_pipeline(kernel.pipeline);
            pass.set_bind_group(opts.reuse_bind_groups ? reused : bind_for(ctx, kernel, i));
            pass.dispatch_workgroups(kernel.gx, kernel.gy, kernel.gz);
            pass.end();
            ctx.submit(enc.finish());
        }
        ctx.wait_idle();  // sync only at the end
        auto t1 = Clock::now();
        if (r >= warmup) batch.samples_us.push_back(us_between(t0, t1));
    }
    maybe_warn_cv(batch, opts, "sequential");
    return batch;
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::encoder_create: return "encoder_create";
        case Phase::pass_begin: return "pass_begin";
        case Phase::set_pipeline: return "set_pipeline";
        case Phase::set_bind_group: return "set_bind_group";
        case Phase::dispatch_call: return "dispatch_call";
        case Phase::pass_end: return "pass_end";
        case Phase::encoder_finish: return "encoder_finish";
        case Phase::submit: return "submit";
    }
    return "?";
}

double TimelineBreakdown::per_dispatch_us(Phase p) const {
    return n_dispatches ? phase_total_us[int(p)] / double(n_dispatches) : 0.0;
}

double TimelineBreakdown::submit_fraction() const {
    return total_cpu_us > 0.0 ? phase_total_us[int(Phase::submit)] / total_cpu_us : 0.0;
}

Phase TimelineBreakdown::dominant_phase() const {
    int best = 0;
    for (int i = 1; i < kPhaseCount; i++)
        if (phase_total_us[i] > phase_total_us[best]) best = i;
    return Phase(best);
}

double clock_resolution_us() {
    double best = 1e9;
    for (int i = 0; i < 64; i++) {
        auto t0 = Clock::now();
        auto t1 = t0;
        do {
            t1 = Clock::now();
        } while (t1 == t0);
        best = std::min(best, us_between(t0, t1));
    }
    return best;
}

TimelineBreakdown measure_timeline(gpu::GpuContext& ctx, const ProfiledKernel& kernel,
                                   uint32_t n_dispatches) {
    if (n_dispatches == 0) raise(Errc::InvalidArgument, "timeline needs n_dispatches >= 1");
    if (clock_resolution_us() > 1.0)
        raise(Errc::ClockTooCoarse, "monotonic clock resolution is coarser than 1 us");

    TimelineBreakdown tb;
    tb.n_dispatches = n_dispatches;
    auto wall0 = Clock::now();
    for (uint32_t i = 0; i < n_dispatches; i++) {
        // Chained timestamps: phase k is t[k+1]-t[k], so the phase totals sum
        // exactly to the measured CPU time with no gaps.
        Clock::time_point t[kPhaseCount + 1];
        t[0] = Clock::now();
        gpu::CommandEncoder enc = ctx.create_command_encoder();
        t[1] = Clock::now();
        auto pass = enc.begin_compute_pass();
        t[2] = Clock::now();
        pass.set_pipeline(kernel.pipeline);
        t[3] = Clock::now();
        pass.set_bind_group(bind_for(ctx, kernel, i));
        t[4] = Clock::now();
        pass.dispatch_workgroups(kernel.gx, kernel.gy, kernel.gz);
        t[5] = Clock::now();
        pass.end();
        t[6] = Clock::now();
        gpu::CommandBuffer cb = enc.finish();
        t[7] = Clock::now();
        ctx.submit(std::move(cb));
        t[8] = Clock::now();
        for (int p = 0; p < kPhaseCount; p++) tb.phase_total_us[p] += us_between(t[p], t[p + 1]);
        tb.total_cpu_us += us_between(t[0], t[8]);
    }
    auto sync0 = Clock::now();
    ctx.wait_idle();
    auto wall1 = Clock::now();
    tb.gpu_sync_us = us_between(sync0, wall1);
    tb.wall_clock_us = us_between(wall0, wall1);
    return tb;
}

}  // namespace dispatchlab::profiler
