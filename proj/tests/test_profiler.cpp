#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dispatchlab/error.hpp"
#include "dispatchlab/profiler.hpp"
#include "dispatchlab/stats.hpp"

using namespace dispatchlab;
using namespace dispatchlab::profiler;

namespace {

kernels::KernelLibrary& lib() {
    static kernels::KernelLibrary instance(
        gpu::acquire_context({gpu::BackendKind::any}, true));
    return instance;
}

}  // namespace

TEST_CASE("clock resolution is fine enough for the methodology") {
    CHECK(clock_resolution_us() <= 1.0);
}

TEST_CASE("single-op batch shape") {
    auto payload = default_payload(lib());
    auto batch = measure_single_op(lib().ctx(), payload, 12, 3);
    CHECK(batch.mode == MeasureMode::single_op);
    CHECK(batch.samples_us.size() == 12);
    CHECK(batch.n_dispatches_per_sample == 1);
    CHECK(batch.warmup_runs == 3);
    for (double s : batch.samples_us) CHECK(s > 0.0);
}

TEST_CASE("runs below 10 are rejected") {
    auto payload = default_payload(lib());
    CHECK_THROWS_AS(measure_single_op(lib().ctx(), payload, 5, 0), Error);
    CHECK_THROWS_AS(measure_sequential(lib().ctx(), payload, 30, 4, 0), Error);
}

TEST_CASE("sequential batch divides by n_dispatches") {
    auto payload = default_payload(lib());
    auto batch = measure_sequential(lib().ctx(), payload, 40, 10, 2);
    CHECK(batch.mode == MeasureMode::sequential);
    CHECK(batch.n_dispatches_per_sample == 40);
    CHECK(batch.samples_us.size() == 10);
    auto per = batch.per_dispatch_series();
    for (size_t i = 0; i < per.size(); i++)
        CHECK(per[i] == doctest::Approx(batch.samples_us[i] / 40.0));
}

TEST_CASE("n_dispatches=1 degenerates to single-op shape") {
    auto payload = default_payload(lib());
    auto batch = measure_sequential(lib().ctx(), payload, 1, 10, 2);
    CHECK(batch.samples_us.size() == 10);
    CHECK(batch.n_dispatches_per_sample == 1);
}

TEST_CASE("single-op cost exceeds sequential per-dispatch cost") {
    // On any asynchronous queue the per-sample sync must cost something; the
    // strict 5x acceptance bound is asserted only on native GPU backends, but
    // the ordering itself is structural. Medians keep this robust to
    // scheduler noise on loaded machines.
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    auto payload = default_payload(lib());
    auto single = measure_single_op(lib().ctx(), payload, 21, 5);
    auto seq = measure_sequential(lib().ctx(), payload, 100, 15, 3);
    double single_med = median(single.samples_us);
    double seq_med = median(seq.per_dispatch_series());
    INFO("single-op median us = ", single_med, ", sequential per-dispatch us = ", seq_med);
    CHECK(single_med > seq_med);
}

TEST_CASE("timeline accounting identities") {
    auto payload = default_payload(lib());
    auto tb = measure_timeline(lib().ctx(), payload, 100);
    CHECK(tb.n_dispatches == 100);
    double sum = 0.0;
    for (int p = 0; p < kPhaseCount; p++) {
        CHECK(tb.phase_total_us[p] >= 0.0);
        sum += tb.phase_total_us[p];
    }
    // chained timestamps: phases sum to total CPU time within 1%
    CHECK(std::fabs(sum - tb.total_cpu_us) <= 0.01 * tb.total_cpu_us);
    CHECK(tb.total_cpu_us <= tb.wall_clock_us);
    CHECK(tb.gpu_sync_us >= 0.0);
    CHECK(tb.submit_fraction() >= 0.0);
    CHECK(tb.submit_fraction() <= 1.0);
    CHECK(std::string(phase_name(tb.dominant_phase())).size() > 0);
}

TEST_CASE("reuse_bind_groups flag works") {
    auto payload = default_payload(lib());
    ProfilerOptions opts;
    opts.reuse_bind_groups = true;
    auto batch = measure_sequential(lib().ctx(), payload, 32, 10, 2, opts);
    CHECK(batch.samples_us.size() == 10);
}
