#pragma once

// Experiment registry and result emission. Each experiment produces one
// ResultRecord: config echo, hardware description, raw sample series with
// summary statistics, optional Welch comparisons, and derived analysis
// values. JSON output is byte-stable for GPU-free experiments.

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "dispatchlab/analysis.hpp"
#include "dispatchlab/gpu.hpp"

namespace dispatchlab::report {

enum class ExperimentId : uint8_t {
    seq_dispatch,
    single_op,
    timeline,
    rmsnorm_fusion,
    mlp_strategies,
    mega_kernel,
    matmul_efficiency,
    argmax_compare,
    toy_decode,
    crossover,
    sensitivity,
};

const char* experiment_name(ExperimentId id);
std::optional<ExperimentId> experiment_from_string(std::string_view name);
bool needs_gpu(ExperimentId id);

struct RunConfig {
    gpu::BackendChoice backend{gpu::BackendKind::any};
    bool high_performance = true;
    uint32_t runs = 30;    // timed runs per configuration
    uint32_t warmup = 5;   // warmup runs, excluded from samples
    analysis::MatmulDims dims{256, 256, 256};
    size_t hidden = 896;       // rmsnorm-fusion row width
    size_t intermediate = 256; // mlp-strategies intermediate (hidden from dims.k)
    std::string model = "tiny";
    uint64_t seed = 42;
    double eps = 1e-6;
    uint32_t n_dispatches = 100;
    size_t tokens = 50;
    double peak_tflops = 105.0;   // datasheet input for efficiency math
    double t_overhead_us = 95.0;  // crossover / partition per-op overhead
    double throughput_flops = 2e12;
    double perturb_percent = 20.0;
    // partition inputs (Table-3-shaped defaults)
    double ttft_fused_ms = 41.6;
    size_t n_ops = 564;
    double per_dispatch_low_us = 24.0;
    double per_dispatch_high_us = 36.0;
};

struct ResultRecord {
    nlohmann::json doc;
};

// Runs one experiment. GPU experiments acquire a context on config.backend
// (after the DISPATCH_LAB_BACKEND override). Throws Error: UnknownExperiment,
// OracleMismatch (a kernel failed its pre-timing oracle check), or any
// context/validation error.
ResultRecord run(ExperimentId id, const RunConfig& config);

enum class Format : uint8_t { json, csv };

// JSON: keys sorted, floats at 6 significant digits, schema_version present.
// CSV: one row per raw sample plus a summary row per series.
void emit(const ResultRecord& record, std::ostream& os, Format format);
void emit_file(const ResultRecord& record, const std::string& path, Format format);

// Rounds to 6 significant digits (the JSON float policy).
double round_sig6(double v);

}  // namespace dispatchlab::report
