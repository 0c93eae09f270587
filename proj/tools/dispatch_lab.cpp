// dispatch_lab: runs one experiment and writes a JSON/CSV result record.
// Exit codes: 0 success, 2 hard error, 3 invariant violation (a kernel
// disagreed with the CPU oracle before timing).

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dispatchlab/error.hpp"
#include "dispatchlab/report.hpp"

using namespace dispatchlab;

int main(int argc, char** argv) {
    CLI::App app{
        "dispatch-lab: WebGPU compute-dispatch characterization suite.\n"
        "Results go to --out; logs go to stderr."};

    std::string experiment;
    std::string backend = "any";
    std::string model = "tiny";
    std::string out_path;
    std::string format = "json";
    std::vector<size_t> dims;
    report::RunConfig cfg;

    app.add_option("--experiment", experiment,
                   "one of: seq-dispatch single-op timeline rmsnorm-fusion mlp-strategies "
                   "mega-kernel matmul-efficiency argmax-compare toy-decode crossover "
                   "sensitivity")
        ->required();
    app.add_option("--backend", backend, "vulkan|metal|d3d12|software|any (default any; "
                                         "DISPATCH_LAB_BACKEND overrides)");
    app.add_option("--runs", cfg.runs, "timed runs (default 30)");
    app.add_option("--warmup", cfg.warmup, "warmup runs, excluded (default 5)");
    app.add_option("--dims", dims, "matmul dims m,k,n")->delimiter(',')->expected(3);
    app.add_option("--model", model, "tiny|qwen05b-like|qwen15b-like (default tiny)");
    app.add_option("--seed", cfg.seed, "PRNG seed (default 42)");
    app.add_option("--eps", cfg.eps, "rmsnorm epsilon (default 1e-6)");
    app.add_option("--out", out_path, "output path (default <experiment>.<format>)");
    app.add_option("--format", format, "json|csv (default json)");
    app.add_option("--n-dispatches", cfg.n_dispatches,
                   "dispatches per sample for single-op/timeline (default 100)");
    app.add_option("--tokens", cfg.tokens, "tokens to generate in toy-decode (default 50)");
    app.add_option("--hidden", cfg.hidden, "rmsnorm-fusion row width (default 896)");
    app.add_option("--inter", cfg.intermediate,
                   "mlp-strategies/mega-kernel intermediate dim (default 256)");
    app.add_option("--peak-tflops", cfg.peak_tflops,
                   "datasheet FP32 peak for efficiency math (default 105)");
    app.add_option("--t-overhead-us", cfg.t_overhead_us,
                   "per-operation overhead for crossover/sensitivity (default 95)");
    app.add_option("--throughput-flops", cfg.throughput_flops,
                   "sustained kernel throughput for crossover (default 2e12)");
    app.add_option("--perturb-percent", cfg.perturb_percent,
                   "sensitivity perturbation (default 20)");
    bool low_power = false;
    app.add_flag("--low-power", low_power, "prefer a low-power adapter");

    CLI11_PARSE(app, argc, argv);

    try {
        auto id = report::experiment_from_string(experiment);
        if (!id) raise(Errc::UnknownExperiment, "no experiment named '" + experiment + "'");
        auto be = gpu::backend_from_string(backend);
        if (!be) raise(Errc::InvalidArgument, "unknown backend '" + backend + "'");
        cfg.backend = {*be};
        cfg.high_performance = !low_power;
        cfg.model = model;
        if (!dims.empty()) cfg.dims = {dims[0], dims[1], dims[2]};

        report::Format fmt;
        if (format == "json") fmt = report::Format::json;
        else if (format == "csv") fmt = report::Format::csv;
        else raise(Errc::InvalidArgument, "unknown format '" + format + "'");
        if (out_path.empty()) out_path = experiment + "." + format;

        std::fprintf(stderr, "[dispatch-lab] running %s\n", experiment.c_str());
        report::ResultRecord rec = report::run(*id, cfg);
        report::emit_file(rec, out_path, fmt);
        std::fprintf(stderr, "[dispatch-lab] wrote %s\n", out_path.c_str());
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "[dispatch-lab] error: %s\n", e.what());
        return e.code() == Errc::OracleMismatch ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[dispatch-lab] error: %s\n", e.what());
        return 2;
    }
}
