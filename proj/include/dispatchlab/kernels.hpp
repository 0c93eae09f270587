#pragma once

// Kernel library: every WGSL variant the suite benchmarks, each with its
// declared dispatch decomposition. Plans expose the exact dispatch list so
// ledgers and benchmarks count what actually gets submitted; the HostTensor
// convenience ops wrap a plan with upload/dispatch/download for tests.

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "dispatchlab/analysis.hpp"
#include "dispatchlab/gpu.hpp"
#include "dispatchlab/oracle.hpp"
#include "dispatchlab/tensor.hpp"

namespace dispatchlab::kernels {

using analysis::MatmulDims;

enum class Variant : uint8_t {
    matmul_naive,
    matmul_tiled16,
    rmsnorm_unfused_chain,
    rmsnorm_fused,
    mlp_unfused7,
    mlp_tiled3,
    mega_mlp1,
    mlp_fused_gate_up_silu,
    kv_fused_proj,
    softmax_naive,
    softmax_parallel256,
    argmax_device,
    elementwise,
};

struct KernelVariantInfo {
    Variant id;
    uint32_t dispatch_count;                 // declared decomposition
    std::array<uint32_t, 3> workgroup_shape; // threads per workgroup
    const char* shader_file;                 // stem under shaders/
};

const KernelVariantInfo& variant_info(Variant v);
const char* variant_name(Variant v);

struct RmsNormParams {
    size_t hidden = 0;
    float eps = 1e-6f;
    HostTensor weight;
};

// One recorded dispatch: pipeline + bindings + grid.
struct BoundKernel {
    gpu::ComputePipeline pipeline;
    gpu::BindGroup bind_group;
    uint32_t gx = 1, gy = 1, gz = 1;
};

void encode(gpu::CommandEncoder& enc, const BoundKernel& k);
void encode_all(gpu::CommandEncoder& enc, const std::vector<BoundKernel>& plan);

// Elementwise kernel kinds (entries of elementwise.wgsl).
struct ElementwiseArgs {
    uint32_t n = 0;
    uint32_t src_off = 0;
    uint32_t dst_off = 0;
    uint32_t row = 0;
    uint32_t kv_dim = 0;
    float scalar = 0.0f;
};

class KernelLibrary {
public:
    explicit KernelLibrary(gpu::GpuContext ctx);

    gpu::GpuContext& ctx() { return ctx_; }

    // Cached pipeline for (shader file stem, entry point).
    gpu::ComputePipeline pipeline(std::string_view file_stem, std::string_view entry);

    // Uniform buffer from raw words, padded to a 16-byte multiple.
    gpu::DeviceBuffer make_uniform(std::vector<uint32_t> words);

    // ---- dispatch plans (no submission) ----

    std::vector<BoundKernel> plan_matmul(Variant v, MatmulDims dims, gpu::DeviceBuffer a,
                                         gpu::DeviceBuffer b, gpu::DeviceBuffer c);
    std::vector<BoundKernel> plan_rmsnorm(Variant v, size_t rows, size_t hidden, float eps,
                                          gpu::DeviceBuffer x, gpu::DeviceBuffer weight,
                                          gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_mlp_block(Variant v, size_t hidden, size_t inter, float eps,
                                            gpu::DeviceBuffer x, gpu::DeviceBuffer norm_w,
                                            gpu::DeviceBuffer wg, gpu::DeviceBuffer wu,
                                            gpu::DeviceBuffer wd, gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_fused_gate_up_silu(size_t hidden, size_t inter,
                                                     gpu::DeviceBuffer x, gpu::DeviceBuffer wg,
                                                     gpu::DeviceBuffer wu, gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_kv_fused_proj(size_t hidden, size_t kv_dim,
                                                gpu::DeviceBuffer x, gpu::DeviceBuffer wk,
                                                gpu::DeviceBuffer wv, gpu::DeviceBuffer out_k,
                                                gpu::DeviceBuffer out_v);
    std::vector<BoundKernel> plan_softmax(Variant v, size_t rows, size_t cols,
                                          gpu::DeviceBuffer x, gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_argmax_device(size_t len, gpu::DeviceBuffer x,
                                                gpu::DeviceBuffer out_idx);
    std::vector<BoundKernel> plan_elementwise(std::string_view kind, const ElementwiseArgs& args,
                                              gpu::DeviceBuffer a, gpu::DeviceBuffer b,
                                              gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_linear_wt(size_t in_dim, size_t out_dim, gpu::DeviceBuffer x,
                                            gpu::DeviceBuffer w, gpu::DeviceBuffer out);
    std::vector<BoundKernel> plan_attn_mix(size_t hidden, size_t kv_dim, gpu::DeviceBuffer q,
                                           gpu::DeviceBuffer k, gpu::DeviceBuffer v,
                                           gpu::DeviceBuffer out);

    // ---- upload/dispatch/download surfaces ----

    HostTensor matmul(Variant v, const HostTensor& a, const HostTensor& b);
    HostTensor rmsnorm(Variant v, const HostTensor& x, const RmsNormParams& params);
    HostTensor mlp_block(Variant v, const HostTensor& x, const oracle::MlpWeights& w, float eps);
    HostTensor fused_gate_up_silu(const HostTensor& x, const HostTensor& wg,
                                  const HostTensor& wu);
    std::pair<HostTensor, HostTensor> kv_fused_proj(const HostTensor& x, const HostTensor& wk,
                                                    const HostTensor& wv);
    HostTensor softmax(Variant v, const HostTensor& x);
    uint32_t argmax_device(const HostTensor& logits);

    // Tiny profiling payload: one-workgroup elementwise add over 256 elements.
    // Small enough that kernel time is far below dispatch cost, nonzero so
    // drivers cannot elide it.
    BoundKernel profiling_kernel();

    void run_plan(const std::vector<BoundKernel>& plan);  // encode + submit (no wait)

private:
    gpu::GpuContext ctx_;
    struct CachedModule {
        std::string stem;
        gpu::ShaderModule module;
    };
    std::vector<CachedModule> modules_;
    struct CachedPipeline {
        std::string key;
        gpu::ComputePipeline pipeline;
    };
    std::vector<CachedPipeline> pipelines_;

    gpu::ShaderModule& module(std::string_view stem);
};

}  // namespace dispatchlab::kernels
