#pragma once

// Toy transformer decoder with random weights: same per-layer op structure as
// a small LLM (norms, Q/K/V/O projections, gated MLP, residuals, KV-cache
// appends), with attention reduced to its projections plus a deterministic
// elementwise stand-in. Exists to reproduce dispatch-count arithmetic,
// fusion savings, TTFT-style timing, and per-token sync overhead — not token
// quality.

#include <cstdint>
#include <string>
#include <vector>

#include "dispatchlab/analysis.hpp"
#include "dispatchlab/kernels.hpp"
#include "dispatchlab/tensor.hpp"

namespace dispatchlab::decoder {

using analysis::derive_per_op_overhead;

struct ModelConfig {
    size_t layers = 0;
    size_t hidden = 0;
    size_t intermediate = 0;
    size_t kv_dim = 0;
    size_t vocab = 0;
    uint64_t seed = 42;
    size_t max_seq = 256;  // KV ring capacity
    float eps = 1e-6f;

    static ModelConfig tiny();          // 2 layers, 64 hidden — test scale
    static ModelConfig qwen05b_like();  // 24 layers, 896 hidden, 4864 inter
    static ModelConfig qwen15b_like();  // 28 layers, 1536 hidden, 8960 inter
    static ModelConfig preset(std::string_view name);

    void validate() const;
    size_t parameter_count() const;  // embedding tied to lm_head
};

enum class PipelineVariant : uint8_t { unfused, fused, tiled };
enum class ArgmaxMode : uint8_t { readback, device };

const char* variant_name(PipelineVariant v);
const char* argmax_mode_name(ArgmaxMode m);

struct DispatchLedger {
    PipelineVariant variant = PipelineVariant::unfused;
    size_t rmsnorm = 0;
    size_t matmul = 0;
    size_t elementwise = 0;
    size_t argmax = 0;
    size_t other = 0;
    size_t total = 0;            // sum of categories
    size_t saved_vs_unfused = 0;
};

// Pure accounting, no GPU. Counts one forward pass; argmax is included only
// in device mode (readback does the argmax on the host).
DispatchLedger dispatch_ledger(const ModelConfig& cfg, PipelineVariant variant,
                               ArgmaxMode mode = ArgmaxMode::readback);

struct TokenTiming {
    double ttft_ms = 0.0;
    std::vector<double> per_token_ms;
    std::vector<double> t_forward_ms;
    std::vector<double> sync_overhead_ms;  // per_token - t_forward
};

// Host-side copy of all weights, in the order they are generated. Retained
// only at test scale so the CPU oracle can referee full forwards.
struct DecoderWeights {
    HostTensor embedding;  // [vocab, hidden]; also the lm_head (tied)
    struct Layer {
        HostTensor norm1, wq, wk, wv, wo, norm2, wg, wu, wd;
    };
    std::vector<Layer> layers;
    HostTensor final_norm;
};

class ToyDecoder {
public:
    ToyDecoder(kernels::KernelLibrary& lib, ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    // Weights are kept on the host only when the model is small enough for
    // oracle refereeing; empty otherwise.
    const DecoderWeights& host_weights() const { return host_weights_; }
    bool has_host_weights() const { return host_weights_retained_; }

    // Runs one position through the stack; logits land in logits_buffer().
    // Encodes + submits, no wait.
    void forward(PipelineVariant variant, uint32_t token, size_t pos);
    gpu::DeviceBuffer logits_buffer() const { return logits_; }

    // Fixed seeded 5-token prompt.
    std::vector<uint32_t> prompt() const;

    struct GenerateResult {
        std::vector<uint32_t> tokens;  // generated tokens (prompt excluded)
        TokenTiming timing;
        DispatchLedger forward_ledger;
        uint64_t dispatches_executed = 0;  // device counter delta
        size_t forwards_run = 0;
        bool tie_flagged = false;  // top-2 logit margin < 2e-4 seen (readback mode)
    };
    GenerateResult generate(PipelineVariant variant, size_t n_tokens, ArgmaxMode mode);

private:
    kernels::KernelLibrary& lib_;
    gpu::GpuContext& ctx_;
    ModelConfig cfg_;
    DecoderWeights host_weights_;
    bool host_weights_retained_ = false;

    struct LayerBuffers {
        gpu::DeviceBuffer norm1, wq, wk, wv, wo, norm2, wg, wu, wd;
        gpu::DeviceBuffer k_cache, v_cache;  // [max_seq, kv_dim] rings
    };
    gpu::DeviceBuffer embedding_;
    std::vector<LayerBuffers> layers_;
    gpu::DeviceBuffer final_norm_;

    // activations, reused across forwards (queue is in-order); x ping-pongs
    // between two buffers so no dispatch reads and writes the same binding
    gpu::DeviceBuffer x_, x2_, attn_in_, q_, k_, v_, attn_out_, o_, mlp_out_, g_, u_, h_, d_;
    gpu::DeviceBuffer logits_;
    gpu::DeviceBuffer argmax_idx_;

    void build_weights();
    void encode_forward(gpu::CommandEncoder& enc, PipelineVariant variant, uint32_t token,
                        size_t pos);
    uint32_t read_argmax(ArgmaxMode mode, bool* tie_flag);
};

}  // namespace dispatchlab::decoder
