#include "dispatchlab/decoder.hpp"

#include <chrono>
#include <cmath>

#include "dispatchlab/error.hpp"
#include "dispatchlab/oracle.hpp"

namespace dispatchlab::decoder {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

constexpr size_t kHostWeightRetentionLimit = 1u << 22;  // 4M floats ≈ 16 MB

HostTensor random_weight(SeededRng& rng, std::vector<size_t> shape) {
    HostTensor t;
    t.spec.shape = std::move(shape);
    t.data.resize(t.spec.element_count());
    for (float& v : t.data) v = rng.next_float(-0.02f, 0.02f);
    return t;
}

// Norm scale weights sit near 1 in trained models; drawing them zero-centered
// would collapse the logit range and make greedy near-ties an artifact of the
// toy rather than of the pipeline under test.
HostTensor random_norm_weight(SeededRng& rng, size_t hidden) {
    HostTensor t = random_weight(rng, {hidden});
    for (float& v : t.data) v += 1.0f;
    return t;
}

}  // namespace

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.layers = 2;
    c.hidden = 64;
    c.intermediate = 128;
    c.kv_dim = 32;
    c.vocab = 256;
    return c;
}

ModelConfig ModelConfig::qwen05b_like() {
    ModelConfig c;
    c.layers = 24;
    c.hidden = 896;
    c.intermediate = 4864;
    c.kv_dim = 128;
    c.vocab = 151936;
    return c;
}

ModelConfig ModelConfig::qwen15b_like() {
    ModelConfig c;
    c.layers = 28;
    c.hidden = 1536;
    c.intermediate = 8960;
    c.kv_dim = 256;
    c.vocab = 151936;
    return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
    if (name == "tiny") return tiny();
    if (name == "qwen05b-like") return qwen05b_like();
    if (name == "qwen15b-like") return qwen15b_like();
    raise(Errc::InvalidArgument, "unknown model preset '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
    // layers == 0 is a valid degenerate depth: embedding + final norm + head
    if (hidden == 0 || intermediate == 0 || kv_dim == 0 || vocab == 0 || max_seq == 0)
        raise(Errc::InvalidArgument, "model dims must be positive");
    if (eps <= 0.0f) raise(Errc::InvalidArgument, "eps must be > 0");
}

size_t ModelConfig::parameter_count() const {
    size_t per_layer = hidden                        // norm1
                       + hidden * hidden             // wq
                       + 2 * kv_dim * hidden         // wk, wv
                       + hidden * hidden             // wo
                       + hidden                      // norm2
                       + 2 * hidden * intermediate   // wg, wu
                       + hidden * intermediate;      // wd
    return vocab * hidden + layers * per_layer + hidden;  // tied embedding + final norm
}

const char* variant_name(PipelineVariant v) {
    switch (v) {
        case PipelineVariant::unfused: return "unfused";
        case PipelineVariant::fused: return "fused";
        case PipelineVariant::tiled: return "tiled";
    }
    return "?";
}

const char* argmax_mode_name(ArgmaxMode m) {
    return m == ArgmaxMode::readback ? "readback" : "device";
}

DispatchLedger dispatch_ledger(const ModelConfig& cfg, PipelineVariant variant,
                               ArgmaxMode mode) {
    DispatchLedger l;
    l.variant = variant;
    size_t L = cfg.layers;
    switch (variant) {
        case PipelineVariant::unfused:
            // per layer: 2 six-dispatch norm chains; Q,K,V,O,gate,up,down
            // matmuls; mul_silu + 2 residuals + 2 cache copies; attn stand-in
            l.rmsnorm = 12 * L;
            l.matmul = 7 * L;
            l.elementwise = 5 * L;
            l.other = L;
            break;
        case PipelineVariant::fused:
            // per layer: 2 fused norms; Q, fused-KV, O, fused-gate-up-silu,
            // down matmuls; 2 residuals + 2 cache copies; attn stand-in
            l.rmsnorm = 2 * L;
            l.matmul = 5 * L;
            l.elementwise = 4 * L;
            l.other = L;
            break;
        case PipelineVariant::tiled:
            // fused, with down-projection + residual merged into one dispatch
            l.rmsnorm = 2 * L;
            l.matmul = 5 * L;
            l.elementwise = 3 * L;
            l.other = L;
            break;
    }
    // shared head: embedding gather, final norm (fused in every variant),
    // lm_head matmul; device-side argmax when selected
    l.other += 1;
    l.rmsnorm += 1;
    l.matmul += 1;
    if (mode == ArgmaxMode::device) l.argmax = 1;
    l.total = l.rmsnorm + l.matmul + l.elementwise + l.argmax + l.other;

    DispatchLedger unfused_base;
    if (variant == PipelineVariant::unfused) {
        l.saved_vs_unfused = 0;
    } else {
        unfused_base = dispatch_ledger(cfg, PipelineVariant::unfused, mode);
        l.saved_vs_unfused = unfused_base.total - l.total;
    }
    return l;
}

ToyDecoder::ToyDecoder(kernels::KernelLibrary& lib, ModelConfig cfg)
    : lib_(lib), ctx_(lib.ctx()), cfg_(cfg) {
    cfg_.validate();
    try {
        build_weights();
    } catch (const std::bad_alloc&) {
        raise(Errc::OutOfMemory, "model weights exceed available memory");
    }
}

void ToyDecoder::build_weights() {
    SeededRng rng(cfg_.seed);
    host_weights_retained_ = cfg_.parameter_count() <= kHostWeightRetentionLimit;

    auto up = [&](HostTensor&& t, HostTensor* keep) {
        gpu::DeviceBuffer buf = ctx_.upload(t);
        if (keep && host_weights_retained_) *keep = std::move(t);
        return buf;
    };

    // generation order is part of the determinism contract: embedding, then
    // per-layer norm1, wq, wk, wv, wo, norm2, wg, wu, wd, then final norm
    embedding_ = up(random_weight(rng, {cfg_.vocab, cfg_.hidden}), &host_weights_.embedding);
    layers_.resize(cfg_.layers);
    if (host_weights_retained_) host_weights_.layers.resize(cfg_.layers);
    for (size_t i = 0; i < cfg_.layers; i++) {
        auto* hw = host_weights_retained_ ? &host_weights_.layers[i] : nullptr;
        LayerBuffers& lb = layers_[i];
        lb.norm1 = up(random_norm_weight(rng, cfg_.hidden), hw ? &hw->norm1 : nullptr);
        lb.wq = up(random_weight(rng, {cfg_.hidden, cfg_.hidden}), hw ? &hw->wq : nullptr);
        lb.wk = up(random_weight(rng, {cfg_.kv_dim, cfg_.hidden}), hw ? &hw->wk : nullptr);
        lb.wv = up(random_weight(rng, {cfg_.kv_dim, cfg_.hidden}), hw ? &hw->wv : nullptr);
        lb.wo = up(random_weight(rng, {cfg_.hidden, cfg_.hidden}), hw ? &hw->wo : nullptr);
        lb.norm2 = up(random_norm_weight(rng, cfg_.hidden), hw ? &hw->norm2 : nullptr);
        lb.wg = up(random_weight(rng, {cfg_.intermediate, cfg_.hidden}), hw ? &hw->wg : nullptr);
        lb.wu = up(random_weight(rng, {cfg_.intermediate, cfg_.hidden}), hw ? &hw->wu : nullptr);
        lb.wd = up(random_weight(rng, {cfg_.hidden, cfg_.intermediate}), hw ? &hw->wd : nullptr);
        const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
        lb.k_cache = ctx_.create_buffer(cfg_.max_seq * cfg_.kv_dim * 4, st);
        lb.v_cache = ctx_.create_buffer(cfg_.max_seq * cfg_.kv_dim * 4, st);
    }
    final_norm_ = up(random_norm_weight(rng, cfg_.hidden), &host_weights_.final_norm);

    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    x_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    x2_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    attn_in_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    q_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    k_ = ctx_.create_buffer(cfg_.kv_dim * 4, st);
    v_ = ctx_.create_buffer(cfg_.kv_dim * 4, st);
    attn_out_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    o_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    mlp_out_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    g_ = ctx_.create_buffer(cfg_.intermediate * 4, st);
    u_ = ctx_.create_buffer(cfg_.intermediate * 4, st);
    h_ = ctx_.create_buffer(cfg_.intermediate * 4, st);
    d_ = ctx_.create_buffer(cfg_.hidden * 4, st);
    logits_ = ctx_.create_buffer(cfg_.vocab * 4, st);
    argmax_idx_ = ctx_.create_buffer(4, st);
}

std::vector<uint32_t> ToyDecoder::prompt() const {
    // fixed 5-token prompt; values are seed-derived (content is irrelevant
    // with random weights, determinism is not)
    SeededRng rng(cfg_.seed ^ 0x70726f6d70ull);
    std::vector<uint32_t> p(5);
    for (auto& t : p) t = rng.next_u32() % uint32_t(cfg_.vocab);
    return p;
}

void ToyDecoder::encode_forward(gpu::CommandEncoder& enc, PipelineVariant variant,
                                uint32_t token, size_t pos) {
    using kernels::ElementwiseArgs;
    using kernels::Variant;
    auto ew = [&](std::string_view kind, const ElementwiseArgs& args, gpu::DeviceBuffer a,
                  gpu::DeviceBuffer b, gpu::DeviceBuffer out) {
        kernels::encode_all(enc, lib_.plan_elementwise(kind, args, a, b, out));
    };

    // x ping-pongs so residual writers never alias their readers
    gpu::DeviceBuffer cur = x_;
    gpu::DeviceBuffer alt = x2_;

    // embedding gather
    {
        ElementwiseArgs args;
        args.n = uint32_t(cfg_.hidden);
        args.row = token;
        ew("gather_row", args, embedding_, {}, cur);
    }

    size_t slot = pos % cfg_.max_seq;
    for (size_t li = 0; li < cfg_.layers; li++) {
        LayerBuffers& lb = layers_[li];
        bool fused_norms = variant != PipelineVariant::unfused;

        // attention half
        kernels::encode_all(
            enc, lib_.plan_rmsnorm(fused_norms ? Variant::rmsnorm_fused
                                               : Variant::rmsnorm_unfused_chain,
                                   1, cfg_.hidden, cfg_.eps, cur, lb.norm1, attn_in_));
        kernels::encode_all(enc,
                            lib_.plan_linear_wt(cfg_.hidden, cfg_.hidden, attn_in_, lb.wq, q_));
        if (variant == PipelineVariant::unfused) {
            kernels::encode_all(
                enc, lib_.plan_linear_wt(cfg_.hidden, cfg_.kv_dim, attn_in_, lb.wk, k_));
            kernels::encode_all(
                enc, lib_.plan_linear_wt(cfg_.hidden, cfg_.kv_dim, attn_in_, lb.wv, v_));
        } else {
            kernels::encode_all(
                enc, lib_.plan_kv_fused_proj(cfg_.hidden, cfg_.kv_dim, attn_in_, lb.wk, lb.wv,
                                             k_, v_));
        }
        // KV-cache appends (elementwise copies, counted in the ledger)
        {
            ElementwiseArgs args;
            args.n = uint32_t(cfg_.kv_dim);
            args.dst_off = uint32_t(slot * cfg_.kv_dim);
            ew("copy_offset", args, k_, {}, lb.k_cache);
            ew("copy_offset", args, v_, {}, lb.v_cache);
        }
        // attention stand-in over the projections
        kernels::encode_all(enc,
                            lib_.plan_attn_mix(cfg_.hidden, cfg_.kv_dim, q_, k_, v_, attn_out_));
        kernels::encode_all(enc,
                            lib_.plan_linear_wt(cfg_.hidden, cfg_.hidden, attn_out_, lb.wo, o_));
        {
            ElementwiseArgs args;
            args.n = uint32_t(cfg_.hidden);
            ew("add", args, cur, o_, alt);
            std::swap(cur, alt);
        }

        // MLP half
        if (variant == PipelineVariant::tiled) {
            // three dispatches: norm, fused gate+up+silu, down+residual
            kernels::encode_all(enc, lib_.plan_mlp_block(Variant::mlp_tiled3, cfg_.hidden,
                                                         cfg_.intermediate, cfg_.eps, cur,
                                                         lb.norm2, lb.wg, lb.wu, lb.wd, alt));
            std::swap(cur, alt);
        } else {
            kernels::encode_all(enc, lib_.plan_rmsnorm(fused_norms
                                                           ? Variant::rmsnorm_fused
                                                           : Variant::rmsnorm_unfused_chain,
                                                       1, cfg_.hidden, cfg_.eps, cur, lb.norm2,
                                                       mlp_out_));
            if (variant == PipelineVariant::unfused) {
                kernels::encode_all(enc, lib_.plan_linear_wt(cfg_.hidden, cfg_.intermediate,
                                                             mlp_out_, lb.wg, g_));
                kernels::encode_all(enc, lib_.plan_linear_wt(cfg_.hidden, cfg_.intermediate,
                                                             mlp_out_, lb.wu, u_));
                ElementwiseArgs args;
                args.n = uint32_t(cfg_.intermediate);
                ew("mul_silu", args, g_, u_, h_);
            } else {
                kernels::encode_all(enc, lib_.plan_fused_gate_up_silu(
                                             cfg_.hidden, cfg_.intermediate, mlp_out_, lb.wg,
                                             lb.wu, h_));
            }
            kernels::encode_all(
                enc, lib_.plan_linear_wt(cfg_.intermediate, cfg_.hidden, h_, lb.wd, d_));
            ElementwiseArgs args;
            args.n = uint32_t(cfg_.hidden);
            ew("add", args, cur, d_, alt);
            std::swap(cur, alt);
        }
    }

    // final norm (fused kernel in every variant) + lm_head on tied embedding
    kernels::encode_all(enc, lib_.plan_rmsnorm(Variant::rmsnorm_fused, 1, cfg_.hidden, cfg_.eps,
                                               cur, final_norm_, attn_in_));
    kernels::encode_all(
        enc, lib_.plan_linear_wt(cfg_.hidden, cfg_.vocab, attn_in_, embedding_, logits_));
}

void ToyDecoder::forward(PipelineVariant variant, uint32_t token, size_t pos) {
    if (token >= cfg_.vocab) raise(Errc::InvalidArgument, "token id out of vocab");
    gpu::CommandEncoder enc = ctx_.create_command_encoder();
    encode_forward(enc, variant, token, pos);
    ctx_.submit(enc.finish());
}

uint32_t ToyDecoder::read_argmax(ArgmaxMode mode, bool* tie_flag) {
    if (mode == ArgmaxMode::device) {
        lib_.run_plan(lib_.plan_argmax_device(cfg_.vocab, logits_, argmax_idx_));
        return ctx_.download_words(argmax_idx_, 1)[0];  // 4-byte readback
    }
    // full-logits readback, host argmax
    HostTensor logits = ctx_.download(logits_, {{size_t(1), cfg_.vocab}});
    size_t best = oracle::argmax(logits);
    if (tie_flag) {
        float top = logits.data[best];
        float second = -3.4e38f;
        for (size_t i = 0; i < logits.data.size(); i++)
            if (i != best) second = std::max(second, logits.data[i]);
        if (top - second < 2e-4f) *tie_flag = true;
    }
    return uint32_t(best);
}

ToyDecoder::GenerateResult ToyDecoder::generate(PipelineVariant variant, size_t n_tokens,
                                                ArgmaxMode mode) {
    if (n_tokens < 1) raise(Errc::InvalidArgument, "generate needs n_tokens >= 1");
    GenerateResult res;
    res.forward_ledger = dispatch_ledger(cfg_, variant, ArgmaxMode::readback);
    uint64_t counter0 = ctx_.dispatches_executed();

    std::vector<uint32_t> context = prompt();
    size_t pos = 0;

    for (size_t i = 0; i < n_tokens; i++) {
        auto t0 = Clock::now();
        double forward_ms = 0.0;
        if (i == 0) {
            // prefill: all prompt positions, sync once at the end
            auto f0 = Clock::now();
            for (uint32_t tok : context) forward(variant, tok, pos++);
            ctx_.wait_idle();
            forward_ms = ms_between(f0, Clock::now());
            res.forwards_run += context.size();
        } else {
            auto f0 = Clock::now();
            forward(variant, context.back(), pos++);
            ctx_.wait_idle();
            forward_ms = ms_between(f0, Clock::now());
            res.forwards_run += 1;
        }
        // the forced per-token sync: argmax + readback + feed back
        uint32_t next = read_argmax(mode, &res.tie_flagged);
        context.push_back(next);
        res.tokens.push_back(next);
        double token_ms = ms_between(t0, Clock::now());
        res.timing.per_token_ms.push_back(token_ms);
        res.timing.t_forward_ms.push_back(forward_ms);
        res.timing.sync_overhead_ms.push_back(token_ms - forward_ms);
    }
    res.timing.ttft_ms = res.timing.per_token_ms.front();
    res.dispatches_executed = ctx_.dispatches_executed() - counter0;
    return res;
}

}  // namespace dispatchlab::decoder
