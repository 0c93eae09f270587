#include "dispatchlab/kernels.hpp"

#include <bit>
#include <cstring>

#include "dispatchlab/error.hpp"
#include "shaders_embedded.hpp"

namespace dispatchlab::kernels {

namespace {

constexpr KernelVariantInfo kVariants[] = {
    {Variant::matmul_naive, 1, {16, 16, 1}, "matmul_naive"},
    {Variant::matmul_tiled16, 1, {16, 16, 1}, "matmul_tiled16"},
    {Variant::rmsnorm_unfused_chain, 6, {256, 1, 1}, "rmsnorm_unfused_chain"},
    {Variant::rmsnorm_fused, 1, {256, 1, 1}, "rmsnorm_fused"},
    {Variant::mlp_unfused7, 7, {256, 1, 1}, "mlp_unfused7"},
    {Variant::mlp_tiled3, 3, {256, 1, 1}, "mlp_tiled3"},
    {Variant::mega_mlp1, 1, {256, 1, 1}, "mega_mlp1"},
    {Variant::mlp_fused_gate_up_silu, 1, {256, 1, 1}, "fused_gate_up_silu"},
    {Variant::kv_fused_proj, 1, {256, 1, 1}, "kv_fused_proj"},
    {Variant::softmax_naive, 1, {1, 1, 1}, "softmax_naive"},
    {Variant::softmax_parallel256, 1, {256, 1, 1}, "softmax_parallel256"},
    {Variant::argmax_device, 1, {256, 1, 1}, "argmax_device"},
    {Variant::elementwise, 1, {256, 1, 1}, "elementwise"},
};

// Workgroup-memory capacity of the mega kernel (consts in mega_mlp1.wgsl).
constexpr size_t kMegaMaxHidden = 1024;
constexpr size_t kMegaMaxInter = 2048;

uint32_t ceil_div(size_t n, uint32_t d) { return static_cast<uint32_t>((n + d - 1) / d); }

uint32_t fbits(float f) { return std::bit_cast<uint32_t>(f); }

}  // namespace

const KernelVariantInfo& variant_info(Variant v) {
    for (const auto& i : kVariants)
        if (i.id == v) return i;
    raise(Errc::InvalidArgument, "unknown kernel variant");
}

const char* variant_name(Variant v) { return variant_info(v).shader_file; }

void encode(gpu::CommandEncoder& enc, const BoundKernel& k) {
    auto pass = enc.begin_compute_pass();
    pass.set_pipeline(k.pipeline);
    pass.set_bind_group(k.bind_group);
    pass.dispatch_workgroups(k.gx, k.gy, k.gz);
    pass.end();
}

void encode_all(gpu::CommandEncoder& enc, const std::vector<BoundKernel>& plan) {
    for (const auto& k : plan) encode(enc, k);
}

KernelLibrary::KernelLibrary(gpu::GpuContext ctx) : ctx_(std::move(ctx)) {
    if (!ctx_.valid()) raise(Errc::InvalidArgument, "kernel library needs a live context");
}

gpu::ShaderModule& KernelLibrary::module(std::string_view stem) {
    for (auto& m : modules_)
        if (m.stem == stem) return m.module;
    for (const auto& [name, source] : embedded::k_shaders) {
        if (name == stem) {
            modules_.push_back({std::string(stem),
                                ctx_.create_shader_module(source, std::string(stem) + ".wgsl")});
            return modules_.back().module;
        }
    }
    raise(Errc::ShaderError, "no shader named '" + std::string(stem) + "' in the library");
}

gpu::ComputePipeline KernelLibrary::pipeline(std::string_view file_stem,
                                             std::string_view entry) {
    std::string key = std::string(file_stem) + ":" + std::string(entry);
    for (auto& p : pipelines_)
        if (p.key == key) return p.pipeline;
    gpu::ComputePipeline p = ctx_.create_compute_pipeline(module(file_stem), entry);
    pipelines_.push_back({std::move(key), p});
    return p;
}

gpu::DeviceBuffer KernelLibrary::make_uniform(std::vector<uint32_t> words) {
    while (words.size() % 4 != 0) words.push_back(0);  // pad to 16 bytes
    gpu::DeviceBuffer buf =
        ctx_.create_buffer(words.size() * 4, gpu::usage::uniform | gpu::usage::copy_dst);
    ctx_.write_buffer(buf, 0, words.data(), words.size() * 4);
    return buf;
}

std::vector<BoundKernel> KernelLibrary::plan_matmul(Variant v, MatmulDims dims,
                                                    gpu::DeviceBuffer a, gpu::DeviceBuffer b,
                                                    gpu::DeviceBuffer c) {
    if (v != Variant::matmul_naive && v != Variant::matmul_tiled16)
        raise(Errc::InvalidArgument, "not a matmul variant");
    if (dims.m == 0 || dims.k == 0 || dims.n == 0)
        raise(Errc::DimsMismatch, "matmul dims must be positive");
    auto params = make_uniform({uint32_t(dims.m), uint32_t(dims.k), uint32_t(dims.n)});
    BoundKernel k;
    k.pipeline = pipeline(variant_info(v).shader_file, "main");
    k.bind_group = ctx_.create_bind_group(k.pipeline, {{0, params}, {1, a}, {2, b}, {3, c}});
    k.gx = ceil_div(dims.n, 16);
    k.gy = ceil_div(dims.m, 16);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_rmsnorm(Variant v, size_t rows, size_t hidden,
                                                     float eps, gpu::DeviceBuffer x,
                                                     gpu::DeviceBuffer weight,
                                                     gpu::DeviceBuffer out) {
    auto params = make_uniform({uint32_t(rows), uint32_t(hidden), fbits(eps)});
    if (v == Variant::rmsnorm_fused) {
        BoundKernel k;
        k.pipeline = pipeline("rmsnorm_fused", "main");
        k.bind_group =
            ctx_.create_bind_group(k.pipeline, {{0, params}, {1, x}, {2, weight}, {3, out}});
        k.gx = uint32_t(rows);
        return {k};
    }
    if (v != Variant::rmsnorm_unfused_chain) raise(Errc::InvalidArgument, "not a rmsnorm variant");

    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    gpu::DeviceBuffer sq = ctx_.create_buffer(rows * hidden * 4, st);
    gpu::DeviceBuffer means = ctx_.create_buffer(rows * 4, st);
    gpu::DeviceBuffer means_eps = ctx_.create_buffer(rows * 4, st);
    gpu::DeviceBuffer scales = ctx_.create_buffer(rows * 4, st);
    gpu::DeviceBuffer scaled = ctx_.create_buffer(rows * hidden * 4, st);

    auto step = [&](const char* entry, gpu::DeviceBuffer src, gpu::DeviceBuffer aux,
                    gpu::DeviceBuffer dst, uint32_t gx) {
        BoundKernel k;
        k.pipeline = pipeline("rmsnorm_unfused_chain", entry);
        std::vector<std::pair<uint32_t, gpu::DeviceBuffer>> binds = {{0, params}, {1, src}};
        if (aux.valid()) binds.emplace_back(2, aux);
        binds.emplace_back(3, dst);
        k.bind_group = ctx_.create_bind_group(k.pipeline, binds);
        k.gx = gx;
        return k;
    };
    uint32_t full = ceil_div(rows * hidden, 256);
    uint32_t rows_wg = ceil_div(rows, 256);
    std::vector<BoundKernel> plan;
    plan.push_back(step("square", x, {}, sq, full));
    plan.push_back(step("row_mean", sq, {}, means, uint32_t(rows)));
    plan.push_back(step("add_eps", means, {}, means_eps, rows_wg));
    plan.push_back(step("rsqrt_rows", means_eps, {}, scales, rows_wg));
    plan.push_back(step("mul_rows", x, scales, scaled, full));
    plan.push_back(step("mul_weight", scaled, weight, out, full));
    return plan;
}

std::vector<BoundKernel> KernelLibrary::plan_mlp_block(Variant v, size_t hidden, size_t inter,
                                                       float eps, gpu::DeviceBuffer x,
                                                       gpu::DeviceBuffer norm_w,
                                                       gpu::DeviceBuffer wg, gpu::DeviceBuffer wu,
                                                       gpu::DeviceBuffer wd,
                                                       gpu::DeviceBuffer out) {
    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    if (v == Variant::mega_mlp1) {
        if (hidden > kMegaMaxHidden || inter > kMegaMaxInter)
            raise(Errc::MegaKernelScaleExceeded,
                  "mega kernel is limited to hidden <= " + std::to_string(kMegaMaxHidden) +
                      ", inter <= " + std::to_string(kMegaMaxInter) +
                      " (single 256-thread workgroup)");
        auto params = make_uniform({uint32_t(hidden), uint32_t(inter), fbits(eps)});
        BoundKernel k;
        k.pipeline = pipeline("mega_mlp1", "main");
        k.bind_group = ctx_.create_bind_group(
            k.pipeline, {{0, params}, {1, x}, {2, norm_w}, {3, wg}, {4, wu}, {5, wd}, {6, out}});
        return {k};
    }
    if (v == Variant::mlp_tiled3) {
        auto params = make_uniform({uint32_t(hidden), uint32_t(inter), fbits(eps)});
        gpu::DeviceBuffer xn = ctx_.create_buffer(hidden * 4, st);
        gpu::DeviceBuffer act = ctx_.create_buffer(inter * 4, st);
        std::vector<BoundKernel> plan;
        BoundKernel norm;
        norm.pipeline = pipeline("mlp_tiled3", "norm");
        norm.bind_group =
            ctx_.create_bind_group(norm.pipeline, {{0, params}, {1, x}, {2, norm_w}, {4, xn}});
        plan.push_back(norm);
        BoundKernel gus;
        gus.pipeline = pipeline("mlp_tiled3", "gate_up_silu");
        gus.bind_group = ctx_.create_bind_group(gus.pipeline,
                                                {{0, params}, {1, xn}, {2, wg}, {3, wu}, {4, act}});
        gus.gx = ceil_div(inter, 256);
        plan.push_back(gus);
        BoundKernel down;
        down.pipeline = pipeline("mlp_tiled3", "down_residual");
        down.bind_group = ctx_.create_bind_group(down.pipeline,
                                                 {{0, params}, {1, act}, {2, wd}, {3, x}, {4, out}});
        down.gx = ceil_div(hidden, 256);
        plan.push_back(down);
        return plan;
    }
    if (v != Variant::mlp_unfused7) raise(Errc::InvalidArgument, "not an mlp variant");

    gpu::DeviceBuffer xn = ctx_.create_buffer(hidden * 4, st);
    gpu::DeviceBuffer g = ctx_.create_buffer(inter * 4, st);
    gpu::DeviceBuffer u = ctx_.create_buffer(inter * 4, st);
    gpu::DeviceBuffer sg = ctx_.create_buffer(inter * 4, st);
    gpu::DeviceBuffer h = ctx_.create_buffer(inter * 4, st);
    gpu::DeviceBuffer d = ctx_.create_buffer(hidden * 4, st);

    auto params_for = [&](uint32_t in_dim, uint32_t n) {
        return make_uniform({in_dim, uint32_t(inter), fbits(eps), n});
    };
    auto bind3 = [&](gpu::ComputePipeline p, gpu::DeviceBuffer params, gpu::DeviceBuffer a,
                     gpu::DeviceBuffer b, gpu::DeviceBuffer dst) {
        std::vector<std::pair<uint32_t, gpu::DeviceBuffer>> binds = {{0, params}, {1, a}};
        if (b.valid()) binds.emplace_back(2, b);
        binds.emplace_back(3, dst);
        return ctx_.create_bind_group(p, binds);
    };

    std::vector<BoundKernel> plan;
    {
        BoundKernel k;  // 1: fused-RMSNorm
        k.pipeline = pipeline("mlp_unfused7", "norm");
        k.bind_group = bind3(k.pipeline, params_for(uint32_t(hidden), 0), x, norm_w, xn);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 2: gate matmul
        k.pipeline = pipeline("mlp_unfused7", "matvec");
        k.bind_group = bind3(k.pipeline, params_for(uint32_t(hidden), uint32_t(inter)), xn, wg, g);
        k.gx = ceil_div(inter, 256);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 3: up matmul
        k.pipeline = pipeline("mlp_unfused7", "matvec");
        k.bind_group = bind3(k.pipeline, params_for(uint32_t(hidden), uint32_t(inter)), xn, wu, u);
        k.gx = ceil_div(inter, 256);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 4: silu
        k.pipeline = pipeline("mlp_unfused7", "silu_map");
        k.bind_group = bind3(k.pipeline, params_for(0, uint32_t(inter)), g, {}, sg);
        k.gx = ceil_div(inter, 256);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 5: elementwise mul
        k.pipeline = pipeline("mlp_unfused7", "mul_ew");
        k.bind_group = bind3(k.pipeline, params_for(0, uint32_t(inter)), sg, u, h);
        k.gx = ceil_div(inter, 256);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 6: down matmul (in-dim = inter)
        k.pipeline = pipeline("mlp_unfused7", "matvec");
        k.bind_group = bind3(k.pipeline, params_for(uint32_t(inter), uint32_t(hidden)), h, wd, d);
        k.gx = ceil_div(hidden, 256);
        plan.push_back(k);
    }
    {
        BoundKernel k;  // 7: residual add
        k.pipeline = pipeline("mlp_unfused7", "add_ew");
        k.bind_group = bind3(k.pipeline, params_for(0, uint32_t(hidden)), x, d, out);
        k.gx = ceil_div(hidden, 256);
        plan.push_back(k);
    }
    return plan;
}

std::vector<BoundKernel> KernelLibrary::plan_fused_gate_up_silu(size_t hidden, size_t inter,
                                                                gpu::DeviceBuffer x,
                                                                gpu::DeviceBuffer wg,
                                                                gpu::DeviceBuffer wu,
                                                                gpu::DeviceBuffer out) {
    auto params = make_uniform({uint32_t(hidden), uint32_t(inter)});
    BoundKernel k;
    k.pipeline = pipeline("fused_gate_up_silu", "main");
    k.bind_group =
        ctx_.create_bind_group(k.pipeline, {{0, params}, {1, x}, {2, wg}, {3, wu}, {4, out}});
    k.gx = ceil_div(inter, 256);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_kv_fused_proj(size_t hidden, size_t kv_dim,
                                                           gpu::DeviceBuffer x,
                                                           gpu::DeviceBuffer wk,
                                                           gpu::DeviceBuffer wv,
                                                           gpu::DeviceBuffer out_k,
                                                           gpu::DeviceBuffer out_v) {
    auto params = make_uniform({uint32_t(hidden), uint32_t(kv_dim)});
    BoundKernel k;
    k.pipeline = pipeline("kv_fused_proj", "main");
    k.bind_group = ctx_.create_bind_group(
        k.pipeline, {{0, params}, {1, x}, {2, wk}, {3, wv}, {4, out_k}, {5, out_v}});
    k.gx = ceil_div(kv_dim * 2, 256);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_softmax(Variant v, size_t rows, size_t cols,
                                                     gpu::DeviceBuffer x, gpu::DeviceBuffer out) {
    if (v != Variant::softmax_naive && v != Variant::softmax_parallel256)
        raise(Errc::InvalidArgument, "not a softmax variant");
    if (cols == 0) raise(Errc::DimsMismatch, "softmax needs cols >= 1");
    auto params = make_uniform({uint32_t(rows), uint32_t(cols)});
    BoundKernel k;
    k.pipeline = pipeline(variant_info(v).shader_file, "main");
    k.bind_group = ctx_.create_bind_group(k.pipeline, {{0, params}, {1, x}, {2, out}});
    k.gx = uint32_t(rows);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_argmax_device(size_t len, gpu::DeviceBuffer x,
                                                           gpu::DeviceBuffer out_idx) {
    if (len == 0) raise(Errc::DimsMismatch, "argmax needs len >= 1");
    auto params = make_uniform({uint32_t(len)});
    BoundKernel k;
    k.pipeline = pipeline("argmax_device", "main");
    k.bind_group = ctx_.create_bind_group(k.pipeline, {{0, params}, {1, x}, {2, out_idx}});
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_elementwise(std::string_view kind,
                                                         const ElementwiseArgs& args,
                                                         gpu::DeviceBuffer a, gpu::DeviceBuffer b,
                                                         gpu::DeviceBuffer out) {
    auto params = make_uniform(
        {args.n, args.src_off, args.dst_off, args.row, args.kv_dim, fbits(args.scalar)});
    BoundKernel k;
    k.pipeline = pipeline("elementwise", kind);
    std::vector<std::pair<uint32_t, gpu::DeviceBuffer>> binds = {{0, params}, {1, a}};
    if (b.valid()) binds.emplace_back(2, b);
    binds.emplace_back(3, out);
    k.bind_group = ctx_.create_bind_group(k.pipeline, binds);
    k.gx = ceil_div(args.n, 256);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_linear_wt(size_t in_dim, size_t out_dim,
                                                       gpu::DeviceBuffer x, gpu::DeviceBuffer w,
                                                       gpu::DeviceBuffer out) {
    auto params = make_uniform({uint32_t(in_dim), uint32_t(out_dim)});
    BoundKernel k;
    k.pipeline = pipeline("linear_wt", "main");
    k.bind_group = ctx_.create_bind_group(k.pipeline, {{0, params}, {1, x}, {2, w}, {3, out}});
    k.gx = ceil_div(out_dim, 256);
    return {k};
}

std::vector<BoundKernel> KernelLibrary::plan_attn_mix(size_t hidden, size_t kv_dim,
                                                      gpu::DeviceBuffer q, gpu::DeviceBuffer k_in,
                                                      gpu::DeviceBuffer v_in,
                                                      gpu::DeviceBuffer out) {
    auto params = make_uniform({uint32_t(hidden), uint32_t(kv_dim)});
    BoundKernel k;
    k.pipeline = pipeline("attn_mix", "main");
    k.bind_group = ctx_.create_bind_group(
        k.pipeline, {{0, params}, {1, q}, {2, k_in}, {3, v_in}, {4, out}});
    k.gx = ceil_div(hidden, 256);
    return {k};
}

void KernelLibrary::run_plan(const std::vector<BoundKernel>& plan) {
    gpu::CommandEncoder enc = ctx_.create_command_encoder();
    encode_all(enc, plan);
    ctx_.submit(enc.finish());
}

HostTensor KernelLibrary::matmul(Variant v, const HostTensor& a, const HostTensor& b) {
    if (a.spec.cols() != b.spec.rows())
        raise(Errc::DimsMismatch, "matmul: A k-dim " + std::to_string(a.spec.cols()) +
                                      " != B k-dim " + std::to_string(b.spec.rows()));
    MatmulDims dims{a.spec.rows(), a.spec.cols(), b.spec.cols()};
    gpu::DeviceBuffer da = ctx_.upload(a);
    gpu::DeviceBuffer db = ctx_.upload(b);
    gpu::DeviceBuffer dc = ctx_.create_buffer(
        dims.m * dims.n * 4, gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_matmul(v, dims, da, db, dc));
    return ctx_.download(dc, {{dims.m, dims.n}});
}

HostTensor KernelLibrary::rmsnorm(Variant v, const HostTensor& x, const RmsNormParams& params) {
    if (x.spec.cols() != params.hidden || params.weight.element_count() != params.hidden)
        raise(Errc::DimsMismatch, "rmsnorm: hidden mismatch");
    if (params.eps <= 0.0f) raise(Errc::InvalidArgument, "rmsnorm eps must be > 0");
    gpu::DeviceBuffer dx = ctx_.upload(x);
    gpu::DeviceBuffer dw = ctx_.upload(params.weight);
    gpu::DeviceBuffer dout = ctx_.create_buffer(x.spec.byte_length(),
                                                gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_rmsnorm(v, x.spec.rows(), params.hidden, params.eps, dx, dw, dout));
    return ctx_.download(dout, x.spec);
}

HostTensor KernelLibrary::mlp_block(Variant v, const HostTensor& x, const oracle::MlpWeights& w,
                                    float eps) {
    size_t hidden = x.spec.cols();
    size_t inter = w.gate.spec.rows();
    if (w.gate.spec.cols() != hidden || w.up.spec != w.gate.spec ||
        w.down.spec.rows() != hidden || w.down.spec.cols() != inter ||
        w.norm_weight.element_count() != hidden)
        raise(Errc::DimsMismatch, "mlp_block: inconsistent weight shapes");
    gpu::DeviceBuffer dx = ctx_.upload(x);
    gpu::DeviceBuffer dnw = ctx_.upload(w.norm_weight);
    gpu::DeviceBuffer dwg = ctx_.upload(w.gate);
    gpu::DeviceBuffer dwu = ctx_.upload(w.up);
    gpu::DeviceBuffer dwd = ctx_.upload(w.down);
    gpu::DeviceBuffer dout = ctx_.create_buffer(x.spec.byte_length(),
                                                gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_mlp_block(v, hidden, inter, eps, dx, dnw, dwg, dwu, dwd, dout));
    return ctx_.download(dout, x.spec);
}

HostTensor KernelLibrary::fused_gate_up_silu(const HostTensor& x, const HostTensor& wg,
                                             const HostTensor& wu) {
    if (wg.spec != wu.spec) raise(Errc::DimsMismatch, "Wg shape != Wu shape");
    size_t hidden = x.spec.cols();
    size_t inter = wg.spec.rows();
    if (wg.spec.cols() != hidden) raise(Errc::DimsMismatch, "weight in-dim != hidden");
    gpu::DeviceBuffer dx = ctx_.upload(x);
    gpu::DeviceBuffer dwg = ctx_.upload(wg);
    gpu::DeviceBuffer dwu = ctx_.upload(wu);
    gpu::DeviceBuffer dout =
        ctx_.create_buffer(inter * 4, gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_fused_gate_up_silu(hidden, inter, dx, dwg, dwu, dout));
    return ctx_.download(dout, {{size_t(1), inter}});
}

std::pair<HostTensor, HostTensor> KernelLibrary::kv_fused_proj(const HostTensor& x,
                                                               const HostTensor& wk,
                                                               const HostTensor& wv) {
    if (wk.spec != wv.spec) raise(Errc::DimsMismatch, "Wk shape != Wv shape");
    size_t hidden = x.spec.cols();
    size_t kv_dim = wk.spec.rows();
    if (wk.spec.cols() != hidden) raise(Errc::DimsMismatch, "weight in-dim != hidden");
    gpu::DeviceBuffer dx = ctx_.upload(x);
    gpu::DeviceBuffer dwk = ctx_.upload(wk);
    gpu::DeviceBuffer dwv = ctx_.upload(wv);
    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src;
    gpu::DeviceBuffer dk = ctx_.create_buffer(kv_dim * 4, st);
    gpu::DeviceBuffer dv = ctx_.create_buffer(kv_dim * 4, st);
    run_plan(plan_kv_fused_proj(hidden, kv_dim, dx, dwk, dwv, dk, dv));
    HostTensor k = ctx_.download(dk, {{size_t(1), kv_dim}});
    HostTensor v = ctx_.download(dv, {{size_t(1), kv_dim}});
    return {std::move(k), std::move(v)};
}

HostTensor KernelLibrary::softmax(Variant v, const HostTensor& x) {
    gpu::DeviceBuffer dx = ctx_.upload(x);
    gpu::DeviceBuffer dout = ctx_.create_buffer(x.spec.byte_length(),
                                                gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_softmax(v, x.spec.rows(), x.spec.cols(), dx, dout));
    return ctx_.download(dout, x.spec);
}

uint32_t KernelLibrary::argmax_device(const HostTensor& logits) {
    gpu::DeviceBuffer dx = ctx_.upload(logits);
    gpu::DeviceBuffer didx =
        ctx_.create_buffer(4, gpu::usage::storage | gpu::usage::copy_src);
    run_plan(plan_argmax_device(logits.element_count(), dx, didx));
    return ctx_.download_words(didx, 1)[0];
}

BoundKernel KernelLibrary::profiling_kernel() {
    const uint32_t n = 256;
    HostTensor a = random_tensor({n}, 7);
    HostTensor b = random_tensor({n}, 8);
    gpu::DeviceBuffer da = ctx_.upload(a);
    gpu::DeviceBuffer db = ctx_.upload(b);
    gpu::DeviceBuffer dout = ctx_.create_buffer(n * 4, gpu::usage::storage | gpu::usage::copy_src);
    ElementwiseArgs args;
    args.n = n;
    return plan_elementwise("add", args, da, db, dout)[0];
}

}  // namespace dispatchlab::kernels
