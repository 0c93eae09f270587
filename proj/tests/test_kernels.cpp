#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dispatchlab/error.hpp"
#include "dispatchlab/kernels.hpp"
#include "dispatchlab/oracle.hpp"

using namespace dispatchlab;
using namespace dispatchlab::kernels;

namespace {

KernelLibrary& lib() {
    static KernelLibrary instance(gpu::acquire_context({gpu::BackendKind::any}, true));
    return instance;
}

oracle::ToleranceSpec single() { return oracle::ToleranceSpec::single_kernel(); }

}  // namespace

TEST_CASE("declared dispatch decompositions") {
    CHECK(variant_info(Variant::rmsnorm_unfused_chain).dispatch_count == 6);
    CHECK(variant_info(Variant::rmsnorm_fused).dispatch_count == 1);
    CHECK(variant_info(Variant::mlp_unfused7).dispatch_count == 7);
    CHECK(variant_info(Variant::mlp_tiled3).dispatch_count == 3);
    CHECK(variant_info(Variant::mega_mlp1).dispatch_count == 1);
    CHECK(variant_info(Variant::mlp_fused_gate_up_silu).dispatch_count == 1);
    CHECK(variant_info(Variant::kv_fused_proj).dispatch_count == 1);
}

TEST_CASE("plans have exactly the declared dispatch counts, repeatably") {
    auto& L = lib();
    auto& ctx = L.ctx();
    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    gpu::DeviceBuffer x = ctx.upload(random_tensor({1, 64}, 1));
    gpu::DeviceBuffer w = ctx.upload(random_tensor({64}, 2));
    gpu::DeviceBuffer wg = ctx.upload(random_tensor({96, 64}, 3));
    gpu::DeviceBuffer wu = ctx.upload(random_tensor({96, 64}, 4));
    gpu::DeviceBuffer wd = ctx.upload(random_tensor({64, 96}, 5));
    gpu::DeviceBuffer out = ctx.create_buffer(64 * 4, st);

    for (int round = 0; round < 2; round++) {
        CHECK(L.plan_rmsnorm(Variant::rmsnorm_unfused_chain, 1, 64, 1e-6f, x, w, out).size() == 6);
        CHECK(L.plan_rmsnorm(Variant::rmsnorm_fused, 1, 64, 1e-6f, x, w, out).size() == 1);
        CHECK(L.plan_mlp_block(Variant::mlp_unfused7, 64, 96, 1e-6f, x, w, wg, wu, wd, out)
                  .size() == 7);
        CHECK(L.plan_mlp_block(Variant::mlp_tiled3, 64, 96, 1e-6f, x, w, wg, wu, wd, out)
                  .size() == 3);
        CHECK(L.plan_mlp_block(Variant::mega_mlp1, 64, 96, 1e-6f, x, w, wg, wu, wd, out)
                  .size() == 1);
    }
}

TEST_CASE("matmul: identity") {
    auto identity = HostTensor::from({2, 2}, {1, 0, 0, 1});
    auto b = HostTensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    for (Variant v : {Variant::matmul_naive, Variant::matmul_tiled16}) {
        auto r = lib().matmul(v, identity, b);
        CHECK(r.data == b.data);
    }
}

TEST_CASE("matmul: dims mismatch") {
    CHECK_THROWS_AS(lib().matmul(Variant::matmul_naive, HostTensor::zeros({2, 3}),
                                 HostTensor::zeros({4, 2})),
                    Error);
}

TEST_CASE("matmul: oracle equivalence across seeds, odd edge dims") {
    struct Dims {
        size_t m, k, n;
    };
    for (Dims d : {Dims{33, 17, 29}, Dims{64, 64, 64}, Dims{100, 96, 72}}) {
        for (uint64_t seed = 1; seed <= 10; seed++) {
            auto a = random_tensor({d.m, d.k}, seed);
            auto b = random_tensor({d.k, d.n}, seed + 1000);
            auto expect = oracle::matmul(a, b);
            auto naive = lib().matmul(Variant::matmul_naive, a, b);
            auto tiled = lib().matmul(Variant::matmul_tiled16, a, b);
            auto c1 = oracle::compare(naive, expect, single());
            auto c2 = oracle::compare(tiled, expect, single());
            INFO("dims ", d.m, "x", d.k, "x", d.n, " seed ", seed, " naive diff ",
                 c1.max_abs_diff, " tiled diff ", c2.max_abs_diff);
            CHECK(c1.pass);
            CHECK(c2.pass);
        }
    }
}

TEST_CASE("matmul: 256-cube toy dims against oracle") {
    auto a = random_tensor({256, 256}, 42);
    auto b = random_tensor({256, 256}, 43);
    auto expect = oracle::matmul(a, b);
    auto tiled = lib().matmul(Variant::matmul_tiled16, a, b);
    CHECK(oracle::compare(tiled, expect, single()).pass);
}

TEST_CASE("rmsnorm: unit row") {
    RmsNormParams p;
    p.hidden = 8;
    p.eps = 1e-9f;
    p.weight = HostTensor::full({8}, 1.0f);
    auto x = HostTensor::full({1, 8}, 1.0f);
    for (Variant v : {Variant::rmsnorm_fused, Variant::rmsnorm_unfused_chain}) {
        auto r = lib().rmsnorm(v, x, p);
        for (float f : r.data) CHECK(f == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("rmsnorm: closed-form sparse row at hidden=896") {
    RmsNormParams p;
    p.hidden = 896;
    p.eps = 1e-6f;
    p.weight = HostTensor::full({896}, 1.0f);
    auto x = HostTensor::zeros({1, 896});
    x.data[0] = 3.0f;
    x.data[1] = 4.0f;
    double scale = 1.0 / std::sqrt(25.0 / 896.0 + 1e-6);
    auto r = lib().rmsnorm(Variant::rmsnorm_fused, x, p);
    CHECK(r.data[0] == doctest::Approx(3.0 * scale).epsilon(1e-5));
    CHECK(r.data[1] == doctest::Approx(4.0 * scale).epsilon(1e-5));
    CHECK(r.data[2] == doctest::Approx(0.0));
}

TEST_CASE("rmsnorm: fused vs unfused vs oracle across seeds") {
    RmsNormParams p;
    p.hidden = 896;
    p.eps = 1e-6f;
    p.weight = random_tensor({896}, 99);
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({1, 896}, seed);
        auto expect = oracle::rmsnorm(x, p.weight, p.eps);
        auto fused = lib().rmsnorm(Variant::rmsnorm_fused, x, p);
        auto unfused = lib().rmsnorm(Variant::rmsnorm_unfused_chain, x, p);
        CHECK(oracle::compare(fused, expect, single()).pass);
        CHECK(oracle::compare(unfused, expect, single()).pass);
        CHECK(oracle::compare(fused, unfused, single()).pass);
    }
}

TEST_CASE("rmsnorm: multi-row input") {
    RmsNormParams p;
    p.hidden = 48;
    p.eps = 1e-6f;
    p.weight = random_tensor({48}, 5);
    auto x = random_tensor({7, 48}, 6);
    auto expect = oracle::rmsnorm(x, p.weight, p.eps);
    auto fused = lib().rmsnorm(Variant::rmsnorm_fused, x, p);
    auto unfused = lib().rmsnorm(Variant::rmsnorm_unfused_chain, x, p);
    CHECK(oracle::compare(fused, expect, single()).pass);
    CHECK(oracle::compare(unfused, expect, single()).pass);
}

TEST_CASE("mlp block: zero input is a fixed point") {
    oracle::MlpWeights w;
    w.norm_weight = random_tensor({32}, 1);
    w.gate = random_tensor({64, 32}, 2);
    w.up = random_tensor({64, 32}, 3);
    w.down = random_tensor({32, 64}, 4);
    auto x = HostTensor::zeros({1, 32});
    for (Variant v : {Variant::mlp_unfused7, Variant::mlp_tiled3, Variant::mega_mlp1}) {
        auto r = lib().mlp_block(v, x, w, 1e-6f);
        for (float f : r.data) CHECK(f == doctest::Approx(0.0));
    }
}

TEST_CASE("mlp block: all variants agree with oracle at 256x256") {
    oracle::MlpWeights w;
    w.norm_weight = random_tensor({256}, 11);
    w.gate = random_tensor({256, 256}, 12);
    w.up = random_tensor({256, 256}, 13);
    w.down = random_tensor({256, 256}, 14);
    auto tol = oracle::ToleranceSpec::chained_mlp();
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({1, 256}, seed);
        auto expect = oracle::mlp_block(x, w, 1e-6f);
        auto unfused = lib().mlp_block(Variant::mlp_unfused7, x, w, 1e-6f);
        auto tiled = lib().mlp_block(Variant::mlp_tiled3, x, w, 1e-6f);
        auto mega = lib().mlp_block(Variant::mega_mlp1, x, w, 1e-6f);
        CHECK(oracle::compare(unfused, expect, tol).pass);
        CHECK(oracle::compare(tiled, expect, tol).pass);
        CHECK(oracle::compare(mega, expect, tol).pass);
        CHECK(oracle::compare(mega, unfused, tol).pass);
    }
}

TEST_CASE("mega kernel: scale guard") {
    oracle::MlpWeights w;
    w.norm_weight = random_tensor({2048}, 1);
    w.gate = random_tensor({4096, 2048}, 2);
    w.up = random_tensor({4096, 2048}, 3);
    w.down = random_tensor({2048, 4096}, 4);
    auto x = random_tensor({1, 2048}, 5);
    try {
        lib().mlp_block(Variant::mega_mlp1, x, w, 1e-6f);
        FAIL("expected MegaKernelScaleExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MegaKernelScaleExceeded);
    }
}

TEST_CASE("fused gate+up+silu: zeros and oracle") {
    auto wg = random_tensor({96, 64}, 21);
    auto wu = random_tensor({96, 64}, 22);
    auto zeros = HostTensor::zeros({1, 64});
    auto rz = lib().fused_gate_up_silu(zeros, wg, wu);
    for (float f : rz.data) CHECK(f == doctest::Approx(0.0));
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({1, 64}, seed);
        auto expect = oracle::gate_up_silu(x, wg, wu);
        auto got = lib().fused_gate_up_silu(x, wg, wu);
        CHECK(oracle::compare(got, expect, single()).pass);
    }
}

TEST_CASE("kv fused projection: one-hot selects weight rows") {
    size_t hidden = 32, kv = 8;
    auto wk = random_tensor({kv, hidden}, 31);
    auto wv = random_tensor({kv, hidden}, 32);
    auto x = HostTensor::zeros({1, hidden});
    x.data[0] = 1.0f;  // e0 picks column 0 of each weight row dot-product
    auto [k, v] = lib().kv_fused_proj(x, wk, wv);
    for (size_t c = 0; c < kv; c++) {
        CHECK(k.data[c] == doctest::Approx(wk.data[c * hidden]).epsilon(1e-6));
        CHECK(v.data[c] == doctest::Approx(wv.data[c * hidden]).epsilon(1e-6));
    }
}

TEST_CASE("kv fused projection: matches separate matmuls, hidden=896 kv=128") {
    auto wk = random_tensor({128, 896}, 41);
    auto wv = random_tensor({128, 896}, 42);
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({1, 896}, seed);
        auto [k, v] = lib().kv_fused_proj(x, wk, wv);
        auto ek = oracle::matmul_wt(x, wk);
        auto ev = oracle::matmul_wt(x, wv);
        CHECK(oracle::compare(k, ek, single()).pass);
        CHECK(oracle::compare(v, ev, single()).pass);
    }
    CHECK_THROWS_AS(lib().kv_fused_proj(random_tensor({1, 896}, 1), wk,
                                        random_tensor({64, 896}, 2)),
                    Error);
}

TEST_CASE("softmax: uniform, stability, vocab column scale") {
    for (Variant v : {Variant::softmax_naive, Variant::softmax_parallel256}) {
        auto uniform = lib().softmax(v, HostTensor::from({1, 4}, {0, 0, 0, 0}));
        for (float f : uniform.data) CHECK(f == doctest::Approx(0.25).epsilon(1e-6));

        auto extreme = lib().softmax(v, HostTensor::from({1, 2}, {1000.0f, 0.0f}));
        CHECK(extreme.data[0] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(extreme.data[1] == doctest::Approx(0.0));
        CHECK(std::isfinite(extreme.data[0]));
    }
}

TEST_CASE("softmax: rows sum to one incl. +/-1000 magnitudes, variants agree") {
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({4, 333}, seed, -1000.0f, 1000.0f);
        auto naive = lib().softmax(Variant::softmax_naive, x);
        auto par = lib().softmax(Variant::softmax_parallel256, x);
        for (size_t r = 0; r < 4; r++) {
            double sum_n = 0, sum_p = 0;
            for (size_t c = 0; c < 333; c++) {
                sum_n += naive.at(r, c);
                sum_p += par.at(r, c);
            }
            CHECK(std::fabs(sum_n - 1.0) < 1e-5);
            CHECK(std::fabs(sum_p - 1.0) < 1e-5);
        }
        CHECK(oracle::compare(naive, par, single()).pass);
    }
}

TEST_CASE("softmax: vocab-scale row matches oracle") {
    auto x = random_tensor({1, 151936}, 42, -4.0f, 4.0f);
    auto expect = oracle::softmax(x);
    auto got = lib().softmax(Variant::softmax_parallel256, x);
    CHECK(oracle::compare(got, expect, single()).pass);
}

TEST_CASE("argmax: small, ties, vocab scale") {
    CHECK(lib().argmax_device(HostTensor::from({1, 3}, {1, 5, 3})) == 1);
    CHECK(lib().argmax_device(HostTensor::from({1, 7}, {2, 2, 2, 2, 2, 2, 2})) == 0);
    auto tie_mid = HostTensor::from({1, 600}, std::vector<float>(600, 1.0f));
    tie_mid.data[300] = 9.0f;
    tie_mid.data[471] = 9.0f;
    CHECK(lib().argmax_device(tie_mid) == 300);
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto x = random_tensor({1, 151936}, seed, -6.0f, 6.0f);
        CHECK(lib().argmax_device(x) == oracle::argmax(x));
    }
}

TEST_CASE("elementwise family matches scalar references across 10 seeds") {
    auto& L = lib();
    auto& ctx = L.ctx();
    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    const size_t n = 300;
    for (uint64_t seed = 1; seed <= 10; seed++) {
        auto a = random_tensor({1, n}, seed, -4.0f, 4.0f);
        auto b = random_tensor({1, n}, seed + 50, -4.0f, 4.0f);
        gpu::DeviceBuffer da = ctx.upload(a);
        gpu::DeviceBuffer db = ctx.upload(b);
        gpu::DeviceBuffer dout = ctx.create_buffer(n * 4, st);
        ElementwiseArgs args;
        args.n = n;
        args.scalar = 0.25f;

        auto run_kind = [&](const char* kind, bool binary) {
            L.run_plan(L.plan_elementwise(kind, args, da, binary ? db : gpu::DeviceBuffer{},
                                          dout));
            return ctx.download(dout, a.spec);
        };
        auto want = [&](auto f) {
            HostTensor t = HostTensor::zeros(a.spec.shape);
            for (size_t i = 0; i < n; i++) t.data[i] = f(a.data[i], b.data[i]);
            return t;
        };
        auto tol = oracle::ToleranceSpec::single_kernel();
        CHECK(oracle::compare(run_kind("add", true),
                              want([](float x, float y) { return x + y; }), tol).pass);
        CHECK(oracle::compare(run_kind("mul", true),
                              want([](float x, float y) { return x * y; }), tol).pass);
        CHECK(oracle::compare(run_kind("silu", false),
                              want([](float x, float) { return oracle::silu(x); }), tol).pass);
        CHECK(oracle::compare(run_kind("mul_silu", true),
                              want([](float x, float y) {
                                  return float(double(oracle::silu(x)) * double(y));
                              }),
                              tol).pass);
        CHECK(oracle::compare(run_kind("square", false),
                              want([](float x, float) { return x * x; }), tol).pass);
        CHECK(oracle::compare(run_kind("add_scalar", false),
                              want([](float x, float) { return x + 0.25f; }), tol).pass);
        // rsqrt needs positive input
        auto pos = random_tensor({1, n}, seed + 99, 0.1f, 9.0f);
        ctx.write_buffer(da, 0, pos.data.data(), n * 4);
        auto got = run_kind("rsqrt", false);
        for (size_t i = 0; i < n; i++)
            CHECK(got.data[i] ==
                  doctest::Approx(1.0 / std::sqrt(double(pos.data[i]))).epsilon(1e-5));
    }
}

TEST_CASE("elementwise copy_offset and gather_row move the right elements") {
    auto& L = lib();
    auto& ctx = L.ctx();
    const uint32_t st = gpu::usage::storage | gpu::usage::copy_src | gpu::usage::copy_dst;
    // copy_offset: src[src_off .. src_off+n) -> dst[dst_off .. dst_off+n)
    auto src = random_tensor({1, 64}, 5);
    gpu::DeviceBuffer dsrc = ctx.upload(src);
    gpu::DeviceBuffer ddst = ctx.create_buffer(128 * 4, st);
    ElementwiseArgs args;
    args.n = 16;
    args.src_off = 8;
    args.dst_off = 100;
    L.run_plan(L.plan_elementwise("copy_offset", args, dsrc, {}, ddst));
    auto out = ctx.download(ddst, {{size_t(128)}});
    for (size_t i = 0; i < 16; i++)
        CHECK(out.data[100 + i] == src.data[8 + i]);
    CHECK(out.data[99] == 0.0f);
    CHECK(out.data[116] == 0.0f);

    // gather_row: out = table[row, :]
    auto table = random_tensor({10, 32}, 6);
    gpu::DeviceBuffer dtable = ctx.upload(table);
    gpu::DeviceBuffer drow = ctx.create_buffer(32 * 4, st);
    ElementwiseArgs gargs;
    gargs.n = 32;
    gargs.row = 7;
    L.run_plan(L.plan_elementwise("gather_row", gargs, dtable, {}, drow));
    auto row = ctx.download(drow, {{size_t(32)}});
    for (size_t i = 0; i < 32; i++) CHECK(row.data[i] == table.data[7 * 32 + i]);
}

TEST_CASE("elementwise silu kind matches oracle silu") {
    auto& L = lib();
    auto& ctx = L.ctx();
    auto x = random_tensor({1, 777}, 3, -8.0f, 8.0f);
    gpu::DeviceBuffer dx = ctx.upload(x);
    gpu::DeviceBuffer dout =
        ctx.create_buffer(777 * 4, gpu::usage::storage | gpu::usage::copy_src);
    ElementwiseArgs args;
    args.n = 777;
    L.run_plan(L.plan_elementwise("silu", args, dx, {}, dout));
    auto got = ctx.download(dout, x.spec);
    for (size_t i = 0; i < 777; i++)
        CHECK(got.data[i] == doctest::Approx(oracle::silu(x.data[i])).epsilon(1e-5));
}
