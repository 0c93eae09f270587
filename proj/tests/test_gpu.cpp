#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "dispatchlab/error.hpp"
#include "dispatchlab/gpu.hpp"

using namespace dispatchlab;
using namespace dispatchlab::gpu;

TEST_CASE("acquire: any resolves to the software fallback adapter") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    const auto& info = ctx.info();
    CHECK(info.backend == BackendKind::software);
    CHECK(info.is_fallback_adapter);
    CHECK(info.max_workgroup_size >= 256);
    CHECK_FALSE(info.adapter_name.empty());
}

TEST_CASE("acquire: native backends report NoAdapter on this platform") {
    for (BackendKind k : {BackendKind::vulkan, BackendKind::metal, BackendKind::d3d12}) {
        try {
            acquire_context({k}, true);
            FAIL("expected NoAdapter");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::NoAdapter);
        }
    }
}

TEST_CASE("acquire: identical requests give identical HardwareInfo") {
    GpuContext a = acquire_context({BackendKind::any}, true);
    GpuContext b = acquire_context({BackendKind::any}, true);
    CHECK(a.info() == b.info());
}

TEST_CASE("acquisition performs no dispatches") {
    GpuContext ctx = acquire_context({BackendKind::any}, false);
    CHECK(ctx.dispatches_executed() == 0);
}

TEST_CASE("env var override") {
    setenv("DISPATCH_LAB_BACKEND", "metal", 1);
    auto choice = backend_from_env_or({BackendKind::any});
    CHECK(choice.kind == BackendKind::metal);
    setenv("DISPATCH_LAB_BACKEND", "bogus", 1);
    CHECK_THROWS_AS(backend_from_env_or({BackendKind::any}), Error);
    unsetenv("DISPATCH_LAB_BACKEND");
    CHECK(backend_from_env_or({BackendKind::vulkan}).kind == BackendKind::vulkan);
}

TEST_CASE("upload/download round-trip is bit-identical") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    HostTensor t = HostTensor::from({1, 3}, {1.0f, 2.0f, 3.0f});
    DeviceBuffer buf = ctx.upload(t);
    HostTensor back = ctx.download(buf, t.spec);
    CHECK(back.data == t.data);
}

TEST_CASE("round-trip property across seeds and odd shapes") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    for (uint64_t seed = 1; seed <= 8; seed++) {
        HostTensor t = random_tensor({seed * 7 + 1, seed * 3 + 2}, seed, -50.0f, 50.0f);
        HostTensor back = ctx.download(ctx.upload(t), t.spec);
        CHECK(std::memcmp(back.data.data(), t.data.data(), t.spec.byte_length()) == 0);
    }
}

TEST_CASE("large seeded round-trip (896x896, seed 42)") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    HostTensor t = random_tensor({896, 896}, 42);
    HostTensor back = ctx.download(ctx.upload(t), t.spec);
    CHECK(std::memcmp(back.data.data(), t.data.data(), t.spec.byte_length()) == 0);
}

TEST_CASE("upload of empty tensor is SizeMismatch") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    HostTensor t;
    t.spec.shape = {0};
    try {
        ctx.upload(t);
        FAIL("expected SizeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SizeMismatch);
    }
}

TEST_CASE("download requires copy_src") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    DeviceBuffer buf = ctx.create_buffer(16, usage::storage);
    try {
        ctx.download(buf, {{size_t(4)}});
        FAIL("expected MapFailed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MapFailed);
    }
}

TEST_CASE("workgroup size beyond the device limit is LimitsTooSmall") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    ShaderModule mod = ctx.create_shader_module(R"(
        @group(0) @binding(0) var<storage, read_write> out : array<f32>;
        @compute @workgroup_size(512)
        fn main(@builtin(local_invocation_index) tid : u32) { out[0] = 1.0; }
    )",
                                                "biggroup");
    try {
        ctx.create_compute_pipeline(mod, "main");
        FAIL("expected LimitsTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::LimitsTooSmall);
    }
}

TEST_CASE("map_read buffers cannot be bound as storage") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    ShaderModule mod = ctx.create_shader_module(R"(
        @group(0) @binding(0) var<storage, read_write> out : array<f32>;
        @compute @workgroup_size(1)
        fn main() { out[0] = 1.0; }
    )",
                                                "bindcheck");
    ComputePipeline p = ctx.create_compute_pipeline(mod, "main");
    DeviceBuffer bad = ctx.create_buffer(16, usage::map_read | usage::storage | usage::copy_dst);
    CHECK_THROWS_AS(ctx.create_bind_group(p, {{0, bad}}), Error);
}

TEST_CASE("shader error surfaces on wait_idle and loses the device") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    ShaderModule mod = ctx.create_shader_module(R"(
        @group(0) @binding(0) var<storage, read_write> out : array<f32>;
        @compute @workgroup_size(1)
        fn main() { out[99] = 1.0; }
    )",
                                                "oob");
    ComputePipeline p = ctx.create_compute_pipeline(mod, "main");
    DeviceBuffer buf = ctx.create_buffer(16, usage::storage | usage::copy_src);
    BindGroup bg = ctx.create_bind_group(p, {{0, buf}});
    CommandEncoder enc = ctx.create_command_encoder();
    auto pass = enc.begin_compute_pass();
    pass.set_pipeline(p);
    pass.set_bind_group(bg);
    pass.dispatch_workgroups(1);
    pass.end();
    ctx.submit(enc.finish());
    CHECK_THROWS_AS(ctx.wait_idle(), Error);
    // device is lost afterwards
    CommandEncoder enc2 = ctx.create_command_encoder();
    CHECK_THROWS_AS(ctx.submit(enc2.finish()), Error);
}

TEST_CASE("queue executes command buffers in submission order") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    ShaderModule mod = ctx.create_shader_module(R"(
        struct P { v : f32, }
        @group(0) @binding(0) var<uniform> p : P;
        @group(0) @binding(1) var<storage, read_write> out : array<f32>;
        @compute @workgroup_size(1)
        fn main() { out[0] = out[0] * 2.0 + p.v; }
    )",
                                                "order");
    ComputePipeline pl = ctx.create_compute_pipeline(mod, "main");
    DeviceBuffer out = ctx.create_buffer(16, usage::storage | usage::copy_src | usage::copy_dst);
    float zero = 0.0f;
    ctx.write_buffer(out, 0, &zero, 4);
    for (float v : {1.0f, 2.0f, 3.0f}) {
        DeviceBuffer params = ctx.create_buffer(16, usage::uniform | usage::copy_dst);
        ctx.write_buffer(params, 0, &v, 4);
        BindGroup bg = ctx.create_bind_group(pl, {{0, params}, {1, out}});
        CommandEncoder enc = ctx.create_command_encoder();
        auto pass = enc.begin_compute_pass();
        pass.set_pipeline(pl);
        pass.set_bind_group(bg);
        pass.dispatch_workgroups(1);
        pass.end();
        ctx.submit(enc.finish());
    }
    ctx.wait_idle();
    // ((0*2+1)*2+2)*2+3 = 11 only if order is preserved
    HostTensor r = ctx.download(out, {{size_t(1)}});
    CHECK(r.data[0] == doctest::Approx(11.0));
    CHECK(ctx.dispatches_executed() == 3);
}

TEST_CASE("buffer validation errors") {
    GpuContext ctx = acquire_context({BackendKind::any}, true);
    CHECK_THROWS_AS(ctx.create_buffer(0, usage::storage), Error);
    DeviceBuffer b = ctx.create_buffer(16, usage::storage);
    float v = 0;
    CHECK_THROWS_AS(ctx.write_buffer(b, 0, &v, 4), Error);  // no copy_dst
    DeviceBuffer c = ctx.create_buffer(16, usage::copy_dst);
    CHECK_THROWS_AS(ctx.write_buffer(c, 14, &v, 4), Error);  // out of range
}
