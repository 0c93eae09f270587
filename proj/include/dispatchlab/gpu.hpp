#pragma once

// WebGPU-shaped device layer: buffers, shader modules, compute pipelines,
// bind groups, command encoders with explicit passes, an asynchronous queue,
// and one blocking wait. The shipped adapter is a software fallback that
// executes WGSL through the lockstep interpreter; requests for native
// backends fail with NoAdapter on platforms (or builds) where none exists.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dispatchlab/tensor.hpp"
#include "dispatchlab/wgsl.hpp"

namespace dispatchlab::gpu {

enum class BackendKind : uint8_t { vulkan, metal, d3d12, software, any };

const char* backend_name(BackendKind k);
std::optional<BackendKind> backend_from_string(std::string_view s);

struct BackendChoice {
    BackendKind kind = BackendKind::any;
};

// DISPATCH_LAB_BACKEND overrides the requested backend when set.
BackendChoice backend_from_env_or(BackendChoice requested);

struct HardwareInfo {
    std::string adapter_name;
    BackendKind backend = BackendKind::software;
    uint32_t max_workgroup_size = 0;
    uint32_t max_workgroups_per_dim = 0;
    bool timestamp_query_supported = false;
    bool is_fallback_adapter = false;

    bool operator==(const HardwareInfo&) const = default;
    bool is_native() const { return !is_fallback_adapter; }
};

namespace usage {
inline constexpr uint32_t storage = 1;
inline constexpr uint32_t uniform = 2;
inline constexpr uint32_t copy_src = 4;
inline constexpr uint32_t copy_dst = 8;
inline constexpr uint32_t map_read = 16;
}  // namespace usage

namespace detail {
struct DeviceState;
struct BufferState;
}  // namespace detail

class DeviceBuffer {
public:
    DeviceBuffer() = default;
    size_t byte_length() const;
    uint32_t usage() const;
    bool valid() const { return state_ != nullptr; }

private:
    friend class GpuContext;
    friend class BindGroup;
    friend class CommandEncoder;
    std::shared_ptr<detail::BufferState> state_;
};

class ShaderModule {
public:
    ShaderModule() = default;
    const wgsl::Module* module() const { return module_.get(); }
    bool valid() const { return module_ != nullptr; }

private:
    friend class GpuContext;
    std::shared_ptr<const wgsl::Module> module_;
};

class ComputePipeline {
public:
    ComputePipeline() = default;
    bool valid() const { return entry_ != nullptr; }
    const wgsl::Function* entry() const { return entry_; }
    std::array<uint32_t, 3> workgroup_size() const { return entry_->workgroup_size; }
    const std::string& label() const { return label_; }

private:
    friend class GpuContext;
    friend class BindGroup;
    friend struct detail::DeviceState;
    std::shared_ptr<const wgsl::Module> module_;
    const wgsl::Function* entry_ = nullptr;
    std::string label_;
};

class BindGroup {
public:
    BindGroup() = default;
    bool valid() const { return !entries_.empty(); }

private:
    friend class GpuContext;
    friend class CommandEncoder;
    friend struct detail::DeviceState;
    struct Entry {
        uint32_t binding;
        std::shared_ptr<detail::BufferState> buffer;
    };
    std::vector<Entry> entries_;
};

struct CommandBuffer {
    struct Dispatch {
        ComputePipeline pipeline;
        BindGroup bind_group;
        uint32_t x = 1, y = 1, z = 1;
    };
    struct Copy {
        std::shared_ptr<detail::BufferState> src, dst;
        size_t src_offset = 0, dst_offset = 0, bytes = 0;
    };
    struct Cmd {
        enum class Kind : uint8_t { Dispatch, Copy } kind;
        Dispatch dispatch;
        Copy copy;
    };
    std::vector<Cmd> cmds;
};

class ComputePass {
public:
    void set_pipeline(const ComputePipeline& p);
    void set_bind_group(const BindGroup& bg);
    void dispatch_workgroups(uint32_t x, uint32_t y = 1, uint32_t z = 1);
    void end();

private:
    friend class CommandEncoder;
    explicit ComputePass(CommandBuffer* target) : target_(target) {}
    CommandBuffer* target_;
    ComputePipeline pipeline_;
    BindGroup bind_group_;
    bool ended_ = false;
};

class CommandEncoder {
public:
    ComputePass begin_compute_pass();
    void copy_buffer_to_buffer(const DeviceBuffer& src, size_t src_offset,
                               const DeviceBuffer& dst, size_t dst_offset, size_t bytes);
    CommandBuffer finish();

private:
    friend class GpuContext;
    CommandEncoder() = default;
    CommandBuffer buf_;
    bool finished_ = false;
};

// A live device + queue. Single-threaded ownership: all recording and timing
// happen on the owning thread; wait_idle() is the only synchronization
// primitive, blocking until the queue worker drains.
class GpuContext {
public:
    GpuContext() = default;
    const HardwareInfo& info() const;

    DeviceBuffer create_buffer(size_t byte_length, uint32_t usage);
    void write_buffer(const DeviceBuffer& buf, size_t offset, const void* data, size_t bytes);
    ShaderModule create_shader_module(std::string_view wgsl_source, std::string label);
    ComputePipeline create_compute_pipeline(const ShaderModule& mod, std::string_view entry);
    BindGroup create_bind_group(const ComputePipeline& pipeline,
                                const std::vector<std::pair<uint32_t, DeviceBuffer>>& entries);
    CommandEncoder create_command_encoder();
    void submit(CommandBuffer&& cb);
    void wait_idle();

    // Number of compute dispatches the device has executed so far.
    uint64_t dispatches_executed() const;

    // Convenience paths used by every experiment. upload creates a
    // storage|copy_src|copy_dst buffer; download stages through a map_read
    // buffer and blocks. Round-trips are bit-identical.
    DeviceBuffer upload(const HostTensor& host);
    HostTensor download(const DeviceBuffer& buf, const TensorSpec& spec);
    std::vector<uint32_t> download_words(const DeviceBuffer& buf, size_t words);

    bool valid() const { return state_ != nullptr; }

private:
    friend GpuContext acquire_context(BackendChoice, bool);
    std::shared_ptr<detail::DeviceState> state_;
};

// Acquires a device on the chosen backend. `any` resolves deterministically
// to the platform default; in this build that is the software fallback
// adapter. Throws NoAdapter if the requested backend is unavailable and
// LimitsTooSmall if the adapter cannot run the kernel library (workgroup
// size >= 256 required).
GpuContext acquire_context(BackendChoice backend, bool high_performance);

}  // namespace dispatchlab::gpu
