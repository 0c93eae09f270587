#include "dispatchlab/gpu.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "dispatchlab/error.hpp"

namespace dispatchlab::gpu {

const char* backend_name(BackendKind k) {
    switch (k) {
        case BackendKind::vulkan: return "vulkan";
        case BackendKind::metal: return "metal";
        case BackendKind::d3d12: return "d3d12";
        case BackendKind::software: return "software";
        case BackendKind::any: return "any";
    }
    return "?";
}

std::optional<BackendKind> backend_from_string(std::string_view s) {
    for (BackendKind k : {BackendKind::vulkan, BackendKind::metal, BackendKind::d3d12,
                          BackendKind::software, BackendKind::any})
        if (s == backend_name(k)) return k;
    return std::nullopt;
}

BackendChoice backend_from_env_or(BackendChoice requested) {
    if (const char* env = std::getenv("DISPATCH_LAB_BACKEND")) {
        if (auto k = backend_from_string(env)) return BackendChoice{*k};
        raise(Errc::InvalidArgument,
              std::string("DISPATCH_LAB_BACKEND has unknown value '") + env + "'");
    }
    return requested;
}

namespace detail {

struct BufferState {
    std::vector<uint32_t> words;
    size_t byte_length = 0;
    uint32_t usage = 0;
};

struct DeviceState {
    HardwareInfo info;

    std::mutex mu;
    std::condition_variable work_cv;
    std::condition_variable idle_cv;
    std::deque<CommandBuffer> queue;
    bool executing = false;
    bool stop = false;
    std::string pending_error;
    bool lost = false;
    std::atomic<uint64_t> dispatches_executed{0};
    std::thread worker;

    ~DeviceState() {
        {
            std::lock_guard<std::mutex> lk(mu);
            stop = true;
        }
        work_cv.notify_all();
        if (worker.joinable()) worker.join();
    }

    void run_command_buffer(const CommandBuffer& cb) {
        for (const auto& cmd : cb.cmds) {
            if (cmd.kind == CommandBuffer::Cmd::Kind::Copy) {
                const auto& c = cmd.copy;
                std::memcpy(reinterpret_cast<char*>(c.dst->words.data()) + c.dst_offset,
                            reinterpret_cast<const char*>(c.src->words.data()) + c.src_offset,
                            c.bytes);
                continue;
            }
            const auto& d = cmd.dispatch;
            wgsl::DispatchRequest req;
            req.module = d.pipeline.entry() ? d.pipeline.module_.get() : nullptr;
            req.entry = d.pipeline.entry();
            req.groups_x = d.x;
            req.groups_y = d.y;
            req.groups_z = d.z;
            for (const auto& e : d.bind_group.entries_) {
                wgsl::BufferBinding b;
                b.binding = e.binding;
                b.data = e.buffer->words.data();
                b.words = e.buffer->words.size();
                b.read_only = false;
                req.bindings.push_back(b);
            }
            wgsl::execute(req);
            dispatches_executed.fetch_add(1, std::memory_order_relaxed);
        }
    }

    void worker_loop() {
        std::unique_lock<std::mutex> lk(mu);
        while (true) {
            work_cv.wait(lk, [&] { return stop || !queue.empty(); });
            if (stop) return;
            CommandBuffer cb = std::move(queue.front());
            queue.pop_front();
            executing = true;
            lk.unlock();
            std::string error;
            try {
                run_command_buffer(cb);
            } catch (const std::exception& e) {
                error = e.what();
            }
            lk.lock();
            executing = false;
            if (!error.empty()) {
                pending_error = error;
                lost = true;
                queue.clear();
            }
            if (queue.empty()) idle_cv.notify_all();
        }
    }

    void check_not_lost() {
        if (lost && pending_error.empty())
            raise(Errc::DeviceLost, "device lost by earlier execution error");
    }
};

}  // namespace detail

using detail::BufferState;
using detail::DeviceState;

size_t DeviceBuffer::byte_length() const { return state_ ? state_->byte_length : 0; }
uint32_t DeviceBuffer::usage() const { return state_ ? state_->usage : 0; }

void ComputePass::set_pipeline(const ComputePipeline& p) { pipeline_ = p; }
void ComputePass::set_bind_group(const BindGroup& bg) { bind_group_ = bg; }

void ComputePass::dispatch_workgroups(uint32_t x, uint32_t y, uint32_t z) {
    if (ended_) raise(Errc::InvalidArgument, "dispatch after pass end");
    if (!pipeline_.valid()) raise(Errc::InvalidArgument, "dispatch without pipeline");
    if (!bind_group_.valid()) raise(Errc::InvalidArgument, "dispatch without bind group");
    if (x == 0 || y == 0 || z == 0) raise(Errc::InvalidArgument, "zero workgroup count");
    CommandBuffer::Cmd cmd;
    cmd.kind = CommandBuffer::Cmd::Kind::Dispatch;
    cmd.dispatch.pipeline = pipeline_;
    cmd.dispatch.bind_group = bind_group_;
    cmd.dispatch.x = x;
    cmd.dispatch.y = y;
    cmd.dispatch.z = z;
    target_->cmds.push_back(std::move(cmd));
}

void ComputePass::end() { ended_ = true; }

ComputePass CommandEncoder::begin_compute_pass() {
    if (finished_) raise(Errc::InvalidArgument, "pass on finished encoder");
    return ComputePass(&buf_);
}

void CommandEncoder::copy_buffer_to_buffer(const DeviceBuffer& src, size_t src_offset,
                                           const DeviceBuffer& dst, size_t dst_offset,
                                           size_t bytes) {
    if (finished_) raise(Errc::InvalidArgument, "copy on finished encoder");
    if (!(src.usage() & usage::copy_src)) raise(Errc::InvalidArgument, "src lacks copy_src");
    if (!(dst.usage() & usage::copy_dst)) raise(Errc::InvalidArgument, "dst lacks copy_dst");
    if (src_offset + bytes > src.byte_length() || dst_offset + bytes > dst.byte_length())
        raise(Errc::SizeMismatch, "copy out of range");
    if (src_offset % 4 || dst_offset % 4 || bytes % 4)
        raise(Errc::InvalidArgument, "copy offsets/size must be 4-byte aligned");
    CommandBuffer::Cmd cmd;
    cmd.kind = CommandBuffer::Cmd::Kind::Copy;
    cmd.copy.src = src.state_;
    cmd.copy.dst = dst.state_;
    cmd.copy.src_offset = src_offset;
    cmd.copy.dst_offset = dst_offset;
    cmd.copy.bytes = bytes;
    buf_.cmds.push_back(std::move(cmd));
}

CommandBuffer CommandEncoder::finish() {
    if (finished_) raise(Errc::InvalidArgument, "encoder finished twice");
    finished_ = true;
    return std::move(buf_);
}

const HardwareInfo& GpuContext::info() const {
    if (!state_) raise(Errc::InvalidArgument, "null context");
    return state_->info;
}

DeviceBuffer GpuContext::create_buffer(size_t byte_length, uint32_t usage_bits) {
    if (byte_length == 0) raise(Errc::SizeMismatch, "buffer byte_length must be > 0");
    if (usage_bits == 0) raise(Errc::InvalidArgument, "buffer needs usage flags");
    auto b = std::make_shared<BufferState>();
    b->byte_length = byte_length;
    b->usage = usage_bits;
    b->words.assign((byte_length + 3) / 4, 0);
    DeviceBuffer out;
    out.state_ = std::move(b);
    return out;
}

void GpuContext::write_buffer(const DeviceBuffer& buf, size_t offset, const void* data,
                              size_t bytes) {
    if (!buf.valid()) raise(Errc::InvalidArgument, "write to null buffer");
    if (!(buf.usage() & usage::copy_dst)) raise(Errc::InvalidArgument, "buffer lacks copy_dst");
    if (offset + bytes > buf.byte_length()) raise(Errc::SizeMismatch, "write out of range");
    std::memcpy(reinterpret_cast<char*>(buf.state_->words.data()) + offset, data, bytes);
}

ShaderModule GpuContext::create_shader_module(std::string_view source, std::string label) {
    ShaderModule m;
    m.module_ = wgsl::parse(source, std::move(label));
    return m;
}

ComputePipeline GpuContext::create_compute_pipeline(const ShaderModule& mod,
                                                    std::string_view entry) {
    if (!mod.valid()) raise(Errc::InvalidArgument, "pipeline from null module");
    const wgsl::Function* f = mod.module()->find_entry(entry);
    if (!f)
        raise(Errc::ShaderError, mod.module()->label + ": no compute entry point '" +
                                     std::string(entry) + "'");
    uint32_t lanes = f->workgroup_size[0] * f->workgroup_size[1] * f->workgroup_size[2];
    if (lanes > state_->info.max_workgroup_size)
        raise(Errc::LimitsTooSmall, "workgroup size exceeds device limit");
    ComputePipeline p;
    p.module_ = mod.module_;
    p.entry_ = f;
    p.label_ = mod.module()->label + ":" + std::string(entry);
    return p;
}

BindGroup GpuContext::create_bind_group(
    const ComputePipeline& pipeline,
    const std::vector<std::pair<uint32_t, DeviceBuffer>>& entries) {
    if (!pipeline.valid()) raise(Errc::InvalidArgument, "bind group without pipeline");
    BindGroup bg;
    for (const auto& [binding, buf] : entries) {
        if (!buf.valid()) raise(Errc::InvalidArgument, "null buffer in bind group");
        const wgsl::GlobalVar* var = nullptr;
        for (const auto& g : pipeline.module_->globals)
            if (g.space != wgsl::AddressSpace::Workgroup && g.binding == binding) var = &g;
        if (var) {
            bool is_uniform = var->space == wgsl::AddressSpace::Uniform;
            if (is_uniform && !(buf.usage() & usage::uniform))
                raise(Errc::InvalidArgument, "uniform binding needs a uniform-usage buffer");
            if (!is_uniform) {
                if (!(buf.usage() & usage::storage))
                    raise(Errc::InvalidArgument, "storage binding needs a storage-usage buffer");
                if (buf.usage() & usage::map_read)
                    raise(Errc::InvalidArgument,
                          "map_read buffers are never bound as storage in a compute pass");
            }
        }
        bg.entries_.push_back({binding, buf.state_});
    }
    // every binding the entry uses must be present
    for (uint32_t needed : pipeline.entry_->used_bindings) {
        bool found = false;
        for (const auto& e : bg.entries_) found |= (e.binding == needed);
        if (!found)
            raise(Errc::InvalidArgument, pipeline.label_ + ": missing binding " +
                                             std::to_string(needed));
    }
    return bg;
}

CommandEncoder GpuContext::create_command_encoder() {
    if (!state_) raise(Errc::InvalidArgument, "null context");
    return CommandEncoder();
}

void GpuContext::submit(CommandBuffer&& cb) {
    auto& st = *state_;
    {
        std::lock_guard<std::mutex> lk(st.mu);
        if (st.lost)
            raise(Errc::DeviceLost, "device lost: " + st.pending_error);
        st.queue.push_back(std::move(cb));
    }
    st.work_cv.notify_one();
}

void GpuContext::wait_idle() {
    auto& st = *state_;
    std::unique_lock<std::mutex> lk(st.mu);
    st.idle_cv.wait(lk, [&] { return (st.queue.empty() && !st.executing) || st.lost; });
    if (st.lost && !st.pending_error.empty()) {
        std::string err = st.pending_error;
        st.pending_error.clear();
        raise(Errc::DeviceLost, err);
    }
}

uint64_t GpuContext::dispatches_executed() const {
    return state_->dispatches_executed.load(std::memory_order_relaxed);
}

DeviceBuffer GpuContext::upload(const HostTensor& host) {
    host.check_consistent();
    if (host.element_count() == 0)
        raise(Errc::SizeMismatch, "upload of empty tensor");
    DeviceBuffer buf = create_buffer(host.spec.byte_length(),
                                     usage::storage | usage::copy_src | usage::copy_dst);
    write_buffer(buf, 0, host.data.data(), host.spec.byte_length());
    return buf;
}

HostTensor GpuContext::download(const DeviceBuffer& buf, const TensorSpec& spec) {
    if (!buf.valid()) raise(Errc::MapFailed, "download from null buffer");
    if (!(buf.usage() & usage::copy_src))
        raise(Errc::MapFailed, "download needs copy_src usage on the source buffer");
    if (spec.byte_length() > buf.byte_length())
        raise(Errc::SizeMismatch, "download larger than buffer");
    DeviceBuffer staging = create_buffer(spec.byte_length(), usage::map_read | usage::copy_dst);
    CommandEncoder enc = create_command_encoder();
    enc.copy_buffer_to_buffer(buf, 0, staging, 0, spec.byte_length());
    submit(enc.finish());
    wait_idle();
    HostTensor out;
    out.spec = spec;
    out.data.resize(spec.element_count());
    std::memcpy(out.data.data(), staging.state_->words.data(), spec.byte_length());
    return out;
}

std::vector<uint32_t> GpuContext::download_words(const DeviceBuffer& buf, size_t words) {
    if (!buf.valid()) raise(Errc::MapFailed, "download from null buffer");
    if (!(buf.usage() & usage::copy_src))
        raise(Errc::MapFailed, "download needs copy_src usage on the source buffer");
    if (words * 4 > buf.byte_length()) raise(Errc::SizeMismatch, "download larger than buffer");
    DeviceBuffer staging = create_buffer(words * 4, usage::map_read | usage::copy_dst);
    CommandEncoder enc = create_command_encoder();
    enc.copy_buffer_to_buffer(buf, 0, staging, 0, words * 4);
    submit(enc.finish());
    wait_idle();
    return std::vector<uint32_t>(staging.state_->words.begin(),
                                 staging.state_->words.begin() + words);
}

GpuContext acquire_context(BackendChoice backend, bool high_performance) {
    (void)high_performance;  // single adapter; recorded via HardwareInfo instead
    switch (backend.kind) {
        case BackendKind::vulkan:
        case BackendKind::metal:
        case BackendKind::d3d12:
            raise(Errc::NoAdapter, std::string("no ") + backend_name(backend.kind) +
                                       " adapter on this platform (this build ships the "
                                       "software fallback adapter only)");
        case BackendKind::software:
        case BackendKind::any: break;
    }

    auto st = std::make_shared<DeviceState>();
    st->info.adapter_name = "dispatch-lab software fallback adapter (lockstep WGSL interpreter)";
    st->info.backend = BackendKind::software;
    st->info.max_workgroup_size = 256;
    st->info.max_workgroups_per_dim = 65535;
    st->info.timestamp_query_supported = false;
    st->info.is_fallback_adapter = true;
    if (st->info.max_workgroup_size < 256)
        raise(Errc::LimitsTooSmall, "kernel library needs workgroup size >= 256");
    st->worker = std::thread([s = st.get()] { s->worker_loop(); });
    GpuContext ctx;
    ctx.state_ = std::move(st);
    return ctx;
}

}  // namespace dispatchlab::gpu
