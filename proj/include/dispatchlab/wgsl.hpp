#pragma once

// Minimal WGSL front-end and lockstep executor backing the software fallback
// adapter. Covers the language subset the shader library uses: scalar
// f32/u32/i32/bool arithmetic, fixed and runtime-sized arrays, uniform
// structs of scalars, workgroup shared arrays, structured control flow, and
// workgroupBarrier() under uniform control flow. All threads of a workgroup
// execute in lockstep with divergence masks, so a barrier is a checkpoint
// that asserts control-flow uniformity rather than a suspension point.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dispatchlab::wgsl {

enum class ScalarKind : uint8_t { F32, U32, I32, Bool, AbstractInt };

enum class AddressSpace : uint8_t { Uniform, StorageRead, StorageReadWrite, Workgroup };

struct Expr;
struct Stmt;

struct StructField {
    std::string name;
    ScalarKind kind;
    uint32_t offset_bytes;
};

struct StructDecl {
    std::string name;
    std::vector<StructField> fields;
    uint32_t size_bytes = 0;
};

struct GlobalVar {
    std::string name;
    AddressSpace space;
    // element kind for arrays; structs use struct_index
    ScalarKind elem = ScalarKind::F32;
    bool is_array = false;
    uint32_t array_len = 0;  // 0 = runtime-sized
    int struct_index = -1;   // >= 0: uniform struct
    uint32_t group = 0;
    uint32_t binding = 0;
    bool has_binding = false;
};

struct Param {
    std::string name;
    std::string builtin;  // global_invocation_id, local_invocation_id,
                          // workgroup_id, local_invocation_index, num_workgroups
    bool is_vec3 = false;
};

struct Function {
    std::string name;
    bool is_entry = false;
    std::array<uint32_t, 3> workgroup_size = {1, 1, 1};
    std::vector<Param> params;
    // helper functions: scalar params/return
    std::vector<std::pair<std::string, ScalarKind>> value_params;
    bool has_return_value = false;
    ScalarKind return_kind = ScalarKind::F32;
    std::vector<std::unique_ptr<Stmt>> body;
    std::vector<uint32_t> used_bindings;  // bindings referenced by this entry
};

struct ConstDecl {
    std::string name;
    uint64_t value = 0;
    ScalarKind kind = ScalarKind::AbstractInt;
};

struct Module {
    std::string label;
    std::vector<StructDecl> structs;
    std::vector<GlobalVar> globals;
    std::vector<Function> functions;
    std::vector<ConstDecl> consts;

    const Function* find_entry(std::string_view name) const;
    const GlobalVar* find_global(std::string_view name) const;
};

// Parses a module; throws Error(Errc::ShaderError) with location info on any
// syntax or unsupported-construct problem.
std::shared_ptr<const Module> parse(std::string_view source, std::string label);

// One bound buffer. data points at the raw 32-bit words of the buffer.
struct BufferBinding {
    uint32_t binding = 0;
    uint32_t* data = nullptr;
    size_t words = 0;
    bool read_only = false;
};

struct DispatchRequest {
    const Module* module = nullptr;
    const Function* entry = nullptr;
    uint32_t groups_x = 1, groups_y = 1, groups_z = 1;
    std::vector<BufferBinding> bindings;
};

// Executes a dispatch synchronously on the calling thread. Throws
// Error(Errc::ShaderError) on validation failures, out-of-bounds access, or
// barriers in non-uniform control flow.
void execute(const DispatchRequest& req);

}  // namespace dispatchlab::wgsl
