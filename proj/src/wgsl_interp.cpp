#include <bit>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "dispatchlab/error.hpp"
#include "dispatchlab/wgsl.hpp"
#include "dispatchlab/wgsl_ast.hpp"

namespace dispatchlab::wgsl {

namespace {

inline float as_f32(uint32_t w) { return std::bit_cast<float>(w); }
inline uint32_t from_f32(float f) { return std::bit_cast<uint32_t>(f); }
inline int32_t as_i32(uint32_t w) { return std::bit_cast<int32_t>(w); }
inline uint32_t from_i32(int32_t i) { return std::bit_cast<uint32_t>(i); }

struct Val {
    ScalarKind kind;
    uint32_t* data;
};

struct MemView {
    const GlobalVar* var = nullptr;
    uint32_t* data = nullptr;
    size_t len_words = 0;
    bool writable = false;
};

using Mask = std::vector<uint8_t>;

class Exec {
public:
    Exec(const DispatchRequest& req) : req_(req), mod_(req.module), entry_(req.entry) {
        const auto& ws = entry_->workgroup_size;
        lanes_ = ws[0] * ws[1] * ws[2];
        if (lanes_ == 0) trap("workgroup size is zero", 0);
        live_.assign(lanes_, 1);
        returned_.assign(lanes_, 0);
        build_views();
        slots_.resize(64);
        for (auto& s : slots_) s.resize(lanes_);
        // builtin component vectors, filled per workgroup
        for (auto& v : builtin_) v.resize(lanes_);
        wg_arrays_.resize(mod_->globals.size());
        for (size_t i = 0; i < mod_->globals.size(); i++) {
            const auto& g = mod_->globals[i];
            if (g.space == AddressSpace::Workgroup) wg_arrays_[i].resize(g.array_len);
        }
    }

    void run() {
        for (uint32_t wz = 0; wz < req_.groups_z; wz++)
            for (uint32_t wy = 0; wy < req_.groups_y; wy++)
                for (uint32_t wx = 0; wx < req_.groups_x; wx++) run_workgroup(wx, wy, wz);
    }

private:
    const DispatchRequest& req_;
    const Module* mod_;
    const Function* entry_;
    uint32_t lanes_ = 0;

    std::vector<MemView> views_;  // indexed by binding

    // builtin vectors: gid.xyz, lid.xyz, wid.xyz, nwg.xyz, lidx
    enum BuiltinSlot {
        GID_X, GID_Y, GID_Z, LID_X, LID_Y, LID_Z,
        WID_X, WID_Y, WID_Z, NWG_X, NWG_Y, NWG_Z, LIDX, BUILTIN_COUNT
    };
    std::array<std::vector<uint32_t>, BUILTIN_COUNT> builtin_;

    std::vector<std::vector<uint32_t>> wg_arrays_;  // by global index

    // value stack
    std::vector<std::vector<uint32_t>> slots_;
    size_t sp_ = 0;

    // locals: flat slab with scope marks
    struct Local {
        std::string_view name;
        ScalarKind kind;
        bool is_mut;
        size_t offset;
    };
    std::vector<Local> locals_;
    std::vector<uint32_t> locals_slab_;
    std::vector<std::pair<size_t, size_t>> scopes_;  // (locals count, slab size)

    // control flow
    Mask live_;
    Mask returned_;
    struct LoopMasks {
        Mask broke, continued;
    };
    std::vector<LoopMasks> loops_;

    // helper-call return plumbing
    std::vector<uint32_t> ret_val_;
    ScalarKind ret_kind_ = ScalarKind::F32;
    bool in_helper_ = false;
    int call_depth_ = 0;

    [[noreturn]] void trap(const std::string& msg, int line) const {
        raise(Errc::ShaderError, mod_->label + ":" + entry_->name +
                                     (line ? ":" + std::to_string(line) : "") + ": " + msg);
    }

    void build_views() {
        uint32_t max_binding = 0;
        for (const auto& g : mod_->globals)
            if (g.space != AddressSpace::Workgroup) max_binding = std::max(max_binding, g.binding);
        views_.resize(max_binding + 1);
        for (const auto& g : mod_->globals) {
            if (g.space == AddressSpace::Workgroup) continue;
            bool used = false;
            for (uint32_t b : entry_->used_bindings) used |= (b == g.binding);
            const BufferBinding* found = nullptr;
            for (const auto& b : req_.bindings)
                if (b.binding == g.binding) found = &b;
            if (!found) {
                if (used)
                    trap("no buffer bound at @binding(" + std::to_string(g.binding) + ") for '" +
                             g.name + "'",
                         0);
                continue;
            }
            MemView v;
            v.var = &g;
            v.data = found->data;
            v.len_words = found->words;
            v.writable = g.space == AddressSpace::StorageReadWrite;
            if (v.writable && found->read_only)
                trap("read-only buffer bound to read_write var '" + g.name + "'", 0);
            if (g.space == AddressSpace::Uniform) {
                const auto& s = mod_->structs[g.struct_index];
                if (v.len_words * 4 < s.size_bytes)
                    trap("uniform buffer for '" + g.name + "' smaller than struct " + s.name, 0);
            }
            if (g.is_array && g.array_len > 0 && v.len_words < g.array_len)
                trap("buffer for '" + g.name + "' smaller than declared array", 0);
            views_[g.binding] = v;
        }
    }

    void run_workgroup(uint32_t wx, uint32_t wy, uint32_t wz) {
        const auto& ws = entry_->workgroup_size;
        for (uint32_t l = 0; l < lanes_; l++) {
            uint32_t lx = l % ws[0];
            uint32_t ly = (l / ws[0]) % ws[1];
            uint32_t lz = l / (ws[0] * ws[1]);
            builtin_[LID_X][l] = lx;
            builtin_[LID_Y][l] = ly;
            builtin_[LID_Z][l] = lz;
            builtin_[GID_X][l] = wx * ws[0] + lx;
            builtin_[GID_Y][l] = wy * ws[1] + ly;
            builtin_[GID_Z][l] = wz * ws[2] + lz;
            builtin_[WID_X][l] = wx;
            builtin_[WID_Y][l] = wy;
            builtin_[WID_Z][l] = wz;
            builtin_[NWG_X][l] = req_.groups_x;
            builtin_[NWG_Y][l] = req_.groups_y;
            builtin_[NWG_Z][l] = req_.groups_z;
            builtin_[LIDX][l] = l;
        }
        for (size_t i = 0; i < wg_arrays_.size(); i++)
            if (!wg_arrays_[i].empty())
                std::memset(wg_arrays_[i].data(), 0, wg_arrays_[i].size() * 4);
        std::fill(live_.begin(), live_.end(), 1);
        std::fill(returned_.begin(), returned_.end(), 0);
        locals_.clear();
        locals_slab_.clear();
        scopes_.clear();
        loops_.clear();
        sp_ = 0;
        push_scope();
        exec_stmts(entry_->body);
        pop_scope();
    }

    // ---- masks ----

    bool any_live() const {
        for (uint8_t m : live_) if (m) return true;
        return false;
    }
    bool all_live() const {
        for (uint8_t m : live_) if (!m) return false;
        return true;
    }

    // ---- scopes & locals ----

    void push_scope() { scopes_.emplace_back(locals_.size(), locals_slab_.size()); }
    void pop_scope() {
        locals_.resize(scopes_.back().first);
        locals_slab_.resize(scopes_.back().second);
        scopes_.pop_back();
    }

    Local* find_local(std::string_view name) {
        for (size_t i = locals_.size(); i-- > 0;)
            if (locals_[i].name == name) return &locals_[i];
        return nullptr;
    }

    Local& declare_local(std::string_view name, ScalarKind kind, bool is_mut, int line) {
        if (kind == ScalarKind::AbstractInt) kind = ScalarKind::I32;  // WGSL default
        Local l;
        l.name = name;
        l.kind = kind;
        l.is_mut = is_mut;
        l.offset = locals_slab_.size();
        locals_slab_.resize(locals_slab_.size() + lanes_);
        locals_.push_back(l);
        (void)line;
        return locals_.back();
    }

    // ---- value stack ----

    Val alloc(ScalarKind kind) {
        if (sp_ >= slots_.size()) {
            slots_.resize(sp_ + 16);
            for (size_t i = sp_; i < slots_.size(); i++) slots_[i].resize(lanes_);
        }
        return {kind, slots_[sp_++].data()};
    }

    // ---- conversions ----

    void coerce(Val& v, ScalarKind target, int line) {
        if (v.kind == target) return;
        if (v.kind == ScalarKind::AbstractInt) {
            if (target == ScalarKind::F32) {
                for (uint32_t l = 0; l < lanes_; l++)
                    if (live_[l]) v.data[l] = from_f32(static_cast<float>(v.data[l]));
            } else if (target == ScalarKind::I32 || target == ScalarKind::U32) {
                // payload already integral words
            } else {
                trap("cannot use integer literal as bool", line);
            }
            v.kind = target;
            return;
        }
        trap("type mismatch (no implicit conversions in WGSL)", line);
    }

    static ScalarKind unify(ScalarKind a, ScalarKind b) {
        if (a == b) return a;
        if (a == ScalarKind::AbstractInt) return b;
        if (b == ScalarKind::AbstractInt) return a;
        return ScalarKind::Bool;  // sentinel for "incompatible"; caller traps
    }

    // ---- expression evaluation ----

    Val eval(const Expr* e) {
        switch (e->kind) {
            case Expr::Kind::LiteralF32: {
                Val v = alloc(ScalarKind::F32);
                uint32_t w = from_f32(e->f32_value);
                for (uint32_t l = 0; l < lanes_; l++) v.data[l] = w;
                return v;
            }
            case Expr::Kind::LiteralInt: {
                ScalarKind k = e->u_suffix ? ScalarKind::U32
                               : e->i_suffix ? ScalarKind::I32
                                             : ScalarKind::AbstractInt;
                Val v = alloc(k);
                uint32_t w = static_cast<uint32_t>(e->int_value);
                for (uint32_t l = 0; l < lanes_; l++) v.data[l] = w;
                return v;
            }
            case Expr::Kind::LiteralBool: {
                Val v = alloc(ScalarKind::Bool);
                for (uint32_t l = 0; l < lanes_; l++) v.data[l] = e->bool_value ? 1 : 0;
                return v;
            }
            case Expr::Kind::Ident: return eval_ident(e);
            case Expr::Kind::Index: return eval_index(e);
            case Expr::Kind::Member: return eval_member(e);
            case Expr::Kind::Binary: return eval_binary(e);
            case Expr::Kind::Unary: return eval_unary(e);
            case Expr::Kind::Call: return eval_call(e);
        }
        trap("unreachable expr kind", e->line);
    }

    Val eval_ident(const Expr* e) {
        if (Local* loc = find_local(e->name)) {
            Val v = alloc(loc->kind);
            const uint32_t* src = locals_slab_.data() + loc->offset;
            std::memcpy(v.data, src, lanes_ * 4);
            return v;
        }
        int b = builtin_scalar_slot(e->name);
        if (b >= 0) {
            Val v = alloc(ScalarKind::U32);
            std::memcpy(v.data, builtin_[b].data(), lanes_ * 4);
            return v;
        }
        for (const auto& c : mod_->consts) {
            if (c.name == e->name) {
                Val v = alloc(c.kind);
                uint32_t w = static_cast<uint32_t>(c.value);
                for (uint32_t l = 0; l < lanes_; l++) v.data[l] = w;
                return v;
            }
        }
        if (mod_->find_global(e->name))
            trap("array/struct '" + e->name + "' used as a scalar value", e->line);
        trap("unknown identifier '" + e->name + "'", e->line);
    }

    int builtin_scalar_slot(std::string_view name) const {
        for (const auto& p : entry_->params)
            if (p.name == name && !p.is_vec3 && p.builtin == "local_invocation_index")
                return LIDX;
        return -1;
    }

    const Param* find_vec3_param(std::string_view name) const {
        for (const auto& p : entry_->params)
            if (p.name == name && p.is_vec3) return &p;
        return nullptr;
    }

    Val eval_member(const Expr* e) {
        if (e->a->kind != Expr::Kind::Ident) trap("unsupported member base", e->line);
        const std::string& base = e->a->name;
        if (const Param* p = find_vec3_param(base)) {
            int comp = e->name == "x" ? 0 : e->name == "y" ? 1 : e->name == "z" ? 2 : -1;
            if (comp < 0) trap("vec3 has no component '" + e->name + "'", e->line);
            int slot;
            if (p->builtin == "global_invocation_id") slot = GID_X + comp;
            else if (p->builtin == "local_invocation_id") slot = LID_X + comp;
            else if (p->builtin == "workgroup_id") slot = WID_X + comp;
            else if (p->builtin == "num_workgroups") slot = NWG_X + comp;
            else trap("unsupported builtin '" + p->builtin + "'", e->line);
            Val v = alloc(ScalarKind::U32);
            std::memcpy(v.data, builtin_[slot].data(), lanes_ * 4);
            return v;
        }
        const GlobalVar* g = mod_->find_global(base);
        if (g && g->space == AddressSpace::Uniform) {
            const auto& s = mod_->structs[g->struct_index];
            for (const auto& f : s.fields) {
                if (f.name == e->name) {
                    const MemView& view = views_[g->binding];
                    if (!view.data) trap("uniform '" + base + "' not bound", e->line);
                    uint32_t w = view.data[f.offset_bytes / 4];
                    Val v = alloc(f.kind);
                    for (uint32_t l = 0; l < lanes_; l++) v.data[l] = w;
                    return v;
                }
            }
            trap("struct " + s.name + " has no field '" + e->name + "'", e->line);
        }
        trap("unsupported member access on '" + base + "'", e->line);
    }

    // Resolves an array reference to (elem pointer, length, kind).
    struct ArrayRef {
        uint32_t* data;
        size_t len;
        ScalarKind kind;
        bool writable;
        const char* name;
    };

    ArrayRef resolve_array(const Expr* base, int line) {
        if (base->kind != Expr::Kind::Ident) trap("only named arrays can be indexed", line);
        const GlobalVar* g = mod_->find_global(base->name);
        if (!g) trap("unknown array '" + base->name + "'", line);
        if (g->space == AddressSpace::Workgroup) {
            size_t gi = g - mod_->globals.data();
            return {wg_arrays_[gi].data(), wg_arrays_[gi].size(), g->elem, true,
                    g->name.c_str()};
        }
        const MemView& v = views_[g->binding];
        if (!v.data) trap("array '" + base->name + "' not bound", line);
        size_t len = g->array_len ? g->array_len : v.len_words;
        return {v.data, len, g->elem, v.writable, g->name.c_str()};
    }

    Val eval_index(const Expr* e) {
        ArrayRef arr = resolve_array(e->a.get(), e->line);
        size_t mark = sp_;
        Val idx = eval(e->b.get());
        if (idx.kind == ScalarKind::AbstractInt) idx.kind = ScalarKind::U32;
        if (idx.kind != ScalarKind::U32 && idx.kind != ScalarKind::I32)
            trap("array index must be an integer", e->line);
        sp_ = mark;
        Val out = alloc(arr.kind);
        // out aliases idx's slot after the stack reset; each lane reads its
        // index before overwriting it, so in-place is safe
        const bool everyone = all_live();
        for (uint32_t l = 0; l < lanes_; l++) {
            if (!everyone && !live_[l]) continue;
            uint32_t i = idx.data[l];
            if (i >= arr.len)
                trap("out-of-bounds read: " + std::string(arr.name) + "[" + std::to_string(i) +
                         "], length " + std::to_string(arr.len),
                     e->line);
            out.data[l] = arr.data[i];
        }
        return out;
    }

    Val eval_unary(const Expr* e) {
        size_t mark = sp_;
        Val a = eval(e->a.get());
        sp_ = mark + 1;
        if (e->un_op == UnOp::Not) {
            if (a.kind != ScalarKind::Bool) trap("! needs a bool operand", e->line);
            for (uint32_t l = 0; l < lanes_; l++)
                if (live_[l]) a.data[l] = a.data[l] ? 0 : 1;
            return a;
        }
        if (a.kind == ScalarKind::AbstractInt) a.kind = ScalarKind::I32;
        if (a.kind == ScalarKind::F32) {
            for (uint32_t l = 0; l < lanes_; l++)
                if (live_[l]) a.data[l] = from_f32(-as_f32(a.data[l]));
        } else if (a.kind == ScalarKind::I32) {
            for (uint32_t l = 0; l < lanes_; l++)
                if (live_[l]) a.data[l] = from_i32(-as_i32(a.data[l]));
        } else {
            trap("cannot negate this type", e->line);
        }
        return a;
    }

    Val eval_binary(const Expr* e) {
        size_t mark = sp_;
        Val a = eval(e->a.get());
        Val b = eval(e->b.get());

        if (e->bin_op == BinOp::And || e->bin_op == BinOp::Or) {
            if (a.kind != ScalarKind::Bool || b.kind != ScalarKind::Bool)
                trap("&&/|| need bool operands", e->line);
            bool is_and = e->bin_op == BinOp::And;
            for (uint32_t l = 0; l < lanes_; l++)
                if (live_[l])
                    a.data[l] = is_and ? (a.data[l] && b.data[l]) : (a.data[l] || b.data[l]);
            sp_ = mark + 1;
            return a;
        }

        ScalarKind k = unify(a.kind, b.kind);
        if (k == ScalarKind::Bool && !(a.kind == ScalarKind::Bool && b.kind == ScalarKind::Bool))
            trap("operand type mismatch", e->line);
        coerce(a, k, e->line);
        coerce(b, k, e->line);

        bool is_cmp = e->bin_op == BinOp::Lt || e->bin_op == BinOp::Le ||
                      e->bin_op == BinOp::Gt || e->bin_op == BinOp::Ge ||
                      e->bin_op == BinOp::Eq || e->bin_op == BinOp::Ne;
        Val out = a;  // in place
        out.kind = is_cmp ? ScalarKind::Bool : k;

        switch (k) {
            case ScalarKind::F32: apply_op<float>(e, a, b, out); break;
            case ScalarKind::U32:
            case ScalarKind::AbstractInt: apply_op<uint32_t>(e, a, b, out); break;
            case ScalarKind::I32: apply_op<int32_t>(e, a, b, out); break;
            case ScalarKind::Bool:
                if (e->bin_op == BinOp::Eq || e->bin_op == BinOp::Ne) {
                    apply_op<uint32_t>(e, a, b, out);
                    break;
                }
                trap("arithmetic on bool", e->line);
            default: trap("operand type mismatch", e->line);
        }
        sp_ = mark + 1;
        return out;
    }

    template <typename T>
    static T load_as(uint32_t w) {
        return std::bit_cast<T>(w);
    }

    template <typename T>
    void apply_op(const Expr* e, Val a, Val b, Val& out) {
        const bool everyone = all_live();
        // branch-free inner loops for the common ops so the compiler can
        // vectorize the all-active case
        if (everyone) {
            switch (e->bin_op) {
                case BinOp::Add:
                    for (uint32_t l = 0; l < lanes_; l++)
                        out.data[l] = std::bit_cast<uint32_t>(
                            T(load_as<T>(a.data[l]) + load_as<T>(b.data[l])));
                    return;
                case BinOp::Sub:
                    for (uint32_t l = 0; l < lanes_; l++)
                        out.data[l] = std::bit_cast<uint32_t>(
                            T(load_as<T>(a.data[l]) - load_as<T>(b.data[l])));
                    return;
                case BinOp::Mul:
                    for (uint32_t l = 0; l < lanes_; l++)
                        out.data[l] = std::bit_cast<uint32_t>(
                            T(load_as<T>(a.data[l]) * load_as<T>(b.data[l])));
                    return;
                case BinOp::Lt:
                    for (uint32_t l = 0; l < lanes_; l++)
                        out.data[l] = load_as<T>(a.data[l]) < load_as<T>(b.data[l]);
                    return;
                default: break;
            }
        }
        for (uint32_t l = 0; l < lanes_; l++) {
            if (!everyone && !live_[l]) continue;
            T x = load_as<T>(a.data[l]);
            T y = load_as<T>(b.data[l]);
            uint32_t r = 0;
            switch (e->bin_op) {
                case BinOp::Add: r = std::bit_cast<uint32_t>(T(x + y)); break;
                case BinOp::Sub: r = std::bit_cast<uint32_t>(T(x - y)); break;
                case BinOp::Mul: r = std::bit_cast<uint32_t>(T(x * y)); break;
                case BinOp::Div:
                    if constexpr (std::is_integral_v<T>) {
                        if (y == 0) trap("integer division by zero", e->line);
                    }
                    r = std::bit_cast<uint32_t>(T(x / y));
                    break;
                case BinOp::Mod:
                    if constexpr (std::is_integral_v<T>) {
                        if (y == 0) trap("integer modulo by zero", e->line);
                        r = std::bit_cast<uint32_t>(T(x % y));
                    } else {
                        r = from_f32(std::fmod(float(x), float(y)));
                    }
                    break;
                case BinOp::Lt: r = x < y; break;
                case BinOp::Le: r = x <= y; break;
                case BinOp::Gt: r = x > y; break;
                case BinOp::Ge: r = x >= y; break;
                case BinOp::Eq: r = x == y; break;
                case BinOp::Ne: r = x != y; break;
                default: trap("unreachable binop", e->line);
            }
            out.data[l] = r;
        }
    }

    Val eval_call(const Expr* e) {
        const std::string& fn = e->name;
        if (fn == "workgroupBarrier") {
            if (!all_live() || loops_depth_divergent())
                trap("workgroupBarrier() in non-uniform control flow", e->line);
            return alloc(ScalarKind::Bool);  // void; dummy
        }
        // conversions
        if (fn == "f32" || fn == "u32" || fn == "i32") {
            size_t mark = sp_;
            Val a = eval(e->args.at(0).get());
            sp_ = mark + 1;
            ScalarKind target = fn == "f32" ? ScalarKind::F32
                                : fn == "u32" ? ScalarKind::U32
                                              : ScalarKind::I32;
            convert_value(a, target, e->line);
            return a;
        }
        if (fn == "exp" || fn == "sqrt" || fn == "inverseSqrt" || fn == "abs" ||
            fn == "floor" || fn == "ceil") {
            size_t mark = sp_;
            Val a = eval(e->args.at(0).get());
            sp_ = mark + 1;
            if (a.kind == ScalarKind::AbstractInt) coerce(a, ScalarKind::F32, e->line);
            if (a.kind != ScalarKind::F32 && fn != "abs")
                trap(fn + " needs an f32 operand", e->line);
            for (uint32_t l = 0; l < lanes_; l++) {
                if (!live_[l]) continue;
                if (a.kind == ScalarKind::F32) {
                    float x = as_f32(a.data[l]);
                    float r = fn == "exp" ? std::exp(x)
                              : fn == "sqrt" ? std::sqrt(x)
                              : fn == "inverseSqrt" ? 1.0f / std::sqrt(x)
                              : fn == "abs" ? std::fabs(x)
                              : fn == "floor" ? std::floor(x)
                                              : std::ceil(x);
                    a.data[l] = from_f32(r);
                } else if (a.kind == ScalarKind::I32) {
                    a.data[l] = from_i32(std::abs(as_i32(a.data[l])));
                }
            }
            return a;
        }
        if (fn == "max" || fn == "min" || fn == "pow") {
            size_t mark = sp_;
            Val a = eval(e->args.at(0).get());
            Val b = eval(e->args.at(1).get());
            ScalarKind k = unify(a.kind, b.kind);
            if (fn == "pow") k = ScalarKind::F32;
            coerce(a, k, e->line);
            coerce(b, k, e->line);
            for (uint32_t l = 0; l < lanes_; l++) {
                if (!live_[l]) continue;
                if (k == ScalarKind::F32) {
                    float x = as_f32(a.data[l]), y = as_f32(b.data[l]);
                    a.data[l] = from_f32(fn == "max" ? std::max(x, y)
                                         : fn == "min" ? std::min(x, y)
                                                       : std::pow(x, y));
                } else if (k == ScalarKind::U32 || k == ScalarKind::AbstractInt) {
                    a.data[l] = fn == "max" ? std::max(a.data[l], b.data[l])
                                            : std::min(a.data[l], b.data[l]);
                } else {
                    int32_t x = as_i32(a.data[l]), y = as_i32(b.data[l]);
                    a.data[l] = from_i32(fn == "max" ? std::max(x, y) : std::min(x, y));
                }
            }
            sp_ = mark + 1;
            return a;
        }
        if (fn == "select") {
            size_t mark = sp_;
            Val f = eval(e->args.at(0).get());
            Val t = eval(e->args.at(1).get());
            Val c = eval(e->args.at(2).get());
            if (c.kind != ScalarKind::Bool) trap("select condition must be bool", e->line);
            ScalarKind k = unify(f.kind, t.kind);
            coerce(f, k, e->line);
            coerce(t, k, e->line);
            for (uint32_t l = 0; l < lanes_; l++)
                if (live_[l]) f.data[l] = c.data[l] ? t.data[l] : f.data[l];
            sp_ = mark + 1;
            return f;
        }
        // user helper function
        for (const auto& func : mod_->functions) {
            if (!func.is_entry && func.name == fn) return call_helper(func, e);
        }
        trap("unknown function '" + fn + "'", e->line);
    }

    void convert_value(Val& a, ScalarKind target, int line) {
        if (a.kind == target) return;
        for (uint32_t l = 0; l < lanes_; l++) {
            if (!live_[l]) continue;
            uint32_t w = a.data[l];
            double x;
            switch (a.kind) {
                case ScalarKind::F32: x = as_f32(w); break;
                case ScalarKind::U32:
                case ScalarKind::AbstractInt: x = double(w); break;
                case ScalarKind::I32: x = double(as_i32(w)); break;
                default: trap("cannot convert bool", line);
            }
            switch (target) {
                case ScalarKind::F32: a.data[l] = from_f32(float(x)); break;
                case ScalarKind::U32: a.data[l] = uint32_t(x); break;
                case ScalarKind::I32: a.data[l] = from_i32(int32_t(x)); break;
                default: trap("bad conversion target", line);
            }
        }
        a.kind = target;
    }

    Val call_helper(const Function& func, const Expr* e) {
        if (call_depth_ > 16) trap("call depth limit exceeded", e->line);
        if (e->args.size() != func.value_params.size())
            trap("wrong argument count for '" + func.name + "'", e->line);
        size_t mark = sp_;
        std::vector<Val> args;
        for (const auto& a : e->args) args.push_back(eval(a.get()));

        push_scope();
        for (size_t i = 0; i < args.size(); i++) {
            Val& a = args[i];
            coerce(a, func.value_params[i].second, e->line);
            Local& loc =
                declare_local(func.value_params[i].first, a.kind, false, e->line);
            std::memcpy(locals_slab_.data() + loc.offset, a.data, lanes_ * 4);
        }
        // swap return plumbing
        auto saved_ret = std::move(ret_val_);
        auto saved_kind = ret_kind_;
        auto saved_returned = returned_;
        bool saved_in_helper = in_helper_;
        ret_val_.assign(lanes_, 0);
        ret_kind_ = func.return_kind;
        std::fill(returned_.begin(), returned_.end(), 0);
        in_helper_ = true;
        call_depth_++;

        Mask entry_live = live_;
        exec_stmts(func.body);

        // all lanes that entered must have returned
        for (uint32_t l = 0; l < lanes_; l++)
            if (entry_live[l] && func.has_return_value && !returned_[l])
                trap("helper '" + func.name + "' missing return", e->line);

        call_depth_--;
        in_helper_ = saved_in_helper;
        live_ = std::move(entry_live);
        sp_ = mark;
        Val out = alloc(func.return_kind);
        std::memcpy(out.data, ret_val_.data(), lanes_ * 4);
        ret_val_ = std::move(saved_ret);
        ret_kind_ = saved_kind;
        returned_ = std::move(saved_returned);
        pop_scope();
        return out;
    }

    bool loops_depth_divergent() const { return false; }  // live mask already captures it

    // ---- statements ----

    void exec_stmts(const std::vector<std::unique_ptr<Stmt>>& stmts) {
        for (const auto& s : stmts) {
            if (!any_live()) return;
            exec_stmt(s.get());
        }
    }

    void exec_stmt(const Stmt* s) {
        switch (s->kind) {
            case Stmt::Kind::Let:
            case Stmt::Kind::Var: {
                size_t mark = sp_;
                Val v = eval(s->expr.get());
                Local& loc =
                    declare_local(s->name, v.kind == ScalarKind::AbstractInt ? ScalarKind::I32
                                                                             : v.kind,
                                  s->kind == Stmt::Kind::Var, s->line);
                std::memcpy(locals_slab_.data() + loc.offset, v.data, lanes_ * 4);
                sp_ = mark;
                return;
            }
            case Stmt::Kind::Assign: return exec_assign(s);
            case Stmt::Kind::If: return exec_if(s);
            case Stmt::Kind::For: return exec_loop(s, true);
            case Stmt::Kind::While: return exec_loop(s, false);
            case Stmt::Kind::Return: {
                if (s->expr) {
                    size_t mark = sp_;
                    Val v = eval(s->expr.get());
                    coerce(v, ret_kind_, s->line);
                    for (uint32_t l = 0; l < lanes_; l++)
                        if (live_[l]) ret_val_[l] = v.data[l];
                    sp_ = mark;
                }
                for (uint32_t l = 0; l < lanes_; l++) {
                    if (live_[l]) {
                        returned_[l] = 1;
                        live_[l] = 0;
                    }
                }
                return;
            }
            case Stmt::Kind::Break: {
                if (loops_.empty()) trap("break outside loop", s->line);
                for (uint32_t l = 0; l < lanes_; l++) {
                    if (live_[l]) {
                        loops_.back().broke[l] = 1;
                        live_[l] = 0;
                    }
                }
                return;
            }
            case Stmt::Kind::Continue: {
                if (loops_.empty()) trap("continue outside loop", s->line);
                for (uint32_t l = 0; l < lanes_; l++) {
                    if (live_[l]) {
                        loops_.back().continued[l] = 1;
                        live_[l] = 0;
                    }
                }
                return;
            }
            case Stmt::Kind::ExprStmt: {
                size_t mark = sp_;
                eval(s->expr.get());
                sp_ = mark;
                return;
            }
            case Stmt::Kind::Block: {
                push_scope();
                exec_stmts(s->body);
                pop_scope();
                return;
            }
        }
    }

    void exec_assign(const Stmt* s) {
        size_t mark = sp_;
        Val rhs = eval(s->expr.get());

        const Expr* lv = s->lvalue.get();
        if (lv->kind == Expr::Kind::Ident) {
            Local* loc = find_local(lv->name);
            if (!loc) trap("assignment to unknown variable '" + lv->name + "'", s->line);
            if (!loc->is_mut) trap("assignment to let '" + lv->name + "'", s->line);
            uint32_t* dst = locals_slab_.data() + loc->offset;
            if (s->has_op) {
                Val cur{loc->kind, dst};
                combine_in_place(cur, rhs, s);
            } else {
                coerce(rhs, loc->kind, s->line);
                if (all_live()) {
                    std::memcpy(dst, rhs.data, lanes_ * 4);
                } else {
                    for (uint32_t l = 0; l < lanes_; l++)
                        if (live_[l]) dst[l] = rhs.data[l];
                }
            }
            sp_ = mark;
            return;
        }
        if (lv->kind == Expr::Kind::Index) {
            ArrayRef arr = resolve_array(lv->a.get(), s->line);
            if (!arr.writable)
                trap("write to read-only array '" + std::string(arr.name) + "'", s->line);
            Val idx = eval(lv->b.get());
            if (idx.kind == ScalarKind::AbstractInt) idx.kind = ScalarKind::U32;
            ScalarKind want = arr.kind;
            coerce(rhs, want, s->line);
            const bool everyone = all_live();
            for (uint32_t l = 0; l < lanes_; l++) {
                if (!everyone && !live_[l]) continue;
                uint32_t i = idx.data[l];
                if (i >= arr.len)
                    trap("out-of-bounds write: " + std::string(arr.name) + "[" +
                             std::to_string(i) + "], length " + std::to_string(arr.len),
                         s->line);
                if (s->has_op) {
                    Expr fake;
                    fake.bin_op = s->op;
                    fake.line = s->line;
                    uint32_t cur = arr.data[i];
                    uint32_t r = scalar_op(&fake, want, cur, rhs.data[l]);
                    arr.data[i] = r;
                } else {
                    arr.data[i] = rhs.data[l];
                }
            }
            sp_ = mark;
            return;
        }
        trap("unsupported assignment target", s->line);
    }

    uint32_t scalar_op(const Expr* e, ScalarKind k, uint32_t x, uint32_t y) {
        switch (k) {
            case ScalarKind::F32: {
                float a = as_f32(x), b = as_f32(y);
                switch (e->bin_op) {
                    case BinOp::Add: return from_f32(a + b);
                    case BinOp::Sub: return from_f32(a - b);
                    case BinOp::Mul: return from_f32(a * b);
                    case BinOp::Div: return from_f32(a / b);
                    default: trap("bad compound op", e->line);
                }
            }
            case ScalarKind::U32: {
                switch (e->bin_op) {
                    case BinOp::Add: return x + y;
                    case BinOp::Sub: return x - y;
                    case BinOp::Mul: return x * y;
                    case BinOp::Div:
                        if (!y) trap("integer division by zero", e->line);
                        return x / y;
                    case BinOp::Mod:
                        if (!y) trap("integer modulo by zero", e->line);
                        return x % y;
                    default: trap("bad compound op", e->line);
                }
            }
            default: trap("bad compound op type", e->line);
        }
    }

    void combine_in_place(Val& cur, Val& rhs, const Stmt* s) {
        coerce(rhs, cur.kind, s->line);
        Expr fake;
        fake.bin_op = s->op;
        fake.line = s->line;
        for (uint32_t l = 0; l < lanes_; l++)
            if (live_[l]) cur.data[l] = scalar_op(&fake, cur.kind, cur.data[l], rhs.data[l]);
    }

    void exec_if(const Stmt* s) {
        size_t mark = sp_;
        Val c = eval(s->expr.get());
        if (c.kind != ScalarKind::Bool) trap("if condition must be bool", s->line);
        Mask then_mask(lanes_), else_mask(lanes_);
        for (uint32_t l = 0; l < lanes_; l++) {
            then_mask[l] = live_[l] && c.data[l];
            else_mask[l] = live_[l] && !c.data[l];
        }
        sp_ = mark;

        live_ = std::move(then_mask);
        if (any_live()) {
            push_scope();
            exec_stmts(s->body);
            pop_scope();
        }
        Mask after_then = live_;
        live_ = std::move(else_mask);
        if (!s->else_body.empty() && any_live()) {
            push_scope();
            exec_stmts(s->else_body);
            pop_scope();
        }
        for (uint32_t l = 0; l < lanes_; l++) live_[l] = live_[l] || after_then[l];
    }

    void exec_loop(const Stmt* s, bool is_for) {
        push_scope();
        if (is_for && s->init) exec_stmt(s->init.get());

        loops_.push_back({Mask(lanes_, 0), Mask(lanes_, 0)});
        Mask after(lanes_, 0);
        Mask loop_live = live_;

        size_t iter_guard = 0;
        while (true) {
            if (++iter_guard > 100000000ull) trap("loop iteration guard tripped", s->line);
            live_ = loop_live;
            if (!any_live()) break;
            size_t mark = sp_;
            Val c = eval(s->expr.get());
            if (c.kind != ScalarKind::Bool) trap("loop condition must be bool", s->line);
            for (uint32_t l = 0; l < lanes_; l++) {
                if (live_[l] && !c.data[l]) {
                    after[l] = 1;  // exits normally
                    live_[l] = 0;
                }
            }
            sp_ = mark;
            if (!any_live()) break;

            push_scope();
            exec_stmts(s->body);
            pop_scope();

            // continue lanes rejoin for the update
            auto& lm = loops_.back();
            for (uint32_t l = 0; l < lanes_; l++) {
                if (lm.continued[l]) {
                    live_[l] = 1;
                    lm.continued[l] = 0;
                }
                if (lm.broke[l]) {
                    after[l] = 1;
                    lm.broke[l] = 0;
                }
            }
            if (is_for && s->update) exec_stmt(s->update.get());
            loop_live = live_;
        }
        loops_.pop_back();
        live_ = std::move(after);
        pop_scope();
    }
};

}  // namespace

void execute(const DispatchRequest& req) {
    if (!req.module || !req.entry) raise(Errc::ShaderError, "dispatch without module/entry");
    Exec exec(req);
    exec.run();
}

}  // namespace dispatchlab::wgsl
