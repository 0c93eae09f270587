#include <functional>
#include <map>
#include <optional>

#include "dispatchlab/error.hpp"
#include "dispatchlab/wgsl.hpp"
#include "dispatchlab/wgsl_ast.hpp"
#include "wgsl_lexer.hpp"

namespace dispatchlab::wgsl {

namespace {

struct TypeRef {
    bool is_vec3 = false;
    bool is_array = false;
    ScalarKind scalar = ScalarKind::F32;
    uint32_t array_len = 0;  // 0 = runtime-sized
    int struct_index = -1;
};

class Parser {
public:
    Parser(std::string_view src, std::string label)
        : label_(std::move(label)), toks_(lex(src, label_)) {}

    std::shared_ptr<Module> run() {
        auto mod = std::make_shared<Module>();
        mod->label = label_;
        mod_ = mod.get();
        while (!at_end()) {
            if (peek_ident("struct")) {
                parse_struct();
            } else if (peek_ident("const")) {
                parse_const();
            } else {
                auto attrs = parse_attrs();
                if (peek_ident("var")) {
                    parse_global_var(attrs);
                } else if (peek_ident("fn")) {
                    parse_fn(attrs);
                } else {
                    fail("expected struct/const/var/fn at top level");
                }
            }
        }
        for (auto& f : mod->functions)
            if (f.is_entry) collect_bindings(f);
        return mod;
    }

private:
    struct Attr {
        std::string name;
        std::vector<uint64_t> int_args;
        std::string ident_arg;
    };

    std::string label_;
    std::vector<Token> toks_;
    size_t pos_ = 0;
    Module* mod_ = nullptr;
    std::map<std::string, uint64_t> consts_;

    [[noreturn]] void fail(const std::string& msg) {
        raise(Errc::ShaderError,
              label_ + ":" + std::to_string(cur().line) + ": " + msg +
                  (cur().kind == Tok::End ? " (at end of input)"
                                          : " (at '" + std::string(cur().text) + "')"));
    }

    const Token& cur() const { return toks_[pos_]; }
    bool at_end() const { return cur().kind == Tok::End; }
    bool peek_ident(std::string_view s) const {
        return cur().kind == Tok::Ident && cur().text == s;
    }
    bool peek_punct(std::string_view s) const {
        return cur().kind == Tok::Punct && cur().text == s;
    }
    void advance() { pos_++; }
    bool accept_punct(std::string_view s) {
        if (peek_punct(s)) {
            advance();
            return true;
        }
        return false;
    }
    void expect_punct(std::string_view s) {
        if (!accept_punct(s)) fail("expected '" + std::string(s) + "'");
    }
    bool accept_ident(std::string_view s) {
        if (peek_ident(s)) {
            advance();
            return true;
        }
        return false;
    }
    std::string expect_ident() {
        if (cur().kind != Tok::Ident) fail("expected identifier");
        std::string s(cur().text);
        advance();
        return s;
    }

    uint64_t const_expr() {
        // literal or previously declared const, with + - * / composition
        uint64_t v = const_primary();
        while (cur().kind == Tok::Punct &&
               (cur().text == "+" || cur().text == "-" || cur().text == "*" ||
                cur().text == "/")) {
            std::string op(cur().text);
            advance();
            uint64_t r = const_primary();
            if (op == "+") v += r;
            else if (op == "-") v -= r;
            else if (op == "*") v *= r;
            else v /= r;
        }
        return v;
    }
    uint64_t const_primary() {
        if (cur().kind == Tok::IntLit) {
            uint64_t v = cur().int_value;
            advance();
            return v;
        }
        if (cur().kind == Tok::Ident) {
            auto it = consts_.find(std::string(cur().text));
            if (it == consts_.end()) fail("unknown constant in const expression");
            advance();
            return it->second;
        }
        fail("expected constant expression");
    }

    std::vector<Attr> parse_attrs() {
        std::vector<Attr> attrs;
        while (accept_punct("@")) {
            Attr a;
            a.name = expect_ident();
            if (accept_punct("(")) {
                while (!peek_punct(")")) {
                    if (cur().kind == Tok::Ident) {
                        a.ident_arg = std::string(cur().text);
                        advance();
                    } else {
                        a.int_args.push_back(const_expr());
                    }
                    if (!accept_punct(",")) break;
                }
                expect_punct(")");
            }
            attrs.push_back(std::move(a));
        }
        return attrs;
    }

    ScalarKind scalar_kind(const std::string& name) {
        if (name == "f32") return ScalarKind::F32;
        if (name == "u32") return ScalarKind::U32;
        if (name == "i32") return ScalarKind::I32;
        if (name == "bool") return ScalarKind::Bool;
        fail("unsupported scalar type '" + name + "'");
    }

    TypeRef parse_type() {
        TypeRef t;
        std::string name = expect_ident();
        if (name == "vec3") {
            expect_punct("<");
            scalar_kind(expect_ident());  // component type, always u32 here
            expect_punct(">");
            t.is_vec3 = true;
            t.scalar = ScalarKind::U32;
            return t;
        }
        if (name == "array") {
            expect_punct("<");
            t.scalar = scalar_kind(expect_ident());
            t.is_array = true;
            if (accept_punct(",")) t.array_len = static_cast<uint32_t>(const_expr());
            expect_punct(">");
            return t;
        }
        if (name == "f32" || name == "u32" || name == "i32" || name == "bool") {
            t.scalar = scalar_kind(name);
            return t;
        }
        for (size_t i = 0; i < mod_->structs.size(); i++) {
            if (mod_->structs[i].name == name) {
                t.struct_index = static_cast<int>(i);
                return t;
            }
        }
        fail("unknown type '" + name + "'");
    }

    void parse_struct() {
        accept_ident("struct");
        StructDecl s;
        s.name = expect_ident();
        expect_punct("{");
        uint32_t offset = 0;
        while (!peek_punct("}")) {
            StructField f;
            f.name = expect_ident();
            expect_punct(":");
            TypeRef t = parse_type();
            if (t.is_array || t.is_vec3 || t.struct_index >= 0)
                fail("struct fields must be scalars");
            f.kind = t.scalar;
            f.offset_bytes = offset;
            offset += 4;
            s.fields.push_back(std::move(f));
            if (!accept_punct(",")) break;
        }
        expect_punct("}");
        s.size_bytes = offset;
        mod_->structs.push_back(std::move(s));
    }

    void parse_const() {
        accept_ident("const");
        ConstDecl c;
        c.name = expect_ident();
        bool annotated = false;
        if (accept_punct(":")) {
            TypeRef t = parse_type();
            c.kind = t.scalar;
            annotated = true;
        }
        expect_punct("=");
        bool u_suffix = cur().kind == Tok::IntLit && cur().u_suffix;
        c.value = const_expr();
        if (!annotated) c.kind = u_suffix ? ScalarKind::U32 : ScalarKind::AbstractInt;
        expect_punct(";");
        consts_[c.name] = c.value;
        mod_->consts.push_back(std::move(c));
    }

    void parse_global_var(const std::vector<Attr>& attrs) {
        accept_ident("var");
        GlobalVar g;
        if (accept_punct("<")) {
            std::string space = expect_ident();
            if (space == "uniform") {
                g.space = AddressSpace::Uniform;
            } else if (space == "workgroup") {
                g.space = AddressSpace::Workgroup;
            } else if (space == "storage") {
                g.space = AddressSpace::StorageRead;
                if (accept_punct(",")) {
                    std::string access = expect_ident();
                    if (access == "read_write")
                        g.space = AddressSpace::StorageReadWrite;
                    else if (access != "read")
                        fail("unsupported storage access '" + access + "'");
                }
            } else {
                fail("unsupported address space '" + space + "'");
            }
            expect_punct(">");
        } else {
            fail("module-scope var requires an address space");
        }
        g.name = expect_ident();
        expect_punct(":");
        TypeRef t = parse_type();
        g.is_array = t.is_array;
        g.elem = t.scalar;
        g.array_len = t.array_len;
        g.struct_index = t.struct_index;
        if (g.space == AddressSpace::Uniform && g.struct_index < 0)
            fail("uniform vars must have struct type");
        if (g.space != AddressSpace::Uniform && !g.is_array)
            fail("storage/workgroup vars must be arrays");
        if (g.space == AddressSpace::Workgroup && g.array_len == 0)
            fail("workgroup arrays must have a fixed size");
        expect_punct(";");
        for (const auto& a : attrs) {
            if (a.name == "group") g.group = static_cast<uint32_t>(a.int_args.at(0));
            if (a.name == "binding") {
                g.binding = static_cast<uint32_t>(a.int_args.at(0));
                g.has_binding = true;
            }
        }
        if (g.space != AddressSpace::Workgroup && !g.has_binding)
            fail("buffer vars need @binding");
        mod_->globals.push_back(std::move(g));
    }

    void parse_fn(const std::vector<Attr>& attrs) {
        accept_ident("fn");
        Function f;
        f.name = expect_ident();
        for (const auto& a : attrs) {
            if (a.name == "compute") f.is_entry = true;
            if (a.name == "workgroup_size") {
                for (size_t i = 0; i < a.int_args.size() && i < 3; i++)
                    f.workgroup_size[i] = static_cast<uint32_t>(a.int_args[i]);
            }
        }
        expect_punct("(");
        while (!peek_punct(")")) {
            auto pattrs = parse_attrs();
            Param p;
            p.name = expect_ident();
            expect_punct(":");
            TypeRef t = parse_type();
            p.is_vec3 = t.is_vec3;
            for (const auto& a : pattrs)
                if (a.name == "builtin") p.builtin = a.ident_arg;
            if (f.is_entry) {
                if (p.builtin.empty()) fail("entry-point params must be builtins");
                f.params.push_back(std::move(p));
            } else {
                if (t.is_vec3 || t.is_array) fail("helper fn params must be scalars");
                f.value_params.emplace_back(p.name, t.scalar);
            }
            if (!accept_punct(",")) break;
        }
        expect_punct(")");
        if (accept_punct("->")) {
            TypeRef t = parse_type();
            if (t.is_vec3 || t.is_array) fail("helper fn return must be scalar");
            f.has_return_value = true;
            f.return_kind = t.scalar;
        }
        f.body = parse_block();
        mod_->functions.push_back(std::move(f));
    }

    std::vector<std::unique_ptr<Stmt>> parse_block() {
        expect_punct("{");
        std::vector<std::unique_ptr<Stmt>> stmts;
        while (!peek_punct("}")) stmts.push_back(parse_stmt());
        expect_punct("}");
        return stmts;
    }

    std::unique_ptr<Stmt> make_stmt(Stmt::Kind k) {
        auto s = std::make_unique<Stmt>();
        s->kind = k;
        s->line = cur().line;
        return s;
    }

    std::unique_ptr<Stmt> parse_stmt() {
        if (peek_ident("let") || peek_ident("var")) {
            bool is_let = peek_ident("let");
            advance();
            auto s = make_stmt(is_let ? Stmt::Kind::Let : Stmt::Kind::Var);
            s->name = expect_ident();
            if (accept_punct(":")) parse_type();  // optional annotation, inferred anyway
            expect_punct("=");
            s->expr = parse_expr();
            expect_punct(";");
            return s;
        }
        if (peek_ident("if")) {
            advance();
            auto s = make_stmt(Stmt::Kind::If);
            expect_punct("(");
            s->expr = parse_expr();
            expect_punct(")");
            s->body = parse_block();
            if (accept_ident("else")) {
                if (peek_ident("if")) {
                    s->else_body.push_back(parse_stmt());
                } else {
                    s->else_body = parse_block();
                }
            }
            return s;
        }
        if (peek_ident("for")) {
            advance();
            auto s = make_stmt(Stmt::Kind::For);
            expect_punct("(");
            if (!accept_punct(";")) {
                s->init = parse_stmt();  // consumes its own ';'
            }
            s->expr = parse_expr();
            expect_punct(";");
            if (!peek_punct(")")) s->update = parse_simple_stmt_no_semi();
            expect_punct(")");
            s->body = parse_block();
            return s;
        }
        if (peek_ident("while")) {
            advance();
            auto s = make_stmt(Stmt::Kind::While);
            expect_punct("(");
            s->expr = parse_expr();
            expect_punct(")");
            s->body = parse_block();
            return s;
        }
        if (peek_ident("return")) {
            advance();
            auto s = make_stmt(Stmt::Kind::Return);
            if (!peek_punct(";")) s->expr = parse_expr();
            expect_punct(";");
            return s;
        }
        if (peek_ident("break")) {
            advance();
            auto s = make_stmt(Stmt::Kind::Break);
            expect_punct(";");
            return s;
        }
        if (peek_ident("continue")) {
            advance();
            auto s = make_stmt(Stmt::Kind::Continue);
            expect_punct(";");
            return s;
        }
        if (peek_punct("{")) {
            auto s = make_stmt(Stmt::Kind::Block);
            s->body = parse_block();
            return s;
        }
        auto s = parse_simple_stmt_no_semi();
        expect_punct(";");
        return s;
    }

    // assignment or call, without the trailing semicolon (for-loop update)
    std::unique_ptr<Stmt> parse_simple_stmt_no_semi() {
        auto lhs = parse_expr();
        if (peek_punct("=") || peek_punct("+=") || peek_punct("-=") || peek_punct("*=") ||
            peek_punct("/=") || peek_punct("%=")) {
            auto s = make_stmt(Stmt::Kind::Assign);
            std::string op(cur().text);
            advance();
            if (op != "=") {
                s->has_op = true;
                s->op = op == "+=" ? BinOp::Add
                        : op == "-=" ? BinOp::Sub
                        : op == "*=" ? BinOp::Mul
                        : op == "/=" ? BinOp::Div
                                     : BinOp::Mod;
            }
            s->lvalue = std::move(lhs);
            s->expr = parse_expr();
            return s;
        }
        if (lhs->kind != Expr::Kind::Call) fail("expected assignment or call statement");
        auto s = make_stmt(Stmt::Kind::ExprStmt);
        s->expr = std::move(lhs);
        return s;
    }

    std::unique_ptr<Expr> make_expr(Expr::Kind k) {
        auto e = std::make_unique<Expr>();
        e->kind = k;
        e->line = cur().line;
        return e;
    }

    std::unique_ptr<Expr> parse_expr() { return parse_or(); }

    std::unique_ptr<Expr> parse_or() {
        auto lhs = parse_and();
        while (peek_punct("||")) {
            auto e = make_expr(Expr::Kind::Binary);
            advance();
            e->bin_op = BinOp::Or;
            e->a = std::move(lhs);
            e->b = parse_and();
            lhs = std::move(e);
        }
        return lhs;
    }
    std::unique_ptr<Expr> parse_and() {
        auto lhs = parse_cmp();
        while (peek_punct("&&")) {
            auto e = make_expr(Expr::Kind::Binary);
            advance();
            e->bin_op = BinOp::And;
            e->a = std::move(lhs);
            e->b = parse_cmp();
            lhs = std::move(e);
        }
        return lhs;
    }
    std::unique_ptr<Expr> parse_cmp() {
        auto lhs = parse_add();
        while (peek_punct("<") || peek_punct("<=") || peek_punct(">") || peek_punct(">=") ||
               peek_punct("==") || peek_punct("!=")) {
            auto e = make_expr(Expr::Kind::Binary);
            std::string op(cur().text);
            advance();
            e->bin_op = op == "<" ? BinOp::Lt
                        : op == "<=" ? BinOp::Le
                        : op == ">" ? BinOp::Gt
                        : op == ">=" ? BinOp::Ge
                        : op == "==" ? BinOp::Eq
                                     : BinOp::Ne;
            e->a = std::move(lhs);
            e->b = parse_add();
            lhs = std::move(e);
        }
        return lhs;
    }
    std::unique_ptr<Expr> parse_add() {
        auto lhs = parse_mul();
        while (peek_punct("+") || peek_punct("-")) {
            auto e = make_expr(Expr::Kind::Binary);
            e->bin_op = peek_punct("+") ? BinOp::Add : BinOp::Sub;
            advance();
            e->a = std::move(lhs);
            e->b = parse_mul();
            lhs = std::move(e);
        }
        return lhs;
    }
    std::unique_ptr<Expr> parse_mul() {
        auto lhs = parse_unary();
        while (peek_punct("*") || peek_punct("/") || peek_punct("%")) {
            auto e = make_expr(Expr::Kind::Binary);
            e->bin_op = peek_punct("*") ? BinOp::Mul : peek_punct("/") ? BinOp::Div : BinOp::Mod;
            advance();
            e->a = std::move(lhs);
            e->b = parse_unary();
            lhs = std::move(e);
        }
        return lhs;
    }
    std::unique_ptr<Expr> parse_unary() {
        if (peek_punct("-") || peek_punct("!")) {
            auto e = make_expr(Expr::Kind::Unary);
            e->un_op = peek_punct("-") ? UnOp::Neg : UnOp::Not;
            advance();
            e->a = parse_unary();
            return e;
        }
        return parse_postfix();
    }
    std::unique_ptr<Expr> parse_postfix() {
        auto e = parse_primary();
        while (true) {
            if (accept_punct("[")) {
                auto idx = make_expr(Expr::Kind::Index);
                idx->a = std::move(e);
                idx->b = parse_expr();
                expect_punct("]");
                e = std::move(idx);
            } else if (accept_punct(".")) {
                auto m = make_expr(Expr::Kind::Member);
                m->a = std::move(e);
                m->name = expect_ident();
                e = std::move(m);
            } else {
                break;
            }
        }
        return e;
    }
    std::unique_ptr<Expr> parse_primary() {
        if (cur().kind == Tok::FloatLit) {
            auto e = make_expr(Expr::Kind::LiteralF32);
            e->f32_value = cur().f32_value;
            advance();
            return e;
        }
        if (cur().kind == Tok::IntLit) {
            auto e = make_expr(Expr::Kind::LiteralInt);
            e->int_value = cur().int_value;
            e->u_suffix = cur().u_suffix;
            e->i_suffix = cur().i_suffix;
            advance();
            return e;
        }
        if (peek_ident("true") || peek_ident("false")) {
            auto e = make_expr(Expr::Kind::LiteralBool);
            e->bool_value = peek_ident("true");
            advance();
            return e;
        }
        if (accept_punct("(")) {
            auto e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (cur().kind == Tok::Ident) {
            std::string name = expect_ident();
            if (accept_punct("(")) {
                auto e = make_expr(Expr::Kind::Call);
                e->name = name;
                while (!peek_punct(")")) {
                    e->args.push_back(parse_expr());
                    if (!accept_punct(",")) break;
                }
                expect_punct(")");
                return e;
            }
            auto e = make_expr(Expr::Kind::Ident);
            e->name = name;
            return e;
        }
        fail("expected expression");
    }

    void collect_expr(const Expr* e, Function& f) {
        if (!e) return;
        if (e->kind == Expr::Kind::Ident) {
            if (const GlobalVar* g = mod_->find_global(e->name)) {
                if (g->space != AddressSpace::Workgroup) {
                    bool seen = false;
                    for (uint32_t b : f.used_bindings) seen |= (b == g->binding);
                    if (!seen) f.used_bindings.push_back(g->binding);
                }
            }
        }
        collect_expr(e->a.get(), f);
        collect_expr(e->b.get(), f);
        for (const auto& a : e->args) collect_expr(a.get(), f);
    }
    void collect_stmt(const Stmt* s, Function& f) {
        if (!s) return;
        collect_expr(s->lvalue.get(), f);
        collect_expr(s->expr.get(), f);
        collect_stmt(s->init.get(), f);
        collect_stmt(s->update.get(), f);
        for (const auto& c : s->body) collect_stmt(c.get(), f);
        for (const auto& c : s->else_body) collect_stmt(c.get(), f);
    }
    void collect_bindings(Function& f) {
        for (const auto& s : f.body) collect_stmt(s.get(), f);
        // helper functions may also touch globals
        for (const auto& fn : mod_->functions) {
            if (fn.is_entry) continue;
            for (const auto& s : fn.body) collect_stmt(s.get(), f);
        }
    }
};

}  // namespace

const Function* Module::find_entry(std::string_view name) const {
    for (const auto& f : functions)
        if (f.is_entry && f.name == name) return &f;
    return nullptr;
}

const GlobalVar* Module::find_global(std::string_view name) const {
    for (const auto& g : globals)
        if (g.name == name) return &g;
    return nullptr;
}

std::shared_ptr<const Module> parse(std::string_view source, std::string label) {
    Parser p(source, std::move(label));
    return p.run();
}

}  // namespace dispatchlab::wgsl
