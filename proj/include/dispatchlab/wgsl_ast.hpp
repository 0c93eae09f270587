#pragma once

// AST node definitions for the WGSL subset. Split from wgsl.hpp only to keep
// the public surface readable; nothing here is stable API.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dispatchlab::wgsl {

enum class BinOp : uint8_t {
    Add, Sub, Mul, Div, Mod,
    Lt, Le, Gt, Ge, Eq, Ne,
    And, Or,
};

enum class UnOp : uint8_t { Neg, Not };

struct Expr {
    enum class Kind : uint8_t {
        LiteralF32,
        LiteralInt,   // AbstractInt unless u_suffix/i_suffix
        LiteralBool,
        Ident,
        Index,        // base[index]
        Member,       // base.field (vec3 component or uniform struct field)
        Binary,
        Unary,
        Call,
    };
    Kind kind;
    int line = 0;

    float f32_value = 0.0f;
    uint64_t int_value = 0;
    bool u_suffix = false;
    bool i_suffix = false;
    bool bool_value = false;

    std::string name;  // Ident, Member field, Call callee
    BinOp bin_op = BinOp::Add;
    UnOp un_op = UnOp::Neg;

    std::unique_ptr<Expr> a;  // base / lhs / operand
    std::unique_ptr<Expr> b;  // index / rhs
    std::vector<std::unique_ptr<Expr>> args;
};

struct Stmt {
    enum class Kind : uint8_t {
        Let,
        Var,
        Assign,     // lvalue = expr (op_assign for += etc.)
        If,
        For,
        While,
        Return,
        Break,
        Continue,
        ExprStmt,
        Block,
    };
    Kind kind;
    int line = 0;

    std::string name;                 // Let/Var target
    std::unique_ptr<Expr> lvalue;     // Assign
    std::unique_ptr<Expr> expr;       // init / condition / rhs / return value
    bool has_op = false;              // compound assignment
    BinOp op = BinOp::Add;

    std::unique_ptr<Stmt> init;       // For
    std::unique_ptr<Stmt> update;     // For
    std::vector<std::unique_ptr<Stmt>> body;
    std::vector<std::unique_ptr<Stmt>> else_body;
};

}  // namespace dispatchlab::wgsl
