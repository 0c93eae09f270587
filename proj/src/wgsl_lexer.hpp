#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dispatchlab::wgsl {

enum class Tok : uint8_t {
    Ident,
    IntLit,
    FloatLit,
    Punct,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string_view text;
    int line = 1;
    uint64_t int_value = 0;
    bool u_suffix = false;
    bool i_suffix = false;
    float f32_value = 0.0f;
};

// Tokenizes WGSL source; throws Error(Errc::ShaderError) on malformed input.
std::vector<Token> lex(std::string_view source, const std::string& label);

}  // namespace dispatchlab::wgsl
