#include "wgsl_lexer.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "dispatchlab/error.hpp"

namespace dispatchlab::wgsl {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> lex(std::string_view src, const std::string& label) {
    std::vector<Token> out;
    size_t i = 0;
    int line = 1;
    auto fail = [&](const std::string& msg) {
        raise(Errc::ShaderError, label + ":" + std::to_string(line) + ": " + msg);
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            line++;
            i++;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            i++;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') i++;
            continue;
        }
        if (ident_start(c)) {
            size_t start = i;
            while (i < src.size() && ident_char(src[i])) i++;
            out.push_back({Tok::Ident, src.substr(start, i - start), line});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = i;
            bool is_float = false;
            while (i < src.size() &&
                   (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.')) {
                if (src[i] == '.') is_float = true;
                i++;
            }
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
                is_float = true;
                i++;
                if (i < src.size() && (src[i] == '+' || src[i] == '-')) i++;
                while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) i++;
            }
            Token t;
            t.line = line;
            t.text = src.substr(start, i - start);
            if (i < src.size() && src[i] == 'f') {
                is_float = true;
                i++;
            }
            if (is_float) {
                t.kind = Tok::FloatLit;
                t.f32_value = std::strtof(std::string(t.text).c_str(), nullptr);
            } else {
                t.kind = Tok::IntLit;
                uint64_t v = 0;
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
                if (ec != std::errc()) fail("bad integer literal '" + std::string(t.text) + "'");
                t.int_value = v;
                if (i < src.size() && src[i] == 'u') {
                    t.u_suffix = true;
                    i++;
                } else if (i < src.size() && src[i] == 'i') {
                    t.i_suffix = true;
                    i++;
                }
            }
            out.push_back(t);
            continue;
        }
        // multi-char punctuation first
        static const std::string_view two_char[] = {"<=", ">=", "==", "!=", "&&", "||",
                                                    "+=", "-=", "*=", "/=", "->", "%="};
        bool matched = false;
        for (auto tc : two_char) {
            if (src.compare(i, 2, tc) == 0) {
                out.push_back({Tok::Punct, src.substr(i, 2), line});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        static const std::string_view singles = "@(){}[]<>,:;=+-*/%.!&|^";
        if (singles.find(c) != std::string_view::npos) {
            out.push_back({Tok::Punct, src.substr(i, 1), line});
            i++;
            continue;
        }
        fail(std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, {}, line});
    return out;
}

}  // namespace dispatchlab::wgsl
