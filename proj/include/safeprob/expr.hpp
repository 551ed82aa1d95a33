#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safeprob/errors.hpp"

namespace safeprob {

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position) : Error(what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Names an expression may refer to. Variables are bound positionally at
/// evaluation time; constants are folded in at parse time.
struct SymbolTable {
    std::vector<std::string> variables;
    std::map<std::string, double, std::less<>> constants;
};

/// Arithmetic expression over + - * / ^, unary minus, parentheses and the
/// functions sin cos tan exp log sqrt abs tanh min max norm.
/// `^` is right-associative and binds tighter than unary minus (-x^2 = -(x^2)).
class Expression {
public:
    Expression() = default;

    /// Throws ParseError with the offending character offset.
    static Expression parse(std::string_view text, const SymbolTable& symbols);

    double eval(std::span<const double> variables) const;
    const std::string& text() const noexcept { return text_; }
    bool uses_variables() const noexcept;

private:
    enum class Op : unsigned char {
        constant, variable, add, sub, mul, div, pow, neg,
        sin, cos, tan, exp, log, sqrt, abs, tanh, min, max, norm
    };
    struct Instr {
        Op op;
        int arg = 0;        // variable index or argument count
        double value = 0.0;
    };

    friend class ExprParser;
    std::string text_;
    std::vector<Instr> program_;  // postfix
    int max_stack_ = 0;
};

/// x1..xn as positional variables.
SymbolTable state_symbols(int n, std::map<std::string, double, std::less<>> params = {});

}  // namespace safeprob
