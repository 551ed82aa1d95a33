#include "safeprob/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace safeprob {

namespace {

constexpr int kMaxStack = 64;

struct FunctionInfo {
    std::string_view name;
    int min_args;
    int max_args;  // -1 = variadic
};

}  // namespace

class ExprParser {
public:
    ExprParser(std::string_view text, const SymbolTable& symbols) : s_(text), symbols_(symbols) {}

    Expression run() {
        Expression e;
        e.text_ = std::string(s_);
        out_ = &e.program_;
        expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        if (out_->empty()) fail("empty expression");
        e.max_stack_ = max_depth_;
        return e;
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression '" + std::string(s_) + "': " + msg + " at offset " +
                             std::to_string(pos_),
                         pos_);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void emit(Op op, int arg = 0, double value = 0.0) {
        out_->push_back({op, arg, value});
        switch (op) {
        case Op::constant:
        case Op::variable: ++depth_; break;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div:
        case Op::pow: --depth_; break;
        case Op::min:
        case Op::max:
        case Op::norm: depth_ -= arg - 1; break;
        default: break;
        }
        max_depth_ = std::max(max_depth_, depth_);
        if (max_depth_ > kMaxStack) fail("expression nests too deeply");
    }

    void expr() {
        term();
        for (;;) {
            if (accept('+')) {
                term();
                emit(Op::add);
            } else if (accept('-')) {
                term();
                emit(Op::sub);
            } else {
                return;
            }
        }
    }

    void term() {
        unary();
        for (;;) {
            if (accept('*')) {
                unary();
                emit(Op::mul);
            } else if (accept('/')) {
                unary();
                emit(Op::div);
            } else {
                return;
            }
        }
    }

    void unary() {
        if (accept('-')) {
            unary();
            emit(Op::neg);
        } else if (accept('+')) {
            unary();
        } else {
            power();
        }
    }

    void power() {
        primary();
        if (accept('^')) {
            unary();
            emit(Op::pow);
        }
    }

    void primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (accept('(')) {
            expr();
            if (!accept(')')) fail("expected ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            identifier();
            return;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    void number() {
        const char* first = s_.data() + pos_;
        const char* last = s_.data() + s_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc()) fail("malformed number");
        pos_ += static_cast<std::size_t>(ptr - first);
        emit(Op::constant, 0, v);
    }

    void identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = s_.substr(start, pos_ - start);
        if (accept('(')) {
            call(name, start);
            return;
        }
        const auto& vars = symbols_.variables;
        if (auto it = std::find(vars.begin(), vars.end(), name); it != vars.end()) {
            emit(Op::variable, static_cast<int>(it - vars.begin()));
            return;
        }
        if (auto it = symbols_.constants.find(name); it != symbols_.constants.end()) {
            emit(Op::constant, 0, it->second);
            return;
        }
        if (name == "pi") {
            emit(Op::constant, 0, std::numbers::pi);
            return;
        }
        pos_ = start;
        fail("unknown symbol '" + std::string(name) + "'");
    }

    void call(std::string_view name, std::size_t start) {
        static constexpr std::array<std::pair<FunctionInfo, Op>, 11> table{{
            {{"sin", 1, 1}, Op::sin},
            {{"cos", 1, 1}, Op::cos},
            {{"tan", 1, 1}, Op::tan},
            {{"exp", 1, 1}, Op::exp},
            {{"log", 1, 1}, Op::log},
            {{"sqrt", 1, 1}, Op::sqrt},
            {{"abs", 1, 1}, Op::abs},
            {{"tanh", 1, 1}, Op::tanh},
            {{"min", 2, -1}, Op::min},
            {{"max", 2, -1}, Op::max},
            {{"norm", 1, -1}, Op::norm},
        }};
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const auto& e) { return e.first.name == name; });
        if (it == table.end()) {
            pos_ = start;
            fail("unknown function '" + std::string(name) + "'");
        }
        int args = 0;
        if (!accept(')')) {
            do {
                expr();
                ++args;
            } while (accept(','));
            if (!accept(')')) fail("expected ')' after arguments");
        }
        const FunctionInfo& info = it->first;
        if (args < info.min_args || (info.max_args >= 0 && args > info.max_args)) {
            pos_ = start;
            fail("wrong number of arguments to '" + std::string(name) + "'");
        }
        emit(it->second, args);
    }

    std::string_view s_;
    const SymbolTable& symbols_;
    std::size_t pos_ = 0;
    std::vector<Expression::Instr>* out_ = nullptr;
    int depth_ = 0;
    int max_depth_ = 0;
};

Expression Expression::parse(std::string_view text, const SymbolTable& symbols) {
    return ExprParser(text, symbols).run();
}

bool Expression::uses_variables() const noexcept {
    return std::any_of(program_.begin(), program_.end(),
                       [](const Instr& i) { return i.op == Op::variable; });
}

double Expression::eval(std::span<const double> variables) const {
    std::array<double, kMaxStack> st;
    int top = 0;
    for (const Instr& in : program_) {
        switch (in.op) {
        case Op::constant: st[top++] = in.value; break;
        case Op::variable:
            if (static_cast<std::size_t>(in.arg) >= variables.size()) {
                throw ShapeError("expression '" + text_ + "' needs " + std::to_string(in.arg + 1) +
                                 " variables, got " + std::to_string(variables.size()));
            }
            st[top++] = variables[in.arg];
            break;
        case Op::add: --top; st[top - 1] += st[top]; break;
        case Op::sub: --top; st[top - 1] -= st[top]; break;
        case Op::mul: --top; st[top - 1] *= st[top]; break;
        case Op::div: --top; st[top - 1] /= st[top]; break;
        case Op::pow: --top; st[top - 1] = std::pow(st[top - 1], st[top]); break;
        case Op::neg: st[top - 1] = -st[top - 1]; break;
        case Op::sin: st[top - 1] = std::sin(st[top - 1]); break;
        case Op::cos: st[top - 1] = std::cos(st[top - 1]); break;
        case Op::tan: st[top - 1] = std::tan(st[top - 1]); break;
        case Op::exp: st[top - 1] = std::exp(st[top - 1]); break;
        case Op::log: st[top - 1] = std::log(st[top - 1]); break;
        case Op::sqrt: st[top - 1] = std::sqrt(st[top - 1]); break;
        case Op::abs: st[top - 1] = std::abs(st[top - 1]); break;
        case Op::tanh: st[top - 1] = std::tanh(st[top - 1]); break;
        case Op::min:
        case Op::max:
        case Op::norm: {
            const int first = top - in.arg;
            double acc = in.op == Op::norm ? 0.0 : st[first];
            for (int i = first; i < top; ++i) {
                if (in.op == Op::min) acc = std::min(acc, st[i]);
                else if (in.op == Op::max) acc = std::max(acc, st[i]);
                else acc += st[i] * st[i];
            }
            top = first;
            st[top++] = in.op == Op::norm ? std::sqrt(acc) : acc;
            break;
        }
        }
    }
    return st[0];
}

SymbolTable state_symbols(int n, std::map<std::string, double, std::less<>> params) {
    SymbolTable t;
    for (int i = 1; i <= n; ++i) t.variables.push_back("x" + std::to_string(i));
    t.constants = std::move(params);
    return t;
}

}  // namespace safeprob
