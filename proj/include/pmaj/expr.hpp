#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "pmaj/errors.hpp"

namespace pmaj {

namespace detail {
class ExprParser;
}

/// Scalar coefficient expression in the free variable x.
///
/// Grammar (documented in the README):
///   expr   := term (('+'|'-') term)*
///   term   := unary (('*'|'/') unary)*
///   unary  := ('+'|'-') unary | power
///   power  := atom ('^' unary)?            -- right-associative
///   atom   := number | 'x' | 'pi'
///           | ('sin'|'cos'|'exp'|'abs'|'sqrt') '(' expr ')'
///           | ('min'|'max') '(' expr ',' expr ')'
///           | '(' expr ')'
///
/// A parsed expression is immutable; eval() is pure and safe to call from any
/// number of threads.
class CoeffFn {
public:
    double eval(double x) const {
        if (!std::isfinite(x)) throw DomainError("non-finite evaluation point", x);
        return eval_node(root_, x);
    }

    double operator()(double x) const { return eval(x); }

    /// Fully parenthesized round-trippable form.
    std::string unparse() const { return unparse_node(root_); }

    const std::string& source() const { return source_; }

private:
    enum class Op {
        Const, Var, Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp, Abs, Sqrt, Min, Max,
    };

    struct Node {
        Op op;
        double value = 0.0;  // Const payload
        int a = -1;          // child indices into nodes_
        int b = -1;
    };

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string source_;

    double eval_node(int idx, double x) const {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        switch (n.op) {
            case Op::Const: return n.value;
            case Op::Var: return x;
            case Op::Add: return eval_node(n.a, x) + eval_node(n.b, x);
            case Op::Sub: return eval_node(n.a, x) - eval_node(n.b, x);
            case Op::Mul: return eval_node(n.a, x) * eval_node(n.b, x);
            case Op::Div: {
                const double den = eval_node(n.b, x);
                if (den == 0.0) throw DomainError("division by zero", x);
                return eval_node(n.a, x) / den;
            }
            case Op::Pow: {
                const double base = eval_node(n.a, x);
                const double expo = eval_node(n.b, x);
                const bool integral = std::isfinite(expo) && std::rint(expo) == expo;
                if (base < 0.0 && !integral)
                    throw DomainError("negative base with fractional exponent", x);
                if (base == 0.0 && expo < 0.0) throw DomainError("zero base with negative exponent", x);
                return std::pow(base, expo);
            }
            case Op::Neg: return -eval_node(n.a, x);
            case Op::Sin: return std::sin(eval_node(n.a, x));
            case Op::Cos: return std::cos(eval_node(n.a, x));
            case Op::Exp: return std::exp(eval_node(n.a, x));
            case Op::Abs: return std::abs(eval_node(n.a, x));
            case Op::Sqrt: {
                const double v = eval_node(n.a, x);
                if (v < 0.0) throw DomainError("sqrt of negative value", x);
                return std::sqrt(v);
            }
            case Op::Min: return std::min(eval_node(n.a, x), eval_node(n.b, x));
            case Op::Max: return std::max(eval_node(n.a, x), eval_node(n.b, x));
        }
        return 0.0;  // unreachable
    }

    std::string unparse_node(int idx) const {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        auto bin = [&](const char* sym) {
            return "(" + unparse_node(n.a) + sym + unparse_node(n.b) + ")";
        };
        auto fn1 = [&](const char* name) { return std::string(name) + "(" + unparse_node(n.a) + ")"; };
        switch (n.op) {
            case Op::Const: {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", n.value);
                return std::string(buf);
            }
            case Op::Var: return "x";
            case Op::Add: return bin("+");
            case Op::Sub: return bin("-");
            case Op::Mul: return bin("*");
            case Op::Div: return bin("/");
            case Op::Pow: return bin("^");
            case Op::Neg: return "(-" + unparse_node(n.a) + ")";
            case Op::Sin: return fn1("sin");
            case Op::Cos: return fn1("cos");
            case Op::Exp: return fn1("exp");
            case Op::Abs: return fn1("abs");
            case Op::Sqrt: return fn1("sqrt");
            case Op::Min: return std::string("min(") + unparse_node(n.a) + "," + unparse_node(n.b) + ")";
            case Op::Max: return std::string("max(") + unparse_node(n.a) + "," + unparse_node(n.b) + ")";
        }
        return {};
    }

    friend class detail::ExprParser;
};

namespace detail {

class ExprParser {
public:
    explicit ExprParser(const std::string& text) : text_(text) {}

    CoeffFn parse() {
        CoeffFn fn;
        fn.source_ = text_;
        nodes_ = &fn.nodes_;
        fn.root_ = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw SyntaxError("unexpected trailing input", pos_);
        nodes_ = nullptr;
        return fn;
    }

private:
    using Op = CoeffFn::Op;

    const std::string& text_;
    std::size_t pos_ = 0;
    std::vector<CoeffFn::Node>* nodes_ = nullptr;

    int add(Op op, double value = 0.0, int a = -1, int b = -1) {
        nodes_->push_back({op, value, a, b});
        return static_cast<int>(nodes_->size()) - 1;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (consume('+')) lhs = add(Op::Add, 0.0, lhs, parse_term());
            else if (consume('-')) lhs = add(Op::Sub, 0.0, lhs, parse_term());
            else return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            if (consume('*')) lhs = add(Op::Mul, 0.0, lhs, parse_unary());
            else if (consume('/')) lhs = add(Op::Div, 0.0, lhs, parse_unary());
            else return lhs;
        }
    }

    int parse_unary() {
        if (consume('-')) return add(Op::Neg, 0.0, parse_unary());
        if (consume('+')) return parse_unary();
        return parse_power();
    }

    int parse_power() {
        int base = parse_atom();
        if (consume('^')) return add(Op::Pow, 0.0, base, parse_unary());
        return base;
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        const char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            int inner = parse_expr();
            if (!consume(')')) throw SyntaxError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw SyntaxError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        if (!std::isfinite(v)) throw SyntaxError("number literal out of range", pos_);
        return add(Op::Const, v);
    }

    int parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);

        if (name == "x") return add(Op::Var);
        if (name == "pi") return add(Op::Const, 3.14159265358979323846);

        Op op;
        bool two_args = false;
        if (name == "sin") op = Op::Sin;
        else if (name == "cos") op = Op::Cos;
        else if (name == "exp") op = Op::Exp;
        else if (name == "abs") op = Op::Abs;
        else if (name == "sqrt") op = Op::Sqrt;
        else if (name == "min") { op = Op::Min; two_args = true; }
        else if (name == "max") { op = Op::Max; two_args = true; }
        else throw UnknownIdentifier(name, start);

        if (!consume('(')) throw SyntaxError("expected '(' after function name", pos_);
        int a = parse_expr();
        int b = -1;
        if (two_args) {
            if (!consume(',')) throw SyntaxError("expected ',' in two-argument function", pos_);
            b = parse_expr();
        }
        if (!consume(')')) throw SyntaxError("expected ')'", pos_);
        return add(op, 0.0, a, b);
    }
};

}  // namespace detail

inline CoeffFn parse_coeff(const std::string& text) { return detail::ExprParser(text).parse(); }

inline double eval_coeff(const CoeffFn& f, double x) { return f.eval(x); }

}  // namespace pmaj
