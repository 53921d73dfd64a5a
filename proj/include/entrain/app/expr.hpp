#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "entrain/error.hpp"

namespace entrain::app {

/// Closed-form expression in t and x1..xn built from numbers, pi, + - * / ^
/// and sin, cos, exp. Parsed once, evaluated many times.
class Expression {
public:
    Expression() = default;

    static Expression parse(const std::string& text, std::size_t dimension) {
        Parser p{text, 0, dimension};
        Expression e;
        e.text_ = text;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        return e;
    }

    double operator()(double t, std::span<const double> x = {}) const { return eval(*root_, t, x); }
    const std::string& text() const noexcept { return text_; }

private:
    enum class Op { Num, T, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

    struct Node {
        Op op;
        double value = 0.0;
        std::size_t index = 0;
        std::shared_ptr<const Node> a, b;
    };
    using Ptr = std::shared_ptr<const Node>;

    static double eval(const Node& n, double t, std::span<const double> x) {
        switch (n.op) {
            case Op::Num: return n.value;
            case Op::T: return t;
            case Op::Var:
                if (n.index >= x.size()) throw Error(ErrorKind::Evaluation, "expression refers to a missing state entry");
                return x[n.index];
            case Op::Add: return eval(*n.a, t, x) + eval(*n.b, t, x);
            case Op::Sub: return eval(*n.a, t, x) - eval(*n.b, t, x);
            case Op::Mul: return eval(*n.a, t, x) * eval(*n.b, t, x);
            case Op::Div: return eval(*n.a, t, x) / eval(*n.b, t, x);
            case Op::Pow: {
                const double e = eval(*n.b, t, x);
                const double b = eval(*n.a, t, x);
                if (e == std::round(e) && std::abs(e) <= 16) {
                    double r = 1.0;
                    for (int i = 0; i < static_cast<int>(std::abs(e)); ++i) r *= b;
                    return e < 0 ? 1.0 / r : r;
                }
                return std::pow(b, e);
            }
            case Op::Neg: return -eval(*n.a, t, x);
            case Op::Sin: return std::sin(eval(*n.a, t, x));
            case Op::Cos: return std::cos(eval(*n.a, t, x));
            case Op::Exp: return std::exp(eval(*n.a, t, x));
        }
        return NAN;
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;
        std::size_t dim;

        [[noreturn]] void fail(const std::string& why) const {
            throw Error(ErrorKind::Configuration,
                        "expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + why);
        }

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }

        bool eat(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        static Ptr make(Op op, Ptr a = nullptr, Ptr b = nullptr) {
            return std::make_shared<const Node>(Node{op, 0.0, 0, std::move(a), std::move(b)});
        }

        Ptr expr() {
            Ptr lhs = term();
            while (true) {
                if (eat('+')) lhs = make(Op::Add, lhs, term());
                else if (eat('-')) lhs = make(Op::Sub, lhs, term());
                else return lhs;
            }
        }

        Ptr term() {
            Ptr lhs = unary();
            while (true) {
                if (eat('*')) lhs = make(Op::Mul, lhs, unary());
                else if (eat('/')) lhs = make(Op::Div, lhs, unary());
                else return lhs;
            }
        }

        Ptr unary() {
            if (eat('-')) return make(Op::Neg, unary());
            if (eat('+')) return unary();
            return power();
        }

        // Right associative; binds tighter than unary minus on its left.
        Ptr power() {
            Ptr base = primary();
            if (eat('^')) return make(Op::Pow, base, unary());
            return base;
        }

        Ptr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end");
            if (eat('(')) {
                Ptr e = expr();
                if (!eat(')')) fail("expected ')'");
                return e;
            }
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const char* begin = s.c_str() + pos;
                char* end = nullptr;
                const double v = std::strtod(begin, &end);
                if (end == begin) fail("bad number");
                pos += static_cast<std::size_t>(end - begin);
                auto n = std::make_shared<Node>(Node{Op::Num});
                n->value = v;
                return n;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                const std::string id = s.substr(start, pos - start);
                if (id == "sin" || id == "cos" || id == "exp") {
                    if (!eat('(')) fail("expected '(' after " + id);
                    Ptr arg = expr();
                    if (!eat(')')) fail("expected ')'");
                    return make(id == "sin" ? Op::Sin : id == "cos" ? Op::Cos : Op::Exp, arg);
                }
                if (id == "t") return make(Op::T);
                if (id == "pi") {
                    auto n = std::make_shared<Node>(Node{Op::Num});
                    n->value = std::numbers::pi;
                    return n;
                }
                if (id.size() > 1 && id[0] == 'x' && id.find_first_not_of("0123456789", 1) == std::string::npos) {
                    const std::size_t k = std::stoul(id.substr(1));
                    if (k == 0 || k > dim) fail("state variable " + id + " out of range for dimension " + std::to_string(dim));
                    auto n = std::make_shared<Node>(Node{Op::Var});
                    n->index = k - 1;
                    return n;
                }
                pos = start;
                fail("unknown identifier '" + id + "'");
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    std::string text_;
    Ptr root_;
};

}  // namespace entrain::app
