#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hamts/errors.hpp"

namespace hamts {

// Scalar expression of the time variable t over the grammar
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := atom ('^' factor)?
//   atom   := number | 'i' | 't' | func '(' expr ')' | '(' expr ')' | '-' atom
// with func in {exp, sin, cos, sqrt}.  Evaluation is plain complex arithmetic;
// '^' with a non-integer exponent takes the principal branch.
class Expr {
  public:
    Expr() = default;

    static Expr parse(const std::string& text);
    static Expr constant(std::complex<double> v) {
        return Expr(std::make_shared<Node>(Node{Op::num, v, nullptr, nullptr}));
    }

    std::complex<double> eval(double t) const {
        if (!root_) throw ValidationError("empty expression");
        return eval_node(*root_, t);
    }

    std::string str() const { return root_ ? print(*root_, 0) : std::string(); }

  private:
    enum class Op { num, var_t, imag, neg, add, sub, mul, div, pow, fexp, fsin, fcos, fsqrt };

    struct Node {
        Op op;
        std::complex<double> value;
        std::shared_ptr<const Node> a, b;
    };
    using NodePtr = std::shared_ptr<const Node>;

    explicit Expr(NodePtr root) : root_(std::move(root)) {}
    NodePtr root_;

    // Signed zeros pick the branch of sqrt/pow; strip them so real negative
    // arguments land on the principal (upper) side of the cut.
    static std::complex<double> unsign_zero(std::complex<double> v) {
        return {v.real() == 0.0 ? 0.0 : v.real(), v.imag() == 0.0 ? 0.0 : v.imag()};
    }

    static std::complex<double> eval_node(const Node& n, double t) {
        using cd = std::complex<double>;
        switch (n.op) {
            case Op::num: return n.value;
            case Op::var_t: return cd(t, 0.0);
            case Op::imag: return cd(0.0, 1.0);
            case Op::neg: return -eval_node(*n.a, t);
            case Op::add: return eval_node(*n.a, t) + eval_node(*n.b, t);
            case Op::sub: return eval_node(*n.a, t) - eval_node(*n.b, t);
            case Op::mul: return eval_node(*n.a, t) * eval_node(*n.b, t);
            case Op::div: {
                cd den = eval_node(*n.b, t);
                if (den == cd(0.0, 0.0))
                    throw NumericalError("division by zero at t = " + std::to_string(t));
                return eval_node(*n.a, t) / den;
            }
            case Op::pow: {
                cd base = unsign_zero(eval_node(*n.a, t));
                cd e = eval_node(*n.b, t);
                // exact small-integer exponents keep real bases exactly real
                if (e.imag() == 0.0 && e.real() == std::nearbyint(e.real()) &&
                    std::abs(e.real()) <= 64.0) {
                    long k = static_cast<long>(e.real());
                    if (k == 0) return cd(1.0, 0.0);
                    cd acc(1.0, 0.0), b = base;
                    long m = std::abs(k);
                    while (m > 0) {
                        if (m & 1) acc *= b;
                        b *= b;
                        m >>= 1;
                    }
                    if (k < 0) {
                        if (acc == cd(0.0, 0.0))
                            throw NumericalError("division by zero at t = " + std::to_string(t));
                        return cd(1.0, 0.0) / acc;
                    }
                    return acc;
                }
                return std::pow(base, unsign_zero(e));
            }
            case Op::fexp: return std::exp(eval_node(*n.a, t));
            case Op::fsin: return std::sin(eval_node(*n.a, t));
            case Op::fcos: return std::cos(eval_node(*n.a, t));
            case Op::fsqrt: return std::sqrt(unsign_zero(eval_node(*n.a, t)));
        }
        throw ValidationError("corrupt expression node");
    }

    static int precedence(Op op) {
        switch (op) {
            case Op::add: case Op::sub: return 1;
            case Op::mul: case Op::div: return 2;
            case Op::neg: return 3;
            case Op::pow: return 4;
            default: return 5;
        }
    }

    static std::string print(const Node& n, int parent_prec) {
        auto wrap = [&](const std::string& s, int prec) {
            return prec < parent_prec ? "(" + s + ")" : s;
        };
        switch (n.op) {
            case Op::num: {
                std::string s;
                if (n.value.imag() == 0.0) {
                    s = format_double(n.value.real());
                    if (n.value.real() < 0) return wrap(s, 3);
                    return s;
                }
                s = "(" + format_double(n.value.real()) + "+" + format_double(n.value.imag()) +
                    "*i)";
                return s;
            }
            case Op::var_t: return "t";
            case Op::imag: return "i";
            case Op::neg: return wrap("-" + print(*n.a, precedence(Op::neg) + 1), 3);
            case Op::add: return wrap(print(*n.a, 1) + "+" + print(*n.b, 2), 1);
            case Op::sub: return wrap(print(*n.a, 1) + "-" + print(*n.b, 2), 1);
            case Op::mul: return wrap(print(*n.a, 2) + "*" + print(*n.b, 3), 2);
            case Op::div: return wrap(print(*n.a, 2) + "/" + print(*n.b, 3), 2);
            case Op::pow: return wrap(print(*n.a, 5) + "^" + print(*n.b, 4), 4);
            case Op::fexp: return "exp(" + print(*n.a, 0) + ")";
            case Op::fsin: return "sin(" + print(*n.a, 0) + ")";
            case Op::fcos: return "cos(" + print(*n.a, 0) + ")";
            case Op::fsqrt: return "sqrt(" + print(*n.a, 0) + ")";
        }
        return "?";
    }

    static std::string format_double(double v) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    }

    class Parser {
      public:
        explicit Parser(const std::string& src) : src_(src) {}

        NodePtr run() {
            NodePtr e = expr();
            skip_ws();
            if (pos_ != src_.size())
                throw ParseError("syntax error at offset " + std::to_string(pos_) +
                                     ": unexpected '" + std::string(1, src_[pos_]) + "'",
                                 pos_);
            return e;
        }

      private:
        const std::string& src_;
        std::size_t pos_ = 0;

        void skip_ws() {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
                ++pos_;
        }
        bool eat(char c) {
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }
        [[noreturn]] void fail(const std::string& what) {
            throw ParseError("syntax error at offset " + std::to_string(pos_) + ": " + what, pos_);
        }

        static NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr,
                            std::complex<double> v = {}) {
            return std::make_shared<Node>(Node{op, v, std::move(a), std::move(b)});
        }

        NodePtr expr() {
            NodePtr lhs = term();
            for (;;) {
                if (eat('+')) lhs = make(Op::add, lhs, term());
                else if (eat('-')) lhs = make(Op::sub, lhs, term());
                else return lhs;
            }
        }

        NodePtr term() {
            NodePtr lhs = factor();
            for (;;) {
                if (eat('*')) lhs = make(Op::mul, lhs, factor());
                else if (eat('/')) lhs = make(Op::div, lhs, factor());
                else return lhs;
            }
        }

        NodePtr factor() {
            NodePtr base = atom();
            if (eat('^')) return make(Op::pow, base, factor());  // right-assoc
            return base;
        }

        NodePtr atom() {
            skip_ws();
            if (pos_ >= src_.size()) fail("unexpected end of input");
            char c = src_[pos_];
            if (c == '-') {
                ++pos_;
                return make(Op::neg, atom());
            }
            if (c == '(') {
                ++pos_;
                NodePtr e = expr();
                if (!eat(')')) fail("expected ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    ++pos_;
                std::string name = src_.substr(start, pos_ - start);
                if (name == "t") return make(Op::var_t);
                if (name == "i") return make(Op::imag);
                Op fn;
                if (name == "exp") fn = Op::fexp;
                else if (name == "sin") fn = Op::fsin;
                else if (name == "cos") fn = Op::fcos;
                else if (name == "sqrt") fn = Op::fsqrt;
                else {
                    pos_ = start;
                    fail("unknown identifier '" + name + "'");
                }
                if (!eat('(')) fail("expected '(' after function name");
                NodePtr arg = expr();
                if (!eat(')')) fail("expected ')'");
                return make(fn, arg);
            }
            fail(std::string("unexpected '") + c + "'");
        }

        NodePtr number() {
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t mark = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    while (pos_ < src_.size() &&
                           std::isdigit(static_cast<unsigned char>(src_[pos_])))
                        ++pos_;
                } else {
                    pos_ = mark;  // 'e' was not an exponent
                }
            }
            double v = 0;
            auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
            if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
                fail("malformed number");
            return make(Op::num, nullptr, nullptr, std::complex<double>(v, 0.0));
        }
    };
};

inline Expr Expr::parse(const std::string& text) {
    Parser p(text);
    return Expr(p.run());
}

}  // namespace hamts
